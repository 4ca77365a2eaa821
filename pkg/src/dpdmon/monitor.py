"""Sequential monitoring: normalized-score detector, online state update, and
the stopping rule, for both the normal and GARCH engines.

The detector at monitoring step k is

    || inv_sqrt(I_hat) @ sum_{t=n+1}^{n+k} grad l(X_t; theta_hat) ||
    -----------------------------------------------------------------
                       sqrt(n) (1 + k/n)

with theta_hat and I_hat frozen from the historical window.  Monitoring stops
at the first k with detector > b(k/n) (strict inequality).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from dpdmon import _backend
from dpdmon.core import BoundaryFn, FitResult, NormKind, inv_sqrt_spd, vector_norm
from dpdmon.exceptions import ConfigurationError, DimensionError
from dpdmon.garch import VolState, score_matrix_garch, vol_init, vol_path_with_grads
from dpdmon.normal import score_matrix_normal


@dataclass(frozen=True)
class MonitorState:
    """Frozen fit quantities plus the running score accumulator.

    ``score_sum``/``score_comp`` implement compensated (Kahan) summation so a
    long incremental run stays within 1e-12 of a one-shot batch computation.
    ``vol_state`` carries the volatility-recursion lags across the
    history/monitoring boundary (GARCH engine only; None for the normal
    engine).  ``k`` counts consumed monitoring observations.
    """

    engine: str
    theta: np.ndarray
    params: object
    inv_sqrt_info: np.ndarray
    score_sum: np.ndarray
    score_comp: np.ndarray
    vol_state: VolState | None
    n: int
    k: int
    alpha: float

    @property
    def d(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class MonitorOutcome:
    """Detector path (one value per consumed k, starting at k=1), the stop
    index (1-based, None when no crossing), and the run configuration."""

    detector_path: np.ndarray
    stop_k: int | None
    boundary: BoundaryFn
    horizon: int
    n: int
    alpha: float
    norm: NormKind

    @property
    def alarm(self) -> bool:
        return self.stop_k is not None


def monitor_init(fit: FitResult, historical, alpha=None) -> MonitorState:
    """Freeze theta_hat and the inverse square root of I_hat; zero the score.

    For the GARCH engine the historical recursion (values and gradient lags)
    is replayed so monitoring continues the same recursion rather than
    re-initializing at t = n+1.
    """
    if alpha is not None and float(getattr(alpha, "value", alpha)) != fit.alpha:
        raise ConfigurationError("alpha does not match the fitted alpha")
    if not fit.converged:
        raise ConfigurationError("monitoring requires a converged fit")
    historical = np.asarray(historical, dtype=float)
    if historical.ndim != 1 or historical.size != fit.n_used:
        raise ConfigurationError(
            f"historical window (len {historical.size}) must be the fitting window (len {fit.n_used})"
        )
    A = inv_sqrt_spd(fit.info_hat)
    vol_state = None
    if fit.engine == "garch":
        state0 = vol_init(historical, fit.p, fit.q)
        _, _, vol_state = vol_path_with_grads(fit.params, historical, state0)
    elif fit.engine != "normal":
        raise ConfigurationError(f"unknown engine {fit.engine!r}")
    d = fit.theta.shape[0]
    return MonitorState(
        engine=fit.engine,
        theta=fit.theta,
        params=fit.params,
        inv_sqrt_info=A,
        score_sum=np.zeros(d),
        score_comp=np.zeros(d),
        vol_state=vol_state,
        n=fit.n_used,
        k=0,
        alpha=fit.alpha,
    )


def _score_rows(state: MonitorState, chunk):
    """Per-observation gradient rows for ``chunk`` plus the advanced vol state."""
    if state.engine == "normal":
        return score_matrix_normal(chunk, state.params, state.alpha), None
    G, _, new_vol = score_matrix_garch(chunk, state.params, state.alpha, state.vol_state)
    return G, new_vol


def detector_value(state: MonitorState, norm: NormKind = NormKind.MAX) -> float:
    """Detector at the state's current k (0 at k = 0 by construction)."""
    v = state.inv_sqrt_info @ state.score_sum
    return vector_norm(v, norm) / (math.sqrt(state.n) * (1.0 + state.k / state.n))


def monitor_step(state: MonitorState, x: float, boundary: BoundaryFn, norm: NormKind = NormKind.MAX):
    """Consume one observation; returns (new_state, detector_value, alarm)."""
    if not isinstance(boundary, BoundaryFn):
        raise ConfigurationError("boundary must be a BoundaryFn")
    G, new_vol = _score_rows(state, np.array([x], dtype=float))
    g = G[0]
    # single Kahan update; identical operation order to the batch kernel
    y = g - state.score_comp
    s = state.score_sum + y
    comp = (s - state.score_sum) - y
    new_state = replace(
        state,
        score_sum=s,
        score_comp=comp,
        vol_state=new_vol if state.engine == "garch" else None,
        k=state.k + 1,
    )
    d_value = detector_value(new_state, norm)
    alarm = d_value > boundary(new_state.k / new_state.n)
    return new_state, d_value, alarm


def run_monitor(
    fit: FitResult,
    historical,
    stream,
    boundary: BoundaryFn,
    norm: NormKind = NormKind.MAX,
    horizon: int = None,
) -> MonitorOutcome:
    """Scan the stream in arrival order and stop at the first boundary crossing.

    ``horizon`` bounds the scan (the theoretical procedure is open-ended; the
    artifact's contract is a bounded scan).  The detector path holds one value
    per consumed observation; when a crossing happens at k the path has
    exactly k entries.
    """
    if horizon is None or int(horizon) < 1:
        raise ConfigurationError("horizon is required and must be >= 1")
    if not isinstance(boundary, BoundaryFn):
        raise ConfigurationError("boundary must be a BoundaryFn")
    stream = np.asarray(stream, dtype=float)
    if stream.ndim != 1 or stream.size == 0:
        raise DimensionError("stream must be a nonempty 1-d vector")
    state = monitor_init(fit, historical)
    m = min(stream.size, int(horizon))
    G, _ = _score_rows(state, stream[:m])
    S = _backend.kahan_cumsum(G)
    V = S @ state.inv_sqrt_info
    if norm is NormKind.MAX:
        norms = np.max(np.abs(V), axis=1)
    elif norm is NormKind.EUCLIDEAN:
        norms = np.sqrt(np.sum(V * V, axis=1))
    else:
        raise ConfigurationError(f"unknown norm kind {norm!r}")
    ks = np.arange(1, m + 1, dtype=float)
    n = state.n
    detector = norms / (math.sqrt(n) * (1.0 + ks / n))
    bvals = np.array([boundary(k / n) for k in ks])
    crossings = np.nonzero(detector > bvals)[0]
    if crossings.size:
        stop = int(crossings[0]) + 1
        path = detector[:stop]
    else:
        stop = None
        path = detector
    return MonitorOutcome(
        detector_path=path,
        stop_k=stop,
        boundary=boundary,
        horizon=int(horizon),
        n=n,
        alpha=fit.alpha,
        norm=norm,
    )
