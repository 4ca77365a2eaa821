"""Retrospective change-point test: max over k of the quadratic form

    T(k) = (1/n) s_k' I_hat^{-1} s_k,      s_k = sum_{t<=k} grad l(X_t; theta_hat),

with the change point located at the (smallest) argmax.  Used on historical
windows before monitoring starts, and on the data up to a stop time after an
alarm.
"""

from dataclasses import dataclass

import numpy as np

from dpdmon import _backend
from dpdmon.core import FitResult, NormKind, inv_spd
from dpdmon.critval import critical_value_retro
from dpdmon.exceptions import ConfigurationError, DimensionError
from dpdmon.garch import GarchParams, mdpde_fit_garch, score_matrix_garch, vol_init
from dpdmon.monitor import MonitorOutcome, run_monitor
from dpdmon.normal import NormalTheta, mdpde_fit_normal, score_matrix_normal

#: Library-level default seed for the retro critical-value simulation; the CLI
#: requires an explicit seed instead.
DEFAULT_CRITVAL_SEED = 20240401


@dataclass(frozen=True)
class RetroResult:
    """Test statistic (max over the path), the per-k path, the located change
    point (1-based, smallest maximizer), and the decision."""

    statistic: float
    path: np.ndarray
    change_point: int
    critical: float
    reject: bool
    level: float
    alpha: float
    fit: FitResult


def partial_score_path(data, theta_hat, alpha) -> np.ndarray:
    """Cumulative sums of per-observation gradients at ``theta_hat`` under one
    continued recursion over the window; row k-1 is s_k.  Dispatches on the
    parameter type (NormalTheta or GarchParams)."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 1 or data.size == 0:
        raise DimensionError("expected a nonempty 1-d data vector")
    if isinstance(theta_hat, NormalTheta):
        G = score_matrix_normal(data, theta_hat, alpha)
    elif isinstance(theta_hat, GarchParams):
        state0 = vol_init(data, theta_hat.p, theta_hat.q)
        G, _, _ = score_matrix_garch(data, theta_hat, alpha, state0)
    else:
        raise ConfigurationError(f"unsupported parameter type {type(theta_hat).__name__}")
    return _backend.kahan_cumsum(G)


def retro_test(
    data,
    alpha,
    engine: str = "garch",
    p: int = 1,
    q: int = 1,
    level: float = 0.05,
    *,
    critval_seed: int = DEFAULT_CRITVAL_SEED,
    grid_n: int = 4096,
    n_mc: int = 100_000,
    cache_dir=None,
) -> RetroResult:
    """Fit on the full window, scan the partial-score quadratic form, and
    compare its max against the Monte Carlo sup-squared-bridge quantile."""
    if not (0.0 < level < 1.0):
        raise ConfigurationError(f"significance level must lie in (0, 1), got {level!r}")
    data = np.asarray(data, dtype=float)
    if engine == "normal":
        fit = mdpde_fit_normal(data, alpha)
    elif engine == "garch":
        fit = mdpde_fit_garch(data, alpha, p=p, q=q)
    else:
        raise ConfigurationError(f"unknown engine {engine!r}")
    n = data.size
    S = partial_score_path(data, fit.params, fit.alpha)
    info_inv = inv_spd(fit.info_hat)
    path = np.einsum("kd,de,ke->k", S, info_inv, S) / n
    change_point = int(np.argmax(path)) + 1
    statistic = float(path[change_point - 1])
    critical = critical_value_retro(
        fit.theta.shape[0], level, grid_n=grid_n, n_mc=n_mc, seed=critval_seed, cache_dir=cache_dir
    )
    return RetroResult(
        statistic=statistic,
        path=path,
        change_point=change_point,
        critical=critical,
        reject=statistic > critical,
        level=level,
        alpha=fit.alpha,
        fit=fit,
    )


def monitor_and_locate(
    fit: FitResult,
    historical,
    stream,
    boundary,
    horizon: int,
    norm: NormKind = NormKind.MAX,
    level: float = 0.05,
    **retro_options,
) -> tuple[MonitorOutcome, RetroResult | None]:
    """Run the sequential monitor; after an alarm, rerun the retrospective
    test on the data up to the stop time to locate the change.  Not a new
    algorithm, just the composition used in the applied workflow."""
    outcome = run_monitor(fit, historical, stream, boundary, norm=norm, horizon=horizon)
    if outcome.stop_k is None:
        return outcome, None
    historical = np.asarray(historical, dtype=float)
    stream = np.asarray(stream, dtype=float)
    window = np.concatenate([historical, stream[: outcome.stop_k]])
    located = retro_test(
        window,
        fit.alpha,
        engine=fit.engine,
        p=fit.p or 1,
        q=fit.q or 1,
        level=level,
        **retro_options,
    )
    return outcome, located
