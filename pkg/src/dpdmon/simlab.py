"""Monte Carlo harness: GARCH path generation, outlier contamination (H/M/HM
placement), scenario assembly, and empirical size/power/delay aggregation.

Seeding layout: the master seed spawns one substream per replication; each
replication spawns (path, contamination, jitter) children in that order.  The
jitter child is reserved but unused (all optimizer starts are deterministic),
and contamination draws never touch the path substream, so toggling
contamination leaves the clean path unchanged -- which is what makes the
paired delay-ratio comparison valid.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from dpdmon import _backend
from dpdmon.core import Alpha, ConstantBoundary, NormKind
from dpdmon.critval import critical_value_sequential
from dpdmon.exceptions import ConfigurationError, DPDError, UndefinedRatioError
from dpdmon.garch import GarchParams, mdpde_fit_garch
from dpdmon.monitor import run_monitor

CONTAMINATION_KINDS = ("none", "H", "M", "HM")

#: stop code for a replication that never crossed the boundary
NO_STOP = -1


def _rng_of(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    if seed_or_rng is None:
        raise ConfigurationError("a seed (or Generator) is required for reproducibility")
    return np.random.default_rng(seed_or_rng)


def simulate_garch_path(theta: GarchParams, n: int, burn_in: int = 500, seed=None) -> np.ndarray:
    """Strictly stationary start: pre-sample lags at the unconditional
    variance, then ``burn_in`` discarded steps.  Deterministic per seed."""
    if theta.persistence >= 1.0:
        raise ConfigurationError(
            f"simulation requires second-moment stationarity; persistence = {theta.persistence}"
        )
    if n < 1 or burn_in < 0:
        raise ConfigurationError("need n >= 1 and burn_in >= 0")
    rng = _rng_of(seed)
    eps = rng.standard_normal(n + burn_in)
    v = theta.unconditional_variance()
    x, _, _ = _backend.garch_simulate(
        theta.as_array(), theta.p, theta.q, eps, np.full(theta.p, v), np.full(theta.q, v)
    )
    return x[burn_in:]


def contaminate(path, p: float, s: float, seed=None) -> np.ndarray:
    """Shift each point outward by ``s`` with probability ``p``:
    x -> x + s * bernoulli * sign(x), with sign(0) taken as +1."""
    if not (0.0 <= p < 1.0):
        raise ConfigurationError(f"outlier probability must lie in [0, 1), got {p!r}")
    path = np.asarray(path, dtype=float)
    rng = _rng_of(seed)
    hit = rng.random(path.shape[0]) < p
    sign = np.where(path >= 0.0, 1.0, -1.0)
    return path + s * hit * sign


@dataclass(frozen=True)
class Scenario:
    """One experiment design.

    ``theta1 is None`` makes it a size experiment; otherwise the parameter
    switches to ``theta1`` at monitoring step ``k_star`` + 1 (the recursion
    continues from the pre-change state).  ``contamination`` places outliers
    in the historical window (H), the monitoring steps ``contam_window`` (M),
    or both (HM).  ``s_mult`` scales the outlier size as a multiple of the
    process standard deviation of ``theta0``.
    """

    theta0: GarchParams
    n_hist: int
    horizon: int
    reps: int
    seed: int
    theta1: GarchParams | None = None
    k_star: int | None = None
    contamination: str = "none"
    p_outlier: float = 0.0
    s_mult: float = 5.0
    contam_window: tuple = (1, 200)
    alpha_grid: tuple = (0.0, 0.1, 0.2, 0.3, 0.5)
    level: float = 0.05
    burn_in: int = 500
    paired_clean: bool = False
    norm: NormKind = NormKind.MAX

    def __post_init__(self):
        if self.contamination not in CONTAMINATION_KINDS:
            raise ConfigurationError(
                f"contamination must be one of {CONTAMINATION_KINDS}, got {self.contamination!r}"
            )
        if not (0.0 <= self.p_outlier < 1.0):
            raise ConfigurationError(f"p_outlier must lie in [0, 1), got {self.p_outlier!r}")
        if not (0.0 < self.level < 1.0):
            raise ConfigurationError(f"level must lie in (0, 1), got {self.level!r}")
        if self.n_hist < 100:
            raise ConfigurationError("n_hist must be >= 100 (fitting needs the data)")
        if self.horizon < 1 or self.reps < 1 or self.burn_in < 0:
            raise ConfigurationError("horizon, reps must be >= 1 and burn_in >= 0")
        if self.theta1 is not None:
            if self.k_star is None or not (0 <= self.k_star < self.horizon):
                raise ConfigurationError("a change scenario needs 0 <= k_star < horizon")
            if self.theta1.persistence >= 1.0:
                raise ConfigurationError("theta1 must be second-moment stationary")
        if self.theta0.persistence >= 1.0:
            raise ConfigurationError("theta0 must be second-moment stationary")
        if self.seed is None:
            raise ConfigurationError("a master seed is required")
        if not self.alpha_grid:
            raise ConfigurationError("alpha_grid must be nonempty")
        for a in self.alpha_grid:
            Alpha(float(a))
        w0, w1 = self.contam_window
        if not (1 <= w0 <= w1):
            raise ConfigurationError(f"contam_window must satisfy 1 <= lo <= hi, got {self.contam_window}")
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "contam_window", (int(w0), int(w1)))

    @property
    def d(self) -> int:
        return self.theta0.d

    def outlier_size(self) -> float:
        return self.s_mult * math.sqrt(self.theta0.unconditional_variance())


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated outcome of one scenario.

    ``stops[alpha]`` holds the 1-based stop index per replication
    (:data:`NO_STOP` when the detector never crossed); ``failed[alpha]`` marks
    replications whose fit failed (excluded from rates).  ``clean_stops`` is
    present for paired runs and feeds the delay ratios.
    """

    scenario: Scenario
    boundary_b: float
    stops: dict
    failed: dict
    clean_stops: dict | None = None
    clean_failed: dict | None = None

    @property
    def alphas(self) -> tuple:
        return self.scenario.alpha_grid

    @property
    def flagged(self) -> bool:
        reps = self.scenario.reps
        sides = [self.failed]
        if self.clean_failed is not None:
            sides.append(self.clean_failed)
        return any(
            int(np.sum(side[a])) >= 0.02 * reps for side in sides for a in self.alphas
        )

    def n_ok(self, alpha) -> int:
        return int(np.sum(~self.failed[alpha]))

    def rejection_curve(self, alpha, stops=None, failed=None) -> np.ndarray:
        """Cumulative fraction of (non-failed) replications stopped by k,
        for k = 1..horizon.  Nondecreasing by construction."""
        stops = self.stops[alpha] if stops is None else stops
        failed = self.failed[alpha] if failed is None else failed
        ok = ~failed
        n_ok = int(np.sum(ok))
        if n_ok == 0:
            raise UndefinedRatioError(f"no usable replications at alpha={alpha}")
        s = stops[ok]
        counts = np.bincount(
            s[s != NO_STOP], minlength=self.scenario.horizon + 1
        )[1 : self.scenario.horizon + 1]
        return np.cumsum(counts) / n_ok

    def terminal_rate(self, alpha) -> float:
        return float(self.rejection_curve(alpha)[-1])

    def delays(self, alpha, stops=None, failed=None) -> np.ndarray:
        """Delay times stop_k - k_star over non-failed replications; a
        replication that never stopped contributes (horizon + 1) - k_star."""
        if self.scenario.k_star is None:
            raise ConfigurationError("delay times are defined only for change scenarios")
        stops = self.stops[alpha] if stops is None else stops
        failed = self.failed[alpha] if failed is None else failed
        s = stops[~failed].astype(float)
        s[s == NO_STOP] = self.scenario.horizon + 1
        return s - self.scenario.k_star

    def delay_stats(self, alpha) -> dict:
        dl = self.delays(alpha)
        if dl.size == 0:
            raise UndefinedRatioError(f"no usable replications at alpha={alpha}")
        q25, q50, q75 = np.quantile(dl, [0.25, 0.5, 0.75])
        return {
            "n": int(dl.size),
            "mean": float(dl.mean()),
            "q25": float(q25),
            "median": float(q50),
            "q75": float(q75),
        }

    def d_alpha(self) -> dict | None:
        """Contaminated/clean mean-delay ratios when the paired clean run is
        present."""
        if self.clean_stops is None:
            return None
        out = {}
        for a in self.alphas:
            num = self.delays(a).mean()
            den = self.delays(a, stops=self.clean_stops[a], failed=self.clean_failed[a]).mean()
            if den == 0.0:
                raise UndefinedRatioError(f"clean mean delay is zero at alpha={a}")
            out[a] = float(num / den)
        return out


def _generate_series(sc: Scenario, rng: np.random.Generator):
    """One clean replication: historical window plus monitoring stream, with
    the parameter switch (if any) continuing the recursion in-place."""
    total = sc.burn_in + sc.n_hist + sc.horizon
    eps = rng.standard_normal(total)
    v = sc.theta0.unconditional_variance()
    x2l = np.full(sc.theta0.p, v)
    s2l = np.full(sc.theta0.q, v)
    n_pre = sc.burn_in + sc.n_hist + (sc.k_star if sc.theta1 is not None else sc.horizon)
    x_pre, x2l, s2l = _backend.garch_simulate(
        sc.theta0.as_array(), sc.theta0.p, sc.theta0.q, eps[:n_pre], x2l, s2l
    )
    if sc.theta1 is not None and n_pre < total:
        x_post, _, _ = _backend.garch_simulate(
            sc.theta1.as_array(), sc.theta1.p, sc.theta1.q, eps[n_pre:], x2l, s2l
        )
        x = np.concatenate([x_pre, x_post])
    else:
        x = x_pre
    hist = x[sc.burn_in : sc.burn_in + sc.n_hist]
    stream = x[sc.burn_in + sc.n_hist :]
    return hist, stream


def _contaminated_variants(sc: Scenario, hist, stream, rng_contam):
    """Apply the scenario's contamination placement; the Bernoulli substream
    is consumed in a fixed order (historical first)."""
    s = sc.outlier_size()
    hist_c, stream_c = hist, stream
    if sc.contamination in ("H", "HM"):
        hist_c = contaminate(hist, sc.p_outlier, s, rng_contam)
    if sc.contamination in ("M", "HM"):
        w0, w1 = sc.contam_window
        w1 = min(w1, sc.horizon)
        stream_c = stream.copy()
        stream_c[w0 - 1 : w1] = contaminate(stream[w0 - 1 : w1], sc.p_outlier, s, rng_contam)
    return hist_c, stream_c


def _one_rep(sc: Scenario, child_ss, boundary):
    ss_path, ss_contam, _ss_jitter = child_ss.spawn(3)
    rng_path = np.random.default_rng(ss_path)
    rng_contam = np.random.default_rng(ss_contam)
    hist, stream = _generate_series(sc, rng_path)
    hist_c, stream_c = _contaminated_variants(sc, hist, stream, rng_contam)

    def run(h, s):
        stops, fails = {}, {}
        for a in sc.alpha_grid:
            try:
                fit = mdpde_fit_garch(h, a, p=sc.theta0.p, q=sc.theta0.q)
                out = run_monitor(fit, h, s, boundary, norm=sc.norm, horizon=sc.horizon)
                stops[a] = out.stop_k if out.stop_k is not None else NO_STOP
                fails[a] = False
            except DPDError:
                stops[a] = NO_STOP
                fails[a] = True
        return stops, fails

    stops, fails = run(hist_c, stream_c)
    if sc.paired_clean:
        stops_clean, fails_clean = run(hist, stream)
    else:
        stops_clean = fails_clean = None
    return stops, fails, stops_clean, fails_clean


def run_scenario(sc: Scenario, n_jobs: int = 1) -> ExperimentReport:
    """Execute every replication and aggregate.

    Replications are embarrassingly parallel (``n_jobs`` > 1 uses joblib);
    aggregation is by replication index, so the report is identical for
    identical scenarios regardless of the worker count.
    """
    boundary = ConstantBoundary(critical_value_sequential(sc.d, sc.level))
    children = np.random.SeedSequence(sc.seed).spawn(sc.reps)
    if n_jobs == 1:
        results = [_one_rep(sc, child, boundary) for child in children]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(
            delayed(_one_rep)(sc, child, boundary) for child in children
        )

    def collect(index):
        out = {}
        for a in sc.alpha_grid:
            out[a] = np.array([r[index][a] for r in results])
        return out

    stops = collect(0)
    failed = {a: v.astype(bool) for a, v in collect(1).items()}
    if sc.paired_clean:
        clean_stops = {a: np.array([r[2][a] for r in results]) for a in sc.alpha_grid}
        clean_failed = {a: np.array([r[3][a] for r in results], dtype=bool) for a in sc.alpha_grid}
    else:
        clean_stops = clean_failed = None
    return ExperimentReport(
        scenario=sc,
        boundary_b=boundary.b,
        stops=stops,
        failed=failed,
        clean_stops=clean_stops,
        clean_failed=clean_failed,
    )


def delay_ratio_table(report_contaminated: ExperimentReport, report_clean: ExperimentReport) -> dict:
    """Per-alpha ratios of mean delay, contaminated over clean.

    The two reports must share the alpha grid, horizon, and change index.
    """
    sc_c, sc_0 = report_contaminated.scenario, report_clean.scenario
    if sc_c.alpha_grid != sc_0.alpha_grid or sc_c.horizon != sc_0.horizon or sc_c.k_star != sc_0.k_star:
        raise ConfigurationError("reports do not share a common experiment shape")
    out = {}
    for a in sc_c.alpha_grid:
        dc = report_contaminated.delays(a)
        d0 = report_clean.delays(a)
        if dc.size == 0 or d0.size == 0:
            raise UndefinedRatioError(f"no usable replications at alpha={a}")
        if d0.mean() == 0.0:
            raise UndefinedRatioError(f"clean mean delay is zero at alpha={a}")
        out[a] = float(dc.mean() / d0.mean())
    return out


def _parse_theta(text, p, q, key):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) != 1 + p + q:
        raise ConfigurationError(f"{key}: expected {1 + p + q} values (omega, {p} alphas, {q} betas)")
    return GarchParams(vals[0], tuple(vals[1 : 1 + p]), tuple(vals[1 + p :]))


def parse_scenario_config(text: str) -> Scenario:
    """Parse the key = value scenario format (README documents the schema)."""
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        kv[key.lower()] = val
    try:
        p = int(kv.pop("p", "1"))
        q = int(kv.pop("q", "1"))
        theta0 = _parse_theta(kv.pop("theta0"), p, q, "theta0")
        theta1_text = kv.pop("theta1", "none")
        theta1 = None if theta1_text.lower() == "none" else _parse_theta(theta1_text, p, q, "theta1")
        window_text = kv.pop("contam_window", "1, 200")
        w = [int(v) for v in window_text.replace(",", " ").split()]
        if len(w) != 2:
            raise ConfigurationError("contam_window: expected two integers")
        sc = Scenario(
            theta0=theta0,
            theta1=theta1,
            k_star=int(kv.pop("k_star")) if "k_star" in kv else None,
            n_hist=int(kv.pop("n_hist")),
            horizon=int(kv.pop("horizon")),
            contamination=kv.pop("contamination", "none"),
            p_outlier=float(kv.pop("p_outlier", "0")),
            s_mult=float(kv.pop("s_mult", "5")),
            contam_window=(w[0], w[1]),
            alpha_grid=tuple(float(v) for v in kv.pop("alpha_grid").replace(",", " ").split()),
            level=float(kv.pop("level", "0.05")),
            reps=int(kv.pop("reps")),
            seed=int(kv.pop("seed")) if "seed" in kv else None,
            burn_in=int(kv.pop("burn_in", "500")),
            paired_clean=kv.pop("paired_clean", "false").lower() in ("1", "true", "yes"),
        )
    except KeyError as exc:
        raise ConfigurationError(f"config is missing required key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigurationError(f"config value error: {exc}") from None
    if kv:
        raise ConfigurationError(f"unknown config keys: {sorted(kv)}")
    return sc


def with_contamination_off(sc: Scenario) -> Scenario:
    """Clean twin of a scenario (same seeds and paths, no outliers)."""
    return replace(sc, contamination="none", p_outlier=0.0, paired_clean=False)
