"""Critical values.

Two kinds: the boundary-crossing constant for the sequential procedure under
the maximum norm (alternating-series CDF of sup |W| plus a root finder), and
Monte Carlo quantiles of the sup of the squared-norm Brownian bridge for the
retrospective test.  Retro values are simulation-derived, cached, and keyed by
the full request.
"""

import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from dpdmon.exceptions import ConfigurationError

_MAX_TERMS = 100_000
_MC_BLOCK = 2048  # replications per RNG substream; fixed so results are reproducible

CACHE_ENV_VAR = "DPD_CACHE_DIR"
_CACHE_FILE = "retro_critvals.txt"
_CACHE_VERSION = "v1"

#: in-process memo mirroring the on-disk cache (same keys)
_MEMO: dict = {}


class CritvalKind(Enum):
    SEQUENTIAL_MAX_NORM = "sequential"
    RETRO_SUP_BRIDGE = "retro"


@dataclass(frozen=True)
class CritvalRequest:
    """Critical-value request: parameter dimension, significance level, kind."""

    d: int
    level: float
    kind: CritvalKind = CritvalKind.SEQUENTIAL_MAX_NORM


def sup_abs_bm_cdf(b: float, tol: float = 1e-14) -> float:
    """P(sup_{0<s<1} |W(s)| <= b) by the alternating exponential series.

    The series is truncated at the first term smaller than ``tol`` in absolute
    value; by the alternating-series bound the truncation error is below that
    term.
    """
    if not np.isfinite(b) or b <= 0.0:
        raise ConfigurationError(f"boundary level b must be positive, got {b!r}")
    if tol <= 0.0:
        raise ConfigurationError("tol must be positive")
    total = 0.0
    c = math.pi * math.pi / (8.0 * b * b)
    for k in range(_MAX_TERMS):
        m = 2 * k + 1
        term = (4.0 / math.pi) * ((-1.0) ** k / m) * math.exp(-c * m * m)
        if abs(term) < tol:
            break
        total += term
    return total


def _sup_abs_bm_cdf_deriv(b: float, tol: float = 1e-14) -> float:
    """d/db of :func:`sup_abs_bm_cdf` (used for the Newton polish)."""
    total = 0.0
    c = math.pi * math.pi / (8.0 * b * b)
    for k in range(_MAX_TERMS):
        m = 2 * k + 1
        term = (math.pi / b**3) * ((-1.0) ** k * m) * math.exp(-c * m * m)
        if abs(term) < tol:
            break
        total += term
    return total


def critical_value_sequential(d: int, level: float) -> float:
    """Constant boundary b solving 1 - F(b)^d = level for the max norm,
    where F is :func:`sup_abs_bm_cdf`.

    Bisection on [0.1, 10] to 1e-8 followed by one Newton polish; covers
    parameter dimensions d = 1..10.
    """
    if not isinstance(d, (int, np.integer)) or not 1 <= int(d) <= 10:
        raise ConfigurationError(f"parameter dimension d must be an integer in [1, 10], got {d!r}")
    if not (0.0 < level < 1.0):
        raise ConfigurationError(f"significance level must lie in (0, 1), got {level!r}")
    d = int(d)
    target = (1.0 - level) ** (1.0 / d)
    lo, hi = 0.1, 10.0
    if not (sup_abs_bm_cdf(lo) < target < sup_abs_bm_cdf(hi)):
        raise ConfigurationError(f"root not bracketed on [{lo}, {hi}] for d={d}, level={level}")
    while hi - lo > 1e-8:
        mid = 0.5 * (lo + hi)
        if sup_abs_bm_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    b = 0.5 * (lo + hi)
    f = sup_abs_bm_cdf(b)
    fp = _sup_abs_bm_cdf_deriv(b)
    if fp > 0.0:
        b -= (f**d - (1.0 - level)) / (d * f ** (d - 1) * fp)
    return b


def _cache_path(cache_dir):
    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_ENV_VAR)
    if not cache_dir:
        return None
    return Path(cache_dir) / _CACHE_FILE


def _cache_key(d, level, grid_n, n_mc, seed):
    return f"{_CACHE_VERSION} {d} {level:.17g} {grid_n} {n_mc} {seed}"


def _cache_lookup(path, key):
    if path is None or not path.exists():
        return None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith(key + " "):
                return float(line.split()[-1])
    return None


def _cache_store(path, key, value):
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fh.write(f"{key} {value:.17g}\n")


def critical_value_retro(
    d: int,
    level: float,
    grid_n: int = 4096,
    n_mc: int = 100_000,
    seed: int = None,
    cache_dir=None,
) -> float:
    """Empirical (1-level) quantile of sup_s sum_i B_i(s)^2 over a uniform
    grid, with B_i independent Brownian bridges W(s) - s W(1).

    Simulation-derived (there is no published table for this limit); the sup
    over the grid slightly undershoots the continuous sup, which the default
    2^12 grid keeps well inside the quoted tolerances.  Deterministic given
    (d, level, grid_n, n_mc, seed); results are cached in a versioned
    key-value file under ``cache_dir`` (or $DPD_CACHE_DIR) when set.
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ConfigurationError(f"parameter dimension d must be a positive integer, got {d!r}")
    if not (0.0 < level < 1.0):
        raise ConfigurationError(f"significance level must lie in (0, 1), got {level!r}")
    if grid_n < 1000:
        raise ConfigurationError(f"grid_n must be >= 1000, got {grid_n}")
    if n_mc < 10_000:
        raise ConfigurationError(f"n_mc must be >= 10000, got {n_mc}")
    if seed is None:
        raise ConfigurationError("seed is required for the retro critical value")
    d, grid_n, n_mc, seed = int(d), int(grid_n), int(n_mc), int(seed)

    path = _cache_path(cache_dir)
    key = _cache_key(d, level, grid_n, n_mc, seed)
    if key in _MEMO:
        return _MEMO[key]
    cached = _cache_lookup(path, key)
    if cached is not None:
        _MEMO[key] = cached
        return cached

    sups = _simulate_sup_bridge_sq(d, grid_n, n_mc, seed)
    c = float(np.quantile(sups, 1.0 - level))
    _MEMO[key] = c
    _cache_store(path, key, c)
    return c


def _simulate_sup_bridge_sq(d: int, grid_n: int, n_mc: int, seed: int) -> np.ndarray:
    """Per-replication sup of the squared-norm discretized bridge."""
    n_blocks = (n_mc + _MC_BLOCK - 1) // _MC_BLOCK
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    s_grid = np.arange(1, grid_n + 1, dtype=float) / grid_n
    sups = np.empty(n_mc)
    pos = 0
    scale = 1.0 / math.sqrt(grid_n)
    for child in children:
        bs = min(_MC_BLOCK, n_mc - pos)
        rng = np.random.default_rng(child)
        acc = np.zeros((bs, grid_n))
        for _ in range(d):
            incr = rng.standard_normal((bs, grid_n)) * scale
            w = np.cumsum(incr, axis=1)
            bridge = w - s_grid * w[:, -1:]
            acc += bridge * bridge
        sups[pos : pos + bs] = acc.max(axis=1)
        pos += bs
    return sups


def critical_value(request: CritvalRequest, **mc_options) -> float:
    """Dispatch on the request kind; ``mc_options`` feed the retro simulation."""
    if request.kind is CritvalKind.SEQUENTIAL_MAX_NORM:
        return critical_value_sequential(request.d, request.level)
    return critical_value_retro(request.d, request.level, **mc_options)
