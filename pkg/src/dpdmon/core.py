"""Shared primitives: tuning parameter, norms, boundary functions, SPD matrix roots.

Everything here is a pure function or an immutable value object; all of it is
safe to share across threads.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from dpdmon.exceptions import (
    ConfigurationError,
    DimensionError,
    SingularInformationError,
)

#: Largest tuning parameter accepted without an explicit override.  The
#: efficiency of the estimator degrades quickly beyond this point and none of
#: the shipped experiments go above 0.5.
ALPHA_CAP = 1.0


@dataclass(frozen=True)
class Alpha:
    """Nonnegative tuning parameter trading efficiency against robustness.

    ``value == 0`` selects the log-likelihood branch of every objective.
    Values above 1 are rejected unless ``allow_large`` is set.
    """

    value: float
    allow_large: bool = False

    def __post_init__(self):
        v = float(self.value)
        if not np.isfinite(v) or v < 0.0:
            raise ConfigurationError(f"alpha must be a finite nonnegative real, got {self.value!r}")
        if v > ALPHA_CAP and not self.allow_large:
            raise ConfigurationError(
                f"alpha={v} exceeds the cap {ALPHA_CAP}; pass allow_large=True to override"
            )
        object.__setattr__(self, "value", v)


def as_alpha(alpha) -> Alpha:
    """Coerce a float or :class:`Alpha` to :class:`Alpha`."""
    if isinstance(alpha, Alpha):
        return alpha
    return Alpha(float(alpha))


class NormKind(Enum):
    """Vector norm used by the detector.  MAX is the default everywhere."""

    MAX = "max"
    EUCLIDEAN = "euclidean"


def vector_norm(v, kind: NormKind = NormKind.MAX) -> float:
    """Norm of a nonempty vector; max norm or Euclidean norm."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError("vector_norm expects a nonempty 1-d vector")
    if kind is NormKind.MAX:
        return float(np.max(np.abs(v)))
    if kind is NormKind.EUCLIDEAN:
        peak = float(np.max(np.abs(v)))
        if peak == 0.0:
            return 0.0
        # scale by the peak so squaring cannot underflow or overflow
        scaled = v / peak
        return peak * float(np.sqrt(np.sum(scaled * scaled)))
    raise ConfigurationError(f"unknown norm kind {kind!r}")


class BoundaryFn:
    """Boundary function b(t) for the stopping rule.

    Implementations must be continuous on (0, inf) with a strictly positive
    infimum.  Only the constant kind is shipped; the evaluator interface is
    the extension point.
    """

    def __call__(self, t: float) -> float:  # pragma: no cover - interface
        raise NotImplementedError

    def infimum(self) -> float:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantBoundary(BoundaryFn):
    """b(t) = b for all t, with b > 0."""

    b: float

    def __post_init__(self):
        b = float(self.b)
        if not np.isfinite(b) or b <= 0.0:
            raise ConfigurationError(f"constant boundary must be strictly positive, got {self.b!r}")
        object.__setattr__(self, "b", b)

    def __call__(self, t: float) -> float:
        return self.b

    def infimum(self) -> float:
        return self.b


def _spd_eig(M, eps, what):
    """Symmetry-checked eigendecomposition of an SPD matrix with a floor."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DimensionError(f"{what} expects a square matrix, got shape {M.shape}")
    scale = float(np.max(np.abs(M)))
    if scale == 0.0:
        raise SingularInformationError(f"{what}: matrix is identically zero")
    if float(np.max(np.abs(M - M.T))) > 1e-8 * scale:
        raise DimensionError(f"{what}: matrix is not symmetric within tolerance")
    d = M.shape[0]
    if eps is None:
        eps = 1e-10 * float(np.trace(M)) / d
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if w[0] < eps:
        raise SingularInformationError(
            f"{what}: smallest eigenvalue {w[0]:.3e} below floor {eps:.3e} (degenerate fit)"
        )
    return w, V


def inv_sqrt_spd(M, eps: float | None = None) -> np.ndarray:
    """Symmetric inverse square root of an SPD matrix.

    Computed by spectral decomposition so the result S is symmetric and
    satisfies S @ M @ S = I to high accuracy.  ``eps`` floors the smallest
    admissible eigenvalue; the default is 1e-10 * trace(M)/d.  Eigenvalues
    below the floor signal a degenerate information estimate and raise
    :class:`SingularInformationError`.
    """
    w, V = _spd_eig(M, eps, "inv_sqrt_spd")
    S = (V * (w ** -0.5)) @ V.T
    return 0.5 * (S + S.T)


def inv_spd(M, eps: float | None = None) -> np.ndarray:
    """Inverse of an SPD matrix via the same spectral path and floor as
    :func:`inv_sqrt_spd`."""
    w, V = _spd_eig(M, eps, "inv_spd")
    Minv = (V * (1.0 / w)) @ V.T
    return 0.5 * (Minv + Minv.T)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FitResult:
    """Outcome of an MDPDE fit (either engine).

    ``theta`` is the raw parameter vector ((mu, sigma) for the normal engine,
    (omega, alpha_1..p, beta_1..q) for the GARCH engine); ``params`` is the
    corresponding typed object.  ``grad_norm`` is the inf-norm of the
    projected mean-objective gradient at ``theta``.
    """

    engine: str
    theta: np.ndarray
    params: object
    objective: float
    info_hat: np.ndarray
    grad_norm: float
    converged: bool
    n_used: int
    alpha: float
    p: int = 0
    q: int = 0
    n_starts: int = field(default=1, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "theta", _readonly(self.theta))
        object.__setattr__(self, "info_hat", _readonly(self.info_hat))

    @property
    def d(self) -> int:
        return self.theta.shape[0]
