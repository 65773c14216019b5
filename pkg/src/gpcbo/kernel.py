"""Stationary covariance functions and Gram matrix assembly.

Only the squared exponential kernel and the Matérn kernels with closed forms
(``nu`` in {1/2, 3/2, 5/2}) are provided. All kernels are scaled by the signal
variance, so ``k(0) == signal_variance`` exactly.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from gpcbo.errors import InputDomainError

MATERN_NUS = (0.5, 1.5, 2.5)

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)


class KernelFamily(str, Enum):
    SQUARED_EXPONENTIAL = "se"
    MATERN = "matern"


@dataclass(frozen=True)
class KernelSpec:
    """Covariance family and its hyperparameters.

    Parameters
    ----------
    family : KernelFamily or str
        ``"se"`` or ``"matern"``.
    length_scale : float
        Characteristic length scale, in mesh coordinate units.
    nu : float
        Matérn smoothness, one of 0.5, 1.5, 2.5. Ignored for ``"se"``.
    signal_variance : float
        Amplitude factor; the kernel value at zero distance.
    """

    family: KernelFamily = KernelFamily.MATERN
    length_scale: float = 1.0
    nu: float = 2.5
    signal_variance: float = 1.0

    def __post_init__(self):
        try:
            family = KernelFamily(self.family)
        except ValueError:
            raise InputDomainError(f"unknown kernel family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        if not (np.isfinite(self.length_scale) and self.length_scale > 0):
            raise InputDomainError(f"length_scale must be positive, got {self.length_scale}")
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise InputDomainError(
                f"signal_variance must be positive, got {self.signal_variance}"
            )
        if family is KernelFamily.MATERN and float(self.nu) not in MATERN_NUS:
            raise InputDomainError(
                f"smoothness nu must be one of {MATERN_NUS} for the Matérn family, got {self.nu}"
            )


def _profile(spec, r):
    s = r / spec.length_scale
    if spec.family is KernelFamily.SQUARED_EXPONENTIAL:
        return np.exp(-0.5 * s * s)
    nu = float(spec.nu)
    if nu == 0.5:
        return np.exp(-s)
    if nu == 1.5:
        t = SQRT3 * s
        return (1.0 + t) * np.exp(-t)
    t = SQRT5 * s
    return (1.0 + t + t * t / 3.0) * np.exp(-t)


def eval_kernel(spec, r):
    """Covariance at distance ``r`` (scalar or array, elementwise).

    Raises
    ------
    InputDomainError
        If any distance is negative or not finite.
    """
    r_arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r_arr)) or np.any(r_arr < 0):
        raise InputDomainError("kernel distances must be finite and nonnegative")
    out = spec.signal_variance * _profile(spec, r_arr)
    if out.ndim == 0:
        return float(out)
    return out


def as_points(X):
    """Coerce a point list into a 2D ``(n, dim)`` float array."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise InputDomainError(f"points must be a 1D or 2D array, got shape {arr.shape}")
    return arr


def pairwise_distances(X, Y):
    X = as_points(X)
    Y = as_points(Y)
    if X.shape[1] != Y.shape[1]:
        raise InputDomainError(
            f"point sets have different dimensions ({X.shape[1]} vs {Y.shape[1]})"
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InputDomainError("points must be finite")
    diff = X[:, None, :] - Y[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def gram(spec, X, Y=None):
    """Kernel matrix ``K[p, q] = k(|x_p - y_q|)`` with Euclidean distance.

    ``Y`` defaults to ``X``. Each entry is computed independently, so
    ``gram(X, Y) == gram(Y, X).T`` holds bit for bit.
    """
    if Y is None:
        Y = X
    return eval_kernel(spec, pairwise_distances(X, Y))
