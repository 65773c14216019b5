"""Finite-dimensional Gaussian measures on a mesh.

The prior on mesh nodes has covariance ``A = K(X, X) + sigma_gp2 * I``.
Conditioning on data ``(x_train, y_train)`` gives the constrained measure

    mean = B C^{-1} y_train,    cov = A - B C^{-1} B^T,

with ``B = K(X, x_train)`` and ``C = K(x_train, x_train)``. Zeroing that mean
gives the homogeneous measure, whose samples vanish at the training points.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, cholesky

from gpcbo.errors import ConditioningError, InputDomainError
from gpcbo.kernel import as_points, gram

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class TrainingData:
    """Prescribed function values at scattered points (boundary, initial, state data)."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if values.size == 0:
            points = np.asarray(self.points, dtype=float).reshape(0, max(1, _guess_dim(self.points)))
        else:
            points = as_points(self.points)
        if points.shape[0] != values.shape[0]:
            raise InputDomainError(
                f"{points.shape[0]} training points but {values.shape[0]} values"
            )
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(values))):
            raise InputDomainError("training data must be finite")
        if points.shape[0] > 1:
            uniq = np.unique(points, axis=0)
            if uniq.shape[0] != points.shape[0]:
                raise InputDomainError("training points must be pairwise distinct")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    @classmethod
    def empty(cls, dim=1):
        return cls(np.zeros((0, dim)), np.zeros(0))

    def concat(self, other):
        if len(other) == 0:
            return self
        if len(self) == 0:
            return other
        return TrainingData(
            np.vstack([self.points, other.points]),
            np.concatenate([self.values, other.values]),
        )


def _guess_dim(points):
    arr = np.asarray(points, dtype=float)
    return arr.shape[1] if arr.ndim == 2 else 1


@dataclass(frozen=True)
class GaussianMeasure:
    """Gaussian on ``components`` independent copies of the mesh nodes.

    ``covariance`` and ``chol`` describe one component (``P x P``); ``mean``
    has length ``components * P`` with components stored contiguously.
    """

    mean: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    jitter_used: float = 0.0
    components: int = 1

    @property
    def size(self):
        return self.covariance.shape[0]

    @property
    def dimension(self):
        return self.components * self.size

    def std(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def factorize(cov, stage="covariance"):
    """Lower Cholesky factor of ``cov + jitter * I`` using the escalation policy.

    A plain factorization is tried first. If it fails, jitter starts at
    ``1e-10 * max(diag)`` and grows tenfold up to ``1e-4 * max(diag)``.

    Returns
    -------
    chol, jitter_used
    """
    cov = np.asarray(cov, dtype=float)
    scale = float(np.max(np.diag(cov))) if cov.size else 0.0
    if cov.size == 0 or scale == 0.0 and not np.any(cov):
        return np.zeros_like(cov), 0.0
    if not np.isfinite(scale) or scale < 0:
        raise ConditioningError(f"{stage}: invalid diagonal", stage=stage)
    try:
        L = cholesky(cov, lower=True, check_finite=False)
        if np.all(np.isfinite(L)):
            return L, 0.0
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(cov.shape[0])
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = cholesky(cov + jitter * eye, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            rel *= 10.0
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
        rel *= 10.0
    raise ConditioningError(
        f"{stage}: Cholesky failed with jitter up to {JITTER_MAX:g} x max diagonal",
        stage=stage,
    )


def _measure(mean, cov, stage):
    L, jitter = factorize(cov, stage=stage)
    return GaussianMeasure(mean=mean, covariance=cov, chol=L, jitter_used=jitter)


def build_prior(spec, mesh, sigma_gp2=0.0):
    """Zero-mean prior on the mesh nodes with covariance ``K + sigma_gp2 * I``."""
    if sigma_gp2 < 0:
        raise InputDomainError("sigma_gp2 must be nonnegative")
    A = gram(spec, mesh.points) + sigma_gp2 * np.eye(mesh.size)
    return _measure(np.zeros(mesh.size), A, stage="prior covariance")


def _closest_pair(points):
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return points[i], points[j]


def build_posterior(spec, mesh, sigma_gp2, data, noise_on_train=False):
    """Condition the mesh prior on ``data``.

    ``noise_on_train`` also adds ``sigma_gp2`` to the diagonal of the training
    covariance (standard noisy regression); it is off by default so that
    data are reproduced exactly.
    """
    if data is None or len(data) == 0:
        return build_prior(spec, mesh, sigma_gp2)
    if data.points.shape[1] != mesh.dim:
        raise InputDomainError(
            f"training points are {data.points.shape[1]}D, mesh is {mesh.dim}D"
        )
    A = gram(spec, mesh.points) + sigma_gp2 * np.eye(mesh.size)
    B = gram(spec, mesh.points, data.points)
    C = gram(spec, data.points)
    if noise_on_train:
        C = C + sigma_gp2 * np.eye(C.shape[0])
    try:
        LC, _ = factorize(C, stage="training covariance")
    except ConditioningError:
        p, q = _closest_pair(data.points) if len(data) > 1 else (data.points[0], data.points[0])
        raise ConditioningError(
            "training covariance is singular; nearly coincident training points "
            f"{p.tolist()} and {q.tolist()}",
            stage="training covariance",
            points=data.points,
        ) from None
    CinvBt = cho_solve((LC, True), B.T, check_finite=False)
    mean = CinvBt.T @ data.values
    cov = A - B @ CinvBt
    cov = 0.5 * (cov + cov.T)
    if sigma_gp2 > 0:
        return _measure(mean, cov, stage="posterior covariance")

    # Without a nugget, nodes that coincide with training points have zero
    # posterior variance and mean equal to the data. Set them exactly and factor the rest, so
    # that jitter never leaks noise onto prescribed values.
    idx = mesh.find_nodes(data.points)
    hit = idx >= 0
    pinned = idx[hit]
    if pinned.size == 0:
        return _measure(mean, cov, stage="posterior covariance")
    mean[pinned] = data.values[hit]
    cov[pinned, :] = 0.0
    cov[:, pinned] = 0.0
    free = np.setdiff1d(np.arange(mesh.size), pinned)
    L = np.zeros_like(cov)
    Lf, jitter = factorize(cov[np.ix_(free, free)], stage="posterior covariance")
    L[np.ix_(free, free)] = Lf
    return GaussianMeasure(mean=mean, covariance=cov, chol=L, jitter_used=jitter)


class PointEvaluator:
    """Values of nodal vectors at arbitrary points via the prior conditional mean.

    For a point ``x`` the value is ``k(x, X) K(X, X)^{-1} u``, the same
    cross-covariance rule that imposes off-node training data, so it is the
    consistent way to read a nodal function between nodes. Points that are
    mesh nodes return the nodal value exactly.
    """

    def __init__(self, spec, mesh, points):
        pts = as_points(points)
        if pts.shape[1] != mesh.dim:
            raise InputDomainError(f"points are {pts.shape[1]}D, mesh is {mesh.dim}D")
        idx = mesh.find_nodes(pts)
        W = np.zeros((pts.shape[0], mesh.size))
        W[np.flatnonzero(idx >= 0), idx[idx >= 0]] = 1.0
        off = np.flatnonzero(idx < 0)
        if off.size:
            L, _ = factorize(gram(spec, mesh.points), stage="prior covariance")
            W[off] = cho_solve((L, True), gram(spec, mesh.points, pts[off]), check_finite=False).T
        self.points = pts
        self.weights = W

    def __call__(self, values):
        """``(..., P)`` nodal values to ``(..., m)`` point values."""
        return np.asarray(values, dtype=float) @ self.weights.T


def homogeneous(measure):
    """Same covariance and factor, zero mean."""
    return replace(measure, mean=np.zeros_like(measure.mean))


def with_components(measure, components):
    """Measure on ``components`` independent copies sharing one factorization."""
    if components < 1:
        raise InputDomainError("components must be >= 1")
    base = measure.mean[: measure.size]
    return replace(measure, mean=np.tile(base, components), components=int(components))


def sample(measure, rng, n):
    """Draw ``n`` samples ``mean + L z`` as an ``(n, dimension)`` array."""
    z = rng.standard_normal((int(n), measure.components, measure.size))
    draws = z @ measure.chol.T
    return measure.mean + draws.reshape(int(n), measure.dimension)


__all__ = [
    "TrainingData",
    "GaussianMeasure",
    "factorize",
    "build_prior",
    "build_posterior",
    "homogeneous",
    "with_components",
    "sample",
    "PointEvaluator",
]
