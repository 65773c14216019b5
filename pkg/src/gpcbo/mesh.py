"""Uniform meshes on intervals and rectangles, with trapezoidal weights and
finite-difference operators.

Nodal vectors may carry leading batch axes: every operator acts on the last
axis, so an ``(N, P)`` ensemble is differentiated in a single call.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from gpcbo.errors import InputDomainError



def row_dot(values, w):
    """``values @ w`` over the last axis, rounded the same way for any batch size.

    BLAS picks different blockings for different row counts, which would make
    costs depend on how agents are split across workers.
    """
    return np.sum(values * w, axis=-1)

@dataclass(frozen=True, eq=False)
class Mesh:
    """Ordered mesh nodes of a uniform 1D or 2D grid.

    2D nodes are stored row-major with ``x`` as the slow index, so a nodal
    vector reshapes to ``(nx, ny)`` with entry ``[i, j] = u(x_i, y_j)``.
    """

    dim: int
    shape: tuple
    lower: tuple
    upper: tuple
    points: np.ndarray = field(repr=False)
    spacing: tuple = ()
    quad_weights: np.ndarray = field(default=None, repr=False)
    interior_mask: np.ndarray = field(default=None, repr=False)

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def measure(self):
        return float(np.prod(np.subtract(self.upper, self.lower)))

    @property
    def axes(self):
        return tuple(
            np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.shape)
        )

    @property
    def interior_weights(self):
        return self.quad_weights[self.interior_mask]

    @property
    def boundary_indices(self):
        return np.flatnonzero(~self.interior_mask)

    def integrate(self, values):
        """Trapezoidal quadrature of nodal values over the last axis."""
        return row_dot(self._check(values), self.quad_weights)

    def integrate_interior(self, values):
        """Quadrature of values given on interior nodes only, with their weights."""
        values = np.asarray(values, dtype=float)
        w = self.interior_weights
        if values.shape[-1] != w.size:
            raise InputDomainError(
                f"expected {w.size} interior values, got {values.shape[-1]}"
            )
        return row_dot(values, w)

    def find_nodes(self, points, tol=1e-9):
        """Index of the mesh node coinciding with each point, or -1."""
        pts = np.atleast_2d(np.asarray(points, dtype=float).reshape(-1, self.dim))
        d = np.linalg.norm(self.points[None, :, :] - pts[:, None, :], axis=-1)
        idx = np.argmin(d, axis=1)
        scale = max(1.0, float(np.max(np.abs(self.points))))
        return np.where(d[np.arange(len(pts)), idx] <= tol * scale, idx, -1)

    def interpolate(self, values, points):
        """Cubic-spline evaluation of nodal values at arbitrary points in the domain."""
        values = self._check(values)
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.dim == 1:
            spline = CubicSpline(self.axes[0], values, axis=-1)
            return spline(pts[:, 0])
        batch = values.shape[:-1]
        grid = np.moveaxis(values.reshape(batch + self.shape), (-2, -1), (0, 1))
        interp = RegularGridInterpolator(self.axes, grid, method="cubic")
        return np.moveaxis(interp(pts), 0, -1)

    def _check(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.size:
            raise InputDomainError(
                f"nodal vector has length {values.shape[-1]}, mesh has {self.size} nodes"
            )
        return values


def _trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def make_interval_mesh(a, b, P):
    """``P`` equispaced nodes on ``[a, b]``, endpoints included."""
    if int(P) != P or P < 3:
        raise InputDomainError(f"an interval mesh needs at least 3 points, got {P}")
    if not a < b:
        raise InputDomainError(f"interval endpoints must satisfy a < b, got ({a}, {b})")
    P = int(P)
    x = np.linspace(a, b, P)
    h = (b - a) / (P - 1)
    interior = np.ones(P, dtype=bool)
    interior[[0, -1]] = False
    return Mesh(
        dim=1,
        shape=(P,),
        lower=(float(a),),
        upper=(float(b),),
        points=x[:, None],
        spacing=(h,),
        quad_weights=_trapezoid_weights(P, h),
        interior_mask=interior,
    )


def make_grid_mesh(nx, ny, lower=(0.0, 0.0), upper=(1.0, 1.0)):
    """Tensor-product grid of ``nx * ny`` nodes on a rectangle (unit square by default)."""
    for name, n in (("nx", nx), ("ny", ny)):
        if int(n) != n or n < 3:
            raise InputDomainError(f"{name} must be at least 3, got {n}")
    nx, ny = int(nx), int(ny)
    (x0, y0), (x1, y1) = lower, upper
    if not (x0 < x1 and y0 < y1):
        raise InputDomainError("grid bounds must satisfy lower < upper")
    hx = (x1 - x0) / (nx - 1)
    hy = (y1 - y0) / (ny - 1)
    X, Y = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny), indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel()])
    weights = np.outer(_trapezoid_weights(nx, hx), _trapezoid_weights(ny, hy)).ravel()
    interior = np.zeros((nx, ny), dtype=bool)
    interior[1:-1, 1:-1] = True
    return Mesh(
        dim=2,
        shape=(nx, ny),
        lower=(float(x0), float(y0)),
        upper=(float(x1), float(y1)),
        points=points,
        spacing=(hx, hy),
        quad_weights=weights,
        interior_mask=interior.ravel(),
    )


def second_derivative(u, mesh):
    """Central second difference at the ``P - 2`` interior nodes of a 1D mesh."""
    if mesh.dim != 1:
        raise InputDomainError("second_derivative needs a 1D mesh")
    u = mesh._check(u)
    (h,) = mesh.spacing
    return (u[..., :-2] - 2.0 * u[..., 1:-1] + u[..., 2:]) / (h * h)


def laplacian(u, mesh):
    """Five-point Laplacian at interior nodes of a 2D grid, row-major order."""
    if mesh.dim != 2:
        raise InputDomainError("laplacian needs a 2D mesh")
    u = mesh._check(u)
    hx, hy = mesh.spacing
    g = u.reshape(u.shape[:-1] + mesh.shape)
    c = g[..., 1:-1, 1:-1]
    uxx = (g[..., :-2, 1:-1] - 2.0 * c + g[..., 2:, 1:-1]) / (hx * hx)
    uyy = (g[..., 1:-1, :-2] - 2.0 * c + g[..., 1:-1, 2:]) / (hy * hy)
    out = uxx + uyy
    return out.reshape(out.shape[:-2] + (-1,))


def gradient_components(u, mesh):
    """First derivatives at every node (central inside, one-sided at the edges).

    Returns a tuple with one array per coordinate direction.
    """
    u = mesh._check(u)
    if mesh.dim == 1:
        return (np.gradient(u, mesh.spacing[0], axis=-1),)
    g = u.reshape(u.shape[:-1] + mesh.shape)
    gx = np.gradient(g, mesh.spacing[0], axis=-2)
    gy = np.gradient(g, mesh.spacing[1], axis=-1)
    flat = u.shape
    return gx.reshape(flat), gy.reshape(flat)
