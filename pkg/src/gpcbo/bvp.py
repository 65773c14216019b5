"""Residual cost functionals for the boundary-value benchmarks.

* ``harmonic1d``: ``u'' + u = 0`` on ``[0, pi/2]``, ``u(0) = 0``, ``u(pi/2) = 2``;
  exact solution ``2 sin x``.
* ``poisson2d``: ``-Lap u = -6`` on the unit square with ``u = 1 + x^2 + 2y^2``
  on the boundary, which is also the exact solution.
* ``nonlinear2d``: ``-Lap u + u^3 = -6 + (1 + x^2 + 2y^2)^3`` with the same
  boundary data and exact solution.

Each cost is the trapezoidal quadrature of the squared residual over the
interior nodes and accepts a batch of nodal vectors.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from gpcbo.cbo import ensemble_norm
from gpcbo.errors import InputDomainError
from gpcbo.gp import TrainingData
from gpcbo.mesh import laplacian, make_grid_mesh, make_interval_mesh, second_derivative

HARMONIC_INTERVAL = (0.0, np.pi / 2)
HARMONIC_BOUNDARY = ((0.0, 0.0), (np.pi / 2, 2.0))

HARMONIC_STATE_CONSTRAINTS = (
    (1.189997, 1.85673),
    (1.20586, 1.86829),
)

POISSON_STATE_CONSTRAINTS = (
    ((0.72413793, 0.72413793), 2.31581451),
    ((0.75862069, 0.72413793), 2.36183115),
    ((0.72413793, 0.75862069), 2.40784780),
    ((0.75862069, 0.75862069), 2.45386445),
)


class BvpTag(str, Enum):
    HARMONIC_1D = "harmonic1d"
    POISSON_2D = "poisson2d"
    NONLINEAR_2D = "nonlinear2d"


def poisson_exact(points):
    points = np.atleast_2d(points)
    x, y = points[:, 0], points[:, 1]
    return 1.0 + x**2 + 2.0 * y**2


def nonlinear_source(points):
    return -6.0 + poisson_exact(points) ** 3


def cost_harmonic_1d(u, mesh):
    """Quadrature of ``(u'' + u)^2`` over the interior nodes."""
    u = np.asarray(u, dtype=float)
    r = second_derivative(u, mesh) + u[..., 1:-1]
    return mesh.integrate_interior(r * r)


def cost_poisson_2d(u, mesh):
    """Quadrature of ``(Lap u - 6)^2`` over the interior nodes."""
    r = laplacian(u, mesh) - 6.0
    return mesh.integrate_interior(r * r)


def cost_nonlinear_2d(u, mesh, source=None):
    """Quadrature of ``(-Lap u + u^3 - f)^2`` over the interior nodes.

    ``source`` may hold precomputed interior values of ``f``.
    """
    u = np.asarray(u, dtype=float)
    if source is None:
        source = nonlinear_source(mesh.points[mesh.interior_mask])
    ui = u[..., mesh.interior_mask]
    r = -laplacian(u, mesh) + ui**3 - source
    return mesh.integrate_interior(r * r)


def error_norms(u, exact, mesh):
    """Discrete ``(L2, Linf)`` norms of ``u - exact``."""
    e = np.asarray(u, dtype=float) - np.asarray(exact, dtype=float)
    return float(ensemble_norm(e, mesh)), float(np.max(np.abs(e)))


@dataclass(frozen=True, eq=False)
class BvpProblem:
    tag: BvpTag
    mesh: object
    boundary: TrainingData
    state_constraints: TrainingData
    exact: np.ndarray = None

    @property
    def data(self):
        return self.boundary.concat(self.state_constraints)

    def cost(self, u):
        if self.tag is BvpTag.HARMONIC_1D:
            return cost_harmonic_1d(u, self.mesh)
        if self.tag is BvpTag.POISSON_2D:
            return cost_poisson_2d(u, self.mesh)
        return cost_nonlinear_2d(u, self.mesh, self._source)

    @property
    def _source(self):
        return nonlinear_source(self.mesh.points[self.mesh.interior_mask])

    def cost_function(self):
        """Batched cost closure with per-problem constants precomputed."""
        mesh = self.mesh
        if self.tag is BvpTag.HARMONIC_1D:
            return lambda U: cost_harmonic_1d(U, mesh)
        if self.tag is BvpTag.POISSON_2D:
            return lambda U: cost_poisson_2d(U, mesh)
        source = self._source
        return lambda U: cost_nonlinear_2d(U, mesh, source)


def make_problem(tag, mesh=None, include_state_constraints=False, size=None):
    """Assemble a benchmark problem.

    ``mesh`` defaults to the standard domain with ``size`` nodes per
    direction (50 in 1D, 30 in 2D). Boundary data are imposed at every
    boundary node; state constraints are added at their listed points, which
    need not be mesh nodes.
    """
    tag = BvpTag(tag)
    if tag is BvpTag.HARMONIC_1D:
        if mesh is None:
            mesh = make_interval_mesh(*HARMONIC_INTERVAL, size or 50)
        if mesh.dim != 1 or not np.allclose((mesh.lower[0], mesh.upper[0]), HARMONIC_INTERVAL):
            raise InputDomainError("harmonic1d needs an interval mesh on [0, pi/2]")
        boundary = TrainingData(
            [p for p, _ in HARMONIC_BOUNDARY], [v for _, v in HARMONIC_BOUNDARY]
        )
        sc = TrainingData(
            [p for p, _ in HARMONIC_STATE_CONSTRAINTS], [v for _, v in HARMONIC_STATE_CONSTRAINTS]
        )
        exact = 2.0 * np.sin(mesh.points[:, 0])
    else:
        if mesh is None:
            n = size or 30
            mesh = make_grid_mesh(n, n)
        if mesh.dim != 2 or not (
            np.allclose(mesh.lower, (0, 0)) and np.allclose(mesh.upper, (1, 1))
        ):
            raise InputDomainError(f"{tag.value} needs a grid mesh on the unit square")
        bpts = mesh.points[mesh.boundary_indices]
        boundary = TrainingData(bpts, poisson_exact(bpts))
        sc = TrainingData(
            [p for p, _ in POISSON_STATE_CONSTRAINTS], [v for _, v in POISSON_STATE_CONSTRAINTS]
        )
        exact = poisson_exact(mesh.points)
    if not include_state_constraints:
        sc = TrainingData.empty(mesh.dim)
    return BvpProblem(tag, mesh, boundary, sc, exact)
