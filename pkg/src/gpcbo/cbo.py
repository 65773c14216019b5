"""Consensus-based optimization over discretized functions.

Each agent is a nodal vector. Per iteration every agent drifts toward the
Gibbs-weighted consensus and receives homogeneous Gaussian-process noise
scaled by its distance to the consensus:

    U <- U - lam * tau * (U - v) + sqrt(2 tau) * ||U - v|| * xi,  xi ~ GP_0.

Cost functionals are *batched*: they take an ``(n, D)`` array of agents and
return ``n`` costs. Use ``batched=False`` in :func:`run` for a function of a
single vector.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from gpcbo.errors import InputDomainError, NumericalFailure
from gpcbo.gp import sample
from gpcbo.mesh import gradient_components, row_dot

MAX_RESAMPLE = 20

HISTORY_COLUMNS = (
    "iteration",
    "best_cost",
    "consensus_cost",
    "spread",
    "err_l2",
    "err_linf",
    "seconds",
)


@dataclass(frozen=True)
class CboParams:
    """Algorithm constants.

    ``horizon / tau`` gives the iteration budget; values within 1e-9 of an
    integer are rounded to it rather than truncated.
    """

    n_agents: int = 100
    alpha: float = 1e5
    lam: float = 1.0
    tau: float = 0.1
    horizon: float = 200.0
    seed: int = 0
    workers: int = 1
    seminorm: bool = False

    def __post_init__(self):
        if int(self.n_agents) != self.n_agents or self.n_agents < 2:
            raise InputDomainError(f"n_agents must be an integer >= 2, got {self.n_agents}")
        for name in ("alpha", "lam", "tau"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InputDomainError(f"{name} must be positive, got {value}")
        if not (math.isfinite(self.horizon) and self.horizon >= 0):
            raise InputDomainError(f"horizon must be nonnegative, got {self.horizon}")
        if self.lam * self.tau > 1 + 1e-12:
            raise InputDomainError(
                f"lam * tau = {self.lam * self.tau:g} exceeds 1; the drift would overshoot"
            )
        if self.workers < 1:
            raise InputDomainError("workers must be >= 1")

    @property
    def iterations(self):
        ratio = self.horizon / self.tau
        nearest = round(ratio)
        if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
            return int(nearest)
        return int(ratio)


@dataclass
class Ensemble:
    agents: np.ndarray
    costs: np.ndarray
    iteration: int = 0
    resampled: int = 0

    @property
    def size(self):
        return self.agents.shape[0]


@dataclass
class History:
    """Per-iteration diagnostics; row ``j`` describes the ensemble after ``j`` steps."""

    rows: list = field(default_factory=list)

    def append(self, **record):
        self.rows.append(tuple(record.get(c) for c in HISTORY_COLUMNS))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        i = HISTORY_COLUMNS.index(name)
        return np.array([np.nan if r[i] is None else r[i] for r in self.rows], dtype=float)

    def deterministic_rows(self):
        """Rows without the wall-clock column."""
        return [r[:-1] for r in self.rows]


def consensus(ensemble, alpha):
    """Gibbs-weighted mean of the agents with weights ``exp(-alpha * cost)``.

    Weights are shifted by the minimum cost before exponentiation, so the
    result is invariant to adding a constant to all costs and never
    overflows. Agents with ``+inf`` cost get zero weight.
    """
    costs = np.asarray(ensemble.costs, dtype=float)
    agents = np.asarray(ensemble.agents, dtype=float)
    nan = np.flatnonzero(np.isnan(costs))
    if nan.size:
        raise NumericalFailure(f"cost of agent {int(nan[0])} is NaN")
    if costs.size == 0:
        raise InputDomainError("consensus of an empty ensemble")
    finite = np.isfinite(costs)
    if not np.any(finite):
        raise NumericalFailure("all agent costs are infinite")
    if costs.size == 1:
        return agents[0].copy()
    shifted = np.where(finite, costs - costs[finite].min(), np.inf)
    w = np.exp(-alpha * shifted)
    w /= w.sum()
    return w @ agents


def gibbs_weights(costs, alpha):
    costs = np.asarray(costs, dtype=float)
    w = np.exp(-alpha * (costs - costs.min()))
    return w / w.sum()


def _norm_weights(mesh, length):
    w = mesh.quad_weights
    if length == w.size:
        return w
    reps, rem = divmod(length, w.size)
    if rem:
        raise InputDomainError(
            f"vector length {length} is not a multiple of the mesh size {w.size}"
        )
    return np.tile(w, reps)


def ensemble_norm(diff, mesh, seminorm=False):
    """Discrete L2 norm ``sqrt(sum_p w_p diff_p^2)`` over the last axis.

    Vectors holding several components (length a multiple of the mesh size)
    use the quadrature weights once per component. ``seminorm=True`` adds the
    squared L2 norm of the finite-difference gradient (an H1-type norm).
    """
    diff = np.asarray(diff, dtype=float)
    w = _norm_weights(mesh, diff.shape[-1])
    sq = row_dot(diff * diff, w)
    if seminorm:
        comps = diff.reshape(diff.shape[:-1] + (-1, mesh.size))
        for g in gradient_components(comps, mesh):
            sq = sq + row_dot(g * g, mesh.quad_weights).sum(axis=-1)
    return np.sqrt(sq)


def spread(agents, mesh):
    """Largest pairwise distance between agents in the ensemble norm."""
    w = _norm_weights(mesh, agents.shape[-1])
    G = (agents * w) @ agents.T
    sq = np.diag(G)
    d2 = sq[:, None] + sq[None, :] - 2.0 * G
    return float(np.sqrt(max(0.0, d2.max())))


def _evaluate(cost, agents, pool=None, workers=1):
    if pool is None or workers == 1 or agents.shape[0] < 2 * workers:
        return np.asarray(cost(agents), dtype=float)
    chunks = np.array_split(agents, workers)
    parts = list(pool.map(cost, chunks))
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def _resample_nonfinite(agents, costs, cost, gp_c, rng, pool, workers):
    """Replace agents with non-finite cost by fresh draws from ``gp_c``."""
    bad = np.flatnonzero(~np.isfinite(costs))
    count = bad.size
    tries = 0
    while bad.size:
        if tries >= MAX_RESAMPLE:
            raise NumericalFailure(
                f"{bad.size} agents still have non-finite cost after {MAX_RESAMPLE} redraws"
            )
        agents[bad] = sample(gp_c, rng, bad.size)
        costs[bad] = _evaluate(cost, agents[bad], pool, workers)
        bad = bad[~np.isfinite(costs[bad])]
        tries += 1
    return count


def step(ensemble, v, params, noise, mesh, cost=None, *, gp_c=None, rng=None, pool=None):
    """One explicit CBO update of every agent.

    ``noise`` holds one homogeneous sample per agent. When ``cost`` is given
    the new costs are evaluated; agents whose cost is not finite are redrawn
    from ``gp_c`` if it is supplied, otherwise left flagged with their
    non-finite cost.
    """
    U = np.asarray(ensemble.agents, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != U.shape:
        raise InputDomainError(f"noise shape {noise.shape} != agents shape {U.shape}")
    diff = U - v
    dist = ensemble_norm(diff, mesh, seminorm=params.seminorm)
    new = U - (params.lam * params.tau) * diff + (math.sqrt(2 * params.tau) * dist)[:, None] * noise
    resampled = 0
    if cost is None:
        costs = np.full(U.shape[0], np.nan)
    else:
        with np.errstate(all="ignore"):
            costs = _evaluate(cost, new, pool, params.workers)
        if gp_c is not None and rng is not None:
            resampled = _resample_nonfinite(new, costs, cost, gp_c, rng, pool, params.workers)
    return Ensemble(new, costs, ensemble.iteration + 1, ensemble.resampled + resampled)


def iteration_rng(seed, j):
    """Generator for iteration ``j`` (``j = 0`` is the initial draw).

    Streams depend only on ``(seed, j)``; row ``i`` of each draw belongs to
    agent ``i``, so results do not depend on how costs are scheduled.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(j,))))


def run(cost, gp_c, gp_0, params, mesh, *, exact=None, callback=None, batched=True):
    """Run the GP-based consensus optimization loop.

    Parameters
    ----------
    cost : callable
        Batched cost ``(n, D) -> (n,)``, or ``D -> float`` with ``batched=False``.
    gp_c, gp_0 : GaussianMeasure
        Constrained measure for initial agents and homogeneous noise measure.
    params : CboParams
    mesh : Mesh
        Mesh the measures live on; defines the ensemble norm.
    exact : array, optional
        Reference solution; when given, error norms of the consensus are logged.
    callback : callable, optional
        Called as ``callback(ensemble, v)`` for every iterate including the
        initial ensemble.

    Returns
    -------
    v, ensemble, history
        Consensus of the final ensemble, the final ensemble, and diagnostics.
    """
    if gp_c.dimension != gp_0.dimension:
        raise InputDomainError("gp_c and gp_0 live on different spaces")
    if not batched:
        scalar = cost

        def cost(U):
            return np.array([scalar(u) for u in U], dtype=float)

    if exact is not None:
        exact = np.asarray(exact, dtype=float)

    history = History()
    t0 = time.perf_counter()
    N = params.n_agents
    pool = ThreadPoolExecutor(params.workers) if params.workers > 1 else None
    try:
        rng = iteration_rng(params.seed, 0)
        agents = sample(gp_c, rng, N)
        with np.errstate(all="ignore"):
            costs = _evaluate(cost, agents, pool, params.workers)
        n_res = _resample_nonfinite(agents, costs, cost, gp_c, rng, pool, params.workers)
        ens = Ensemble(agents, costs, 0, n_res)

        J = params.iterations
        for j in range(J + 1):
            v = consensus(ens, params.alpha)
            _record(history, ens, v, cost, mesh, exact, t0)
            if callback is not None:
                callback(ens, v)
            if j == J:
                break
            rng = iteration_rng(params.seed, j + 1)
            noise = sample(gp_0, rng, N)
            ens = step(ens, v, params, noise, mesh, cost, gp_c=gp_c, rng=rng, pool=pool)
    finally:
        if pool is not None:
            pool.shutdown()
    return v, ens, history


def _record(history, ens, v, cost, mesh, exact, t0):
    with np.errstate(all="ignore"):
        vcost = float(np.asarray(cost(v[None, :]), dtype=float)[0])
    err_l2 = err_linf = None
    if exact is not None:
        e = v - exact
        err_l2 = float(ensemble_norm(e, mesh))
        err_linf = float(np.max(np.abs(e)))
    history.append(
        iteration=ens.iteration,
        best_cost=float(np.min(ens.costs)),
        consensus_cost=vcost,
        spread=spread(ens.agents, mesh),
        err_l2=err_l2,
        err_linf=err_linf,
        seconds=time.perf_counter() - t0,
    )
