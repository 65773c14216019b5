"""Sheep and shepherd-dog flocking under a controlled dog velocity.

State: sheep positions ``x`` and velocities ``v`` of shape ``(N_S, 2)`` and
dog positions ``d`` of shape ``(n_dogs, 2)``. The dynamics are

    x_i' = v_i
    v_i' = -damping v_i - (1/N_S) sum_j K_s(x_j - x_i) - sum_k K_d(d_k - x_i)
    d_k' = u_k(t)

with Morse interaction ``K(r) = (-C_r/l_r e^{-|r|/l_r} + C_a/l_a e^{-|r|/l_a}) r/|r|``.
The minus signs are kept as written in the model; with them the ``C_a``
branch pushes a sheep away from the other body and the ``C_r`` branch pulls
it closer, so short-range repulsion needs ``C_a / l_a`` to dominate at small
distance (see the shipped scenarios).

All functions accept a leading batch axis over controls so an entire CBO
ensemble is simulated in one vectorized RK4 sweep.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from gpcbo.errors import InputDomainError, SimulationBlowUp
from gpcbo.mesh import make_interval_mesh

EPS = 1e-8

# no nnan/ninf: blow-up detection relies on isfinite
_FASTMATH = {"nsz", "arcp", "contract", "afn", "reassoc"}


@dataclass(frozen=True)
class MorseParams:
    C_r: float
    l_r: float
    C_a: float
    l_a: float

    def __post_init__(self):
        for name in ("C_r", "l_r", "C_a", "l_a"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InputDomainError(f"Morse parameter {name} must be positive, got {value}")


@dataclass(frozen=True, eq=False)
class ShepherdParams:
    """Scenario definition: interactions, cost weights and initial state."""

    sheep_x0: np.ndarray
    sheep_v0: np.ndarray
    dogs_d0: np.ndarray
    morse_ss: MorseParams
    morse_sd: MorseParams
    damping: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    sigma3: float = 0.01
    V0: float = 0.0
    x_des: tuple = (0.0, 0.0)
    T: float = 10.0
    M: int = 100
    x_des_arr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x0 = np.asarray(self.sheep_x0, dtype=float).reshape(-1, 2)
        v0 = np.asarray(self.sheep_v0, dtype=float).reshape(-1, 2)
        d0 = np.asarray(self.dogs_d0, dtype=float).reshape(-1, 2)
        if x0.shape[0] < 1:
            raise InputDomainError("at least one sheep is required")
        if v0.shape != x0.shape:
            raise InputDomainError("sheep_v0 must match sheep_x0 in shape")
        if d0.shape[0] < 1:
            raise InputDomainError("at least one dog is required")
        if int(self.M) != self.M or self.M < 2:
            raise InputDomainError(f"M must be an integer >= 2, got {self.M}")
        if not (self.T > 0 and self.damping > 0):
            raise InputDomainError("T and damping must be positive")
        if min(self.sigma1, self.sigma2, self.sigma3, self.V0) < 0:
            raise InputDomainError("cost weights and V0 must be nonnegative")
        object.__setattr__(self, "sheep_x0", x0)
        object.__setattr__(self, "sheep_v0", v0)
        object.__setattr__(self, "dogs_d0", d0)
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "x_des_arr", np.asarray(self.x_des, dtype=float).reshape(2))

    @property
    def n_sheep(self):
        return self.sheep_x0.shape[0]

    @property
    def n_dogs(self):
        return self.dogs_d0.shape[0]

    @property
    def dt(self):
        return self.T / self.M

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.M + 1)

    @property
    def control_size(self):
        """Length of a flattened control vector: ``2 * n_dogs`` components of ``M + 1`` nodes."""
        return 2 * self.n_dogs * (self.M + 1)

    def time_mesh(self):
        return make_interval_mesh(0.0, self.T, self.M + 1)


@dataclass
class TrajectoryBundle:
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    d: np.ndarray


def morse_force(r, p):
    """Morse interaction for displacement(s) ``r`` of shape ``(..., 2)``.

    ``|r|`` is regularized as ``sqrt(|r|^2 + eps^2)`` inside the exponentials
    and the direction; a zero displacement gives a zero force.
    """
    r = np.asarray(r, dtype=float)
    dist = np.sqrt(np.sum(r * r, axis=-1, keepdims=True) + EPS * EPS)
    mag = -p.C_r / p.l_r * np.exp(-dist / p.l_r) + p.C_a / p.l_a * np.exp(-dist / p.l_a)
    return mag * (r / dist)


def _acceleration(x, v, d, params):
    # x, v: (B, N_S, 2); d: (B, n_dogs, 2)
    rij = x[:, None, :, :] - x[:, :, None, :]  # [b, i, j] = x_j - x_i
    sheep = morse_force(rij, params.morse_ss).sum(axis=2) / params.n_sheep
    rdk = d[:, None, :, :] - x[:, :, None, :]  # [b, i, k] = d_k - x_i
    dogs = morse_force(rdk, params.morse_sd).sum(axis=2)
    return -params.damping * v - sheep - dogs


def control_array(control, params):
    """Reshape flattened controls to ``(B, M + 1, n_dogs, 2)``.

    A flat control stores component ``2k + a`` (dog ``k``, axis ``a``) as a
    contiguous block of ``M + 1`` time values.
    """
    u = np.asarray(control, dtype=float)
    n_t = params.M + 1
    n_c = 2 * params.n_dogs
    if u.ndim >= 1 and u.shape[-1] == params.control_size:
        u = u.reshape(u.shape[:-1] + (n_c, n_t))
        u = np.moveaxis(u, -1, -2)
    if u.shape[-2:] == (n_t, n_c):
        u = u.reshape(u.shape[:-1] + (params.n_dogs, 2))
    if u.shape[-3:] != (n_t, params.n_dogs, 2):
        raise InputDomainError(
            f"control must have {params.control_size} entries or shape "
            f"({n_t}, {params.n_dogs}, 2), got {np.shape(control)}"
        )
    return u.reshape((-1,) + u.shape[-3:])


def flatten_control(u, params):
    """Inverse of :func:`control_array` for a single ``(M + 1, n_dogs, 2)`` control."""
    u = np.asarray(u, dtype=float).reshape(params.M + 1, 2 * params.n_dogs)
    return u.T.ravel()


def simulate(params, control, raise_on_blowup=True):
    """Integrate the flock with classical RK4 on ``M`` uniform steps.

    ``control`` is one flattened control vector or a batch of them. Stage
    values at half steps use linear interpolation of the nodal control.

    Returns
    -------
    TrajectoryBundle
        Arrays with a leading batch axis when a batch was passed.
    """
    u = control_array(control, params)
    single = np.asarray(control).ndim == 1 or np.asarray(control).shape == u.shape[1:]
    if not np.all(np.isfinite(u)):
        raise InputDomainError("control values must be finite")
    B = u.shape[0]
    M, dt = params.M, params.dt
    u_half = 0.5 * (u[:, :-1] + u[:, 1:])

    x = np.broadcast_to(params.sheep_x0, (B,) + params.sheep_x0.shape).copy()
    v = np.broadcast_to(params.sheep_v0, (B,) + params.sheep_v0.shape).copy()
    d = np.broadcast_to(params.dogs_d0, (B,) + params.dogs_d0.shape).copy()
    X = np.empty((M + 1,) + x.shape)
    Vv = np.empty_like(X)
    D = np.empty((M + 1,) + d.shape)
    X[0], Vv[0], D[0] = x, v, d

    with np.errstate(all="ignore"):
        for k in range(M):
            u0, um, u1 = u[:, k], u_half[:, k], u[:, k + 1]
            k1x, k1v, k1d = v, _acceleration(x, v, d, params), u0
            x2, v2, d2 = x + 0.5 * dt * k1x, v + 0.5 * dt * k1v, d + 0.5 * dt * k1d
            k2x, k2v, k2d = v2, _acceleration(x2, v2, d2, params), um
            x3, v3, d3 = x + 0.5 * dt * k2x, v + 0.5 * dt * k2v, d + 0.5 * dt * k2d
            k3x, k3v, k3d = v3, _acceleration(x3, v3, d3, params), um
            x4, v4, d4 = x + dt * k3x, v + dt * k3v, d + dt * k3d
            k4x, k4v, k4d = v4, _acceleration(x4, v4, d4, params), u1
            x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
            d = d + dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
            X[k + 1], Vv[k + 1], D[k + 1] = x, v, d

    if raise_on_blowup and not (np.all(np.isfinite(X)) and np.all(np.isfinite(Vv))):
        raise SimulationBlowUp("sheep state became non-finite during integration")
    # time-major -> batch-major
    traj = TrajectoryBundle(
        params.times,
        np.moveaxis(X, 0, 1),
        np.moveaxis(Vv, 0, 1),
        np.moveaxis(D, 0, 1),
    )
    if single:
        traj.x, traj.v, traj.d = traj.x[0], traj.v[0], traj.d[0]
    return traj


def flock_stats(positions):
    """Centre of mass ``E`` and mean squared distance to it ``V`` over the sheep axis (-2)."""
    x = np.asarray(positions, dtype=float)
    E = x.mean(axis=-2)
    V = np.sum((x - E[..., None, :]) ** 2, axis=-1).mean(axis=-1)
    return E, V


def _trapezoid(values, dt):
    return dt * (values[..., 1:-1].sum(axis=-1) + 0.5 * (values[..., 0] + values[..., -1]))


def cost_integrand(params, traj, control):
    u = control_array(control, params)
    x = traj.x if traj.x.ndim == 4 else traj.x[None]
    E, V = flock_stats(x)
    dev = E - params.x_des_arr
    return (
        params.sigma1 * (V - params.V0) ** 2
        + params.sigma2 * np.sum(dev * dev, axis=-1)
        + params.sigma3 * np.sum(u * u, axis=(-2, -1))
    )


def reduced_cost_reference(params, control):
    """Pure numpy evaluation of :func:`reduced_cost` through :func:`simulate`."""
    traj = simulate(params, control, raise_on_blowup=False)
    integrand = cost_integrand(params, traj, control)
    J = _trapezoid(integrand, params.dt)
    J = np.where(np.isfinite(J), J, np.inf)
    if np.asarray(control).ndim == 1:
        return float(J[0])
    return J


def reduced_cost(params, control):
    """Time-trapezoidal cost of the trajectory induced by ``control``.

    Batched like :func:`simulate`; a blown-up simulation yields ``+inf``.
    Runs a compiled RK4 sweep that never stores the trajectory.
    """
    u = control_array(control, params)
    if not np.all(np.isfinite(u)):
        raise InputDomainError("control values must be finite")
    ss, sd = params.morse_ss, params.morse_sd
    J = _rk4_costs(
        np.ascontiguousarray(u),
        params.sheep_x0,
        params.sheep_v0,
        params.dogs_d0,
        float(params.damping),
        np.array([ss.C_r, ss.l_r, ss.C_a, ss.l_a]),
        np.array([sd.C_r, sd.l_r, sd.C_a, sd.l_a]),
        np.array([params.sigma1, params.sigma2, params.sigma3, params.V0]),
        params.x_des_arr,
        params.dt,
    )
    if np.asarray(control).ndim == 1:
        return float(J[0])
    return J


@njit(cache=True, fastmath=_FASTMATH)
def _pair_coeff(dist, m):
    return -m[0] / m[1] * np.exp(-dist / m[1]) + m[2] / m[3] * np.exp(-dist / m[3])


@njit(cache=True, fastmath=_FASTMATH)
def _accel(x, v, d, damping, ss, sd, out):
    n = x.shape[0]
    inv_n = 1.0 / n
    for i in range(n):
        out[i, 0] = -damping * v[i, 0]
        out[i, 1] = -damping * v[i, 1]
    for i in range(n):
        for j in range(i + 1, n):
            rx = x[j, 0] - x[i, 0]
            ry = x[j, 1] - x[i, 1]
            dist = np.sqrt(rx * rx + ry * ry + EPS * EPS)
            c = _pair_coeff(dist, ss) / dist * inv_n
            # -K(x_j - x_i) on i, -K(x_i - x_j) = +K(x_j - x_i) on j
            out[i, 0] -= c * rx
            out[i, 1] -= c * ry
            out[j, 0] += c * rx
            out[j, 1] += c * ry
        for k in range(d.shape[0]):
            rx = d[k, 0] - x[i, 0]
            ry = d[k, 1] - x[i, 1]
            dist = np.sqrt(rx * rx + ry * ry + EPS * EPS)
            c = _pair_coeff(dist, sd) / dist
            out[i, 0] -= c * rx
            out[i, 1] -= c * ry


@njit(cache=True, fastmath=_FASTMATH)
def _integrand(x, u_t, weights, xdes):
    n = x.shape[0]
    ex = 0.0
    ey = 0.0
    for i in range(n):
        ex += x[i, 0]
        ey += x[i, 1]
    ex /= n
    ey /= n
    var = 0.0
    for i in range(n):
        var += (x[i, 0] - ex) ** 2 + (x[i, 1] - ey) ** 2
    var /= n
    usq = 0.0
    for k in range(u_t.shape[0]):
        usq += u_t[k, 0] ** 2 + u_t[k, 1] ** 2
    return (
        weights[0] * (var - weights[3]) ** 2
        + weights[1] * ((ex - xdes[0]) ** 2 + (ey - xdes[1]) ** 2)
        + weights[2] * usq
    )


@njit(cache=True, fastmath=_FASTMATH)
def _rk4_costs(u, x0, v0, d0, damping, ss, sd, weights, xdes, dt):
    B, n_t = u.shape[0], u.shape[1]
    out = np.empty(B)
    for b in range(B):
        x = x0.copy()
        v = v0.copy()
        d = d0.copy()
        a1 = np.empty_like(x)
        a2 = np.empty_like(x)
        a3 = np.empty_like(x)
        a4 = np.empty_like(x)
        total = 0.5 * _integrand(x, u[b, 0], weights, xdes)
        for k in range(n_t - 1):
            u0 = u[b, k]
            u1 = u[b, k + 1]
            um = 0.5 * (u0 + u1)
            _accel(x, v, d, damping, ss, sd, a1)
            x2 = x + 0.5 * dt * v
            v2 = v + 0.5 * dt * a1
            d2 = d + 0.5 * dt * u0
            _accel(x2, v2, d2, damping, ss, sd, a2)
            x3 = x + 0.5 * dt * v2
            v3 = v + 0.5 * dt * a2
            d3 = d + 0.5 * dt * um
            _accel(x3, v3, d3, damping, ss, sd, a3)
            x4 = x + dt * v3
            v4 = v + dt * a3
            d4 = d + dt * um
            _accel(x4, v4, d4, damping, ss, sd, a4)
            x = x + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
            v = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            d = d + dt / 6.0 * (u0 + 2.0 * um + 2.0 * um + u1)
            w = 1.0 if k < n_t - 2 else 0.5
            total += w * _integrand(x, u1, weights, xdes)
        total *= dt
        out[b] = total if np.isfinite(total) else np.inf
    return out


def zero_control(params):
    return np.zeros(params.control_size)


def make_initial_flock(n_sheep, center=(0.0, 0.0), radius=1.0, seed=0):
    """Sheep spread uniformly over a disc, at rest."""
    rng = np.random.default_rng(seed)
    angle = rng.uniform(0.0, 2 * np.pi, n_sheep)
    rad = radius * np.sqrt(rng.uniform(0.0, 1.0, n_sheep))
    x0 = np.column_stack([rad * np.cos(angle), rad * np.sin(angle)]) + np.asarray(center)
    return x0, np.zeros_like(x0)
