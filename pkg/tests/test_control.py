import mpmath as mp
import numpy as np
import pytest

from gpcbo.control import (
    MorseParams,
    ShepherdParams,
    control_array,
    flatten_control,
    flock_stats,
    make_initial_flock,
    morse_force,
    reduced_cost,
    reduced_cost_reference,
    simulate,
    zero_control,
)
from gpcbo.errors import InputDomainError, SimulationBlowUp

NULL = MorseParams(1.0, 1.0, 1.0, 1.0)
SS = MorseParams(C_r=1.0, l_r=1.0, C_a=2.0, l_a=0.5)
SD = MorseParams(C_r=0.5, l_r=2.0, C_a=4.0, l_a=1.0)


def flock_params(n_sheep=6, n_dogs=1, M=40, T=4.0, seed=0, **kw):
    x0, v0 = make_initial_flock(n_sheep, center=(2.0, 1.0), seed=seed)
    dogs = [[-1.0, 0.0], [-1.0, 1.5]][:n_dogs]
    return ShepherdParams(x0, v0, dogs, SS, SD, T=T, M=M, **kw)


def decay_params(M):
    return ShepherdParams([[0.0, 0.0]], [[1.0, 0.0]], [[5.0, 5.0]], NULL, NULL, T=1.0, M=M)


def random_controls(params, n, seed=0, scale=1.0):
    return scale * np.random.default_rng(seed).normal(size=(n, params.control_size))


class TestMorse:
    def test_zero_displacement(self):
        np.testing.assert_array_equal(morse_force([0.0, 0.0], SS), [0.0, 0.0])

    def test_cancellation(self):
        r = np.random.default_rng(0).normal(size=(50, 2))
        p = MorseParams(1.3, 0.7, 1.3, 0.7)
        np.testing.assert_allclose(morse_force(r, p), 0.0, atol=1e-12)

    def test_oracle_value(self):
        want = float(-2 * mp.exp(-1) + mp.mpf("0.5") * mp.exp(mp.mpf("-0.5")))
        # the commonly quoted -0.43243 is only good to about 1e-4
        assert want == pytest.approx(-0.43243, abs=1e-4)
        f = morse_force([1.0, 0.0], MorseParams(C_r=2.0, l_r=1.0, C_a=1.0, l_a=2.0))
        assert f[0] == pytest.approx(want, rel=1e-12)
        assert f[1] == 0.0

    def test_antisymmetry(self):
        r = np.random.default_rng(1).normal(scale=3.0, size=(100, 2))
        np.testing.assert_allclose(morse_force(-r, SS), -morse_force(r, SS), rtol=0, atol=1e-12)

    def test_direction_parallel(self):
        r = np.array([3.0, 4.0])
        f = morse_force(r, SD)
        assert f[0] * r[1] == pytest.approx(f[1] * r[0], rel=1e-14)

    @pytest.mark.parametrize("field", ["C_r", "l_r", "C_a", "l_a"])
    def test_positive_required(self, field):
        kw = dict(C_r=1.0, l_r=1.0, C_a=1.0, l_a=1.0)
        kw[field] = 0.0
        with pytest.raises(InputDomainError):
            MorseParams(**kw)


class TestSimulate:
    def test_equilibrium(self):
        x0, _ = make_initial_flock(5, seed=1)
        p = ShepherdParams(x0, np.zeros_like(x0), [[3.0, 3.0]], NULL, NULL, damping=2.7, M=30)
        traj = simulate(p, zero_control(p))
        np.testing.assert_allclose(traj.x, np.broadcast_to(x0, traj.x.shape), atol=1e-14)
        np.testing.assert_allclose(traj.v, 0.0, atol=1e-14)
        np.testing.assert_array_equal(traj.d, np.broadcast_to([[3.0, 3.0]], traj.d.shape))

    def test_exponential_decay(self):
        traj = simulate(decay_params(100), zero_control(decay_params(100)))
        assert abs(traj.v[-1, 0, 0] - np.exp(-1.0)) <= 1e-6
        assert traj.v[-1, 0, 1] == 0.0

    def test_rk4_order(self):
        errs = []
        for M in (50, 100, 200):
            p = decay_params(M)
            traj = simulate(p, zero_control(p))
            errs.append(abs(traj.v[-1, 0, 0] - np.exp(-1.0)))
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(orders >= 3.8)

    def test_constant_control_moves_dog_linearly(self):
        p = flock_params(M=25)
        u = np.zeros((p.M + 1, 1, 2))
        u[..., 0], u[..., 1] = 0.7, -1.3
        traj = simulate(p, flatten_control(u, p))
        want = p.dogs_d0[0] + np.outer(p.times, [0.7, -1.3])
        np.testing.assert_allclose(traj.d[:, 0], want, rtol=0, atol=1e-12)

    def test_shapes_and_times(self):
        p = flock_params(n_sheep=4, n_dogs=2, M=10)
        traj = simulate(p, random_controls(p, 3))
        assert traj.x.shape == (3, 11, 4, 2)
        assert traj.d.shape == (3, 11, 2, 2)
        np.testing.assert_allclose(np.diff(traj.times), p.dt)

    def test_batch_matches_single(self):
        p = flock_params()
        U = random_controls(p, 3, seed=2)
        batch = simulate(p, U)
        one = simulate(p, U[1])
        np.testing.assert_array_equal(batch.x[1], one.x)

    def test_dog_repels(self):
        # one sheep, dog on its left, no sheep interaction: sheep should drift right
        p = ShepherdParams([[0.0, 0.0]], [[0.0, 0.0]], [[-1.0, 0.0]], NULL, SD, T=2.0, M=40)
        traj = simulate(p, zero_control(p))
        assert traj.x[-1, 0, 0] > 0.0

    def test_blow_up(self):
        huge = MorseParams(C_r=1.0, l_r=1.0, C_a=1e307, l_a=1e-3)
        p = ShepherdParams([[0.0, 0.0], [0.5, 0.0]], np.zeros((2, 2)), [[9.0, 9.0]], huge, NULL, M=5)
        with pytest.raises(SimulationBlowUp):
            simulate(p, zero_control(p))
        assert reduced_cost(p, zero_control(p)) == np.inf
        assert reduced_cost_reference(p, zero_control(p)) == np.inf

    def test_nonfinite_control(self):
        p = flock_params()
        u = zero_control(p)
        u[3] = np.nan
        with pytest.raises(InputDomainError):
            simulate(p, u)


class TestFlockStats:
    def test_coincident(self):
        E, V = flock_stats(np.tile([3.0, 4.0], (5, 1)))
        np.testing.assert_array_equal(E, [3.0, 4.0])
        assert V == 0.0

    def test_pair(self):
        E, V = flock_stats([[1.0, 0.0], [-1.0, 0.0]])
        np.testing.assert_array_equal(E, [0.0, 0.0])
        assert V == 1.0

    def test_translation(self):
        x = np.random.default_rng(3).normal(size=(20, 2))
        assert flock_stats(x + [5.0, -2.0])[1] == pytest.approx(flock_stats(x)[1], abs=1e-12)


class TestCost:
    def test_zero_weights(self):
        p = flock_params(sigma1=0.0, sigma2=0.0)
        assert reduced_cost(p, zero_control(p)) == 0.0

    def test_control_energy(self):
        p = flock_params(sigma1=0.0, sigma2=0.0, sigma3=1.0)
        u = np.zeros((p.M + 1, 1, 2))
        u[..., 0] = 1.0
        assert reduced_cost(p, flatten_control(u, p)) == pytest.approx(p.T, abs=1e-12)

    def test_equilibrium_at_target(self):
        x0 = np.array([[1.0, 2.0], [3.0, 2.0]])
        p = ShepherdParams(x0, np.zeros((2, 2)), [[0.0, 0.0]], NULL, NULL, V0=1.0, x_des=(2.0, 2.0))
        assert reduced_cost(p, zero_control(p)) == pytest.approx(0.0, abs=1e-24)

    def test_nonnegative(self):
        p = flock_params()
        assert np.all(reduced_cost(p, random_controls(p, 10, scale=2.0)) >= 0)

    def test_permutation_invariance(self):
        p = flock_params(n_sheep=8)
        perm = np.random.default_rng(4).permutation(8)
        q = ShepherdParams(p.sheep_x0[perm], p.sheep_v0[perm], p.dogs_d0, SS, SD, T=p.T, M=p.M)
        U = random_controls(p, 4, seed=5)
        np.testing.assert_allclose(reduced_cost(q, U), reduced_cost(p, U), rtol=1e-12)

    @pytest.mark.parametrize("n_dogs", [1, 2])
    def test_compiled_matches_reference(self, n_dogs):
        p = flock_params(n_dogs=n_dogs)
        U = random_controls(p, 5, seed=6)
        np.testing.assert_allclose(reduced_cost(p, U), reduced_cost_reference(p, U), rtol=1e-10)

    def test_scalar_for_single(self):
        p = flock_params()
        assert isinstance(reduced_cost(p, zero_control(p)), float)


class TestParams:
    def test_control_roundtrip(self):
        p = flock_params(n_dogs=2, M=7)
        u = np.random.default_rng(7).normal(size=(p.M + 1, 2, 2))
        flat = flatten_control(u, p)
        assert flat.size == p.control_size == 2 * 2 * 8
        np.testing.assert_array_equal(control_array(flat, p)[0], u)
        # component blocks are contiguous in time
        np.testing.assert_array_equal(flat[: p.M + 1], u[:, 0, 0])

    def test_bad_control_shape(self):
        p = flock_params()
        with pytest.raises(InputDomainError):
            control_array(np.zeros(5), p)

    @pytest.mark.parametrize(
        "kw", [{"M": 1}, {"T": 0.0}, {"damping": -1.0}, {"sigma3": -0.1}, {"V0": -1.0}]
    )
    def test_rejects(self, kw):
        with pytest.raises(InputDomainError):
            flock_params(**kw)

    def test_time_mesh(self):
        p = flock_params(M=20, T=2.0)
        m = p.time_mesh()
        assert m.size == 21
        assert m.quad_weights.sum() == pytest.approx(2.0)
