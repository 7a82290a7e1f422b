import numpy as np
import pytest
import scipy.linalg

from netcons.consensus import analyze, momentum_check
from netcons.exceptions import StepTooLarge
from netcons.graph import make_spec
from netcons.random_networks import random_spec
from netcons.simulate import (
    SimConfig,
    dominant_frequency,
    integrate,
    max_step,
    project_onto_lasalle,
    rk4_propagator,
    shift_invariance_check,
    simulate,
)
from netcons.system import assemble, equilibrium, kron_reduce

from conftest import (
    lyapunov_rate_error,
    p3_end,
    p3_mid,
    path5_mid,
    stability_excess,
    triangle_one_damped,
)


def mode_state(sysm, shape, amplitude=1.0):
    """Initial state exciting a single mode: all positions at rest, momenta along ``shape``."""
    z0 = np.zeros(sysm.state_dim)
    z0[: sysm.r * sysm.n] = amplitude * sysm.M @ shape
    return z0


class TestConfig:
    def test_invalid(self):
        with pytest.raises(ValueError):
            SimConfig(dt=0.0, t_end=1.0)
        with pytest.raises(ValueError):
            SimConfig(dt=0.1, t_end=1.0, convergence_window=2.0)

    def test_window_default(self):
        assert SimConfig(dt=0.1, t_end=50.0).convergence_window == pytest.approx(10.0)

    def test_auto_respects_step_bound(self, rng):
        for _ in range(10):
            sysm = assemble(random_spec(rng))
            assert SimConfig.auto(sysm).dt <= max_step(sysm)

    def test_step_too_large(self):
        sysm = assemble(p3_mid())
        with pytest.raises(StepTooLarge):
            integrate(sysm, None, np.zeros(sysm.state_dim), SimConfig(dt=1.0, t_end=10.0))


class TestRK4:
    def test_propagator_matches_stepping(self, rng):
        sysm = assemble(random_spec(rng, n=4))
        h = 0.01
        Phi, psi = rk4_propagator(sysm.A_closed, h, sysm.G @ sysm.v)
        z = rng.standard_normal(sysm.state_dim)
        f = lambda x: sysm.A_closed @ x + sysm.G @ sysm.v
        k1 = f(z); k2 = f(z + h / 2 * k1); k3 = f(z + h / 2 * k2); k4 = f(z + h * k3)
        np.testing.assert_allclose(Phi @ z + psi, z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), atol=1e-14)

    def test_matches_exponential(self, rng):
        sysm = assemble(p3_end())
        z0 = rng.standard_normal(sysm.state_dim)
        traj = integrate(sysm, None, z0, SimConfig(dt=0.005, t_end=1.0))
        d = sysm.state_dim
        aug = np.zeros((d + 1, d + 1))
        aug[:d, :d], aug[:d, d] = sysm.A_closed, sysm.G @ sysm.v
        exact = (scipy.linalg.expm(aug) @ np.append(z0, 1.0))[:d]
        assert np.linalg.norm(traj.states[-1] - exact) <= 1e-7 * np.linalg.norm(exact)


class TestTrajectories:
    def test_fixed_point(self):
        sysm = assemble(p3_end())
        eq = equilibrium(sysm)
        traj = integrate(sysm, eq, eq.z_bar, SimConfig(dt=0.05, t_end=20.0))
        assert traj.classification.kind == "Consensus"
        np.testing.assert_allclose(traj.classification.beta_hat, eq.beta, atol=1e-12)
        assert np.abs(traj.shifted).max() < 1e-12

    def test_p3_mid_frequency(self):
        sysm = assemble(p3_mid())
        mode = analyze(sysm).modes[0]
        z0 = mode_state(sysm, np.array([mode.shape_real[0], 0.0, mode.shape_real[1]]))
        traj = integrate(sysm, None, z0, SimConfig(dt=0.01, t_end=200.0))
        assert traj.classification.kind == "Oscillatory"
        w = dominant_frequency(traj.times, traj.outputs[:, 0])
        assert abs(w - mode.frequency) <= 0.01 * mode.frequency

    def test_p3_end_from_random_state(self, rng):
        sysm = assemble(p3_end(inputs=[0, 0, 0]))
        traj = simulate(sysm, rng.standard_normal(sysm.state_dim))
        assert traj.classification.kind == "Consensus"
        np.testing.assert_allclose(traj.classification.beta_hat, 0.0, atol=1e-6)
        assert project_onto_lasalle(traj, analyze(sysm).lasalle) < 1e-6

    def test_p3_mid_converges_to_lasalle(self, rng):
        sysm = assemble(p3_mid())
        traj = integrate(sysm, None, rng.standard_normal(sysm.state_dim), SimConfig(dt=0.01, t_end=500.0))
        basis = analyze(sysm).lasalle
        assert project_onto_lasalle(traj, basis, window=100.0) < 1e-4
        tail = np.linalg.norm(traj.shifted[traj.window(100.0)], axis=1)
        assert tail.max() - tail.min() < 1e-3 * tail.max() + 1e-9

    @pytest.mark.parametrize("make", [p3_mid, path5_mid, triangle_one_damped])
    def test_energy_conserved_on_lasalle(self, make, rng):
        sysm = assemble(make())
        basis = analyze(sysm).lasalle
        z0 = basis.basis @ rng.standard_normal(basis.dim)
        traj = integrate(sysm, None, z0, SimConfig(dt=0.01, t_end=100.0))
        U = traj.lyapunov
        assert np.abs(U - U[0]).max() <= 1e-8 * U[0]
        assert project_onto_lasalle(traj, basis, window=100.0) < 1e-10
        assert momentum_check(sysm, traj.shifted)

    def test_positions_track_edge_states(self, rng):
        sysm = assemble(triangle_one_damped())
        traj = integrate(sysm, None, rng.standard_normal(sysm.state_dim), SimConfig(dt=0.01, t_end=20.0))
        rn = sysm.r * sysm.n
        gap = traj.states[:, rn:] - traj.positions @ sysm.B_lift
        assert np.abs(gap - gap[0]).max() < 1e-4

    @pytest.mark.parametrize("seed", range(8))
    def test_energy_monotone_and_bounded(self, seed):
        rng = np.random.default_rng(seed)
        sysm = assemble(random_spec(rng))
        traj = integrate(sysm, None, rng.standard_normal(sysm.state_dim),
                         SimConfig.auto(sysm, scale=0.1))
        assert traj.max_lyapunov_increase <= 1e-9
        assert stability_excess(sysm, traj) <= 1e-9
        assert lyapunov_rate_error(sysm, traj.shifted).max() <= 1e-6

    def test_csv(self, tmp_path, rng):
        sysm = assemble(p3_mid())
        z0 = rng.standard_normal(sysm.state_dim)
        cfg = SimConfig(dt=0.05, t_end=1.0)
        path = tmp_path / "trace.csv"
        text = integrate(sysm, None, z0, cfg).to_csv(path)
        assert text.splitlines()[0] == "t,y_1,y_2,y_3,U"
        assert len(text.splitlines()) == 22
        assert path.read_text() == integrate(sysm, None, z0, cfg).to_csv()


class TestShiftInvariance:
    def test_zero_shift(self, rng):
        sysm = assemble(triangle_one_damped())
        cfg = SimConfig(dt=0.01, t_end=1.0)
        assert shift_invariance_check(sysm, None, rng.standard_normal(6), np.zeros(1), cfg) < 1e-14

    def test_triangle(self, rng):
        sysm = assemble(triangle_one_damped())
        dev = shift_invariance_check(sysm, None, rng.standard_normal(6), np.array([1.0]),
                                     SimConfig(dt=0.01, t_end=100.0))
        assert dev < 1e-8

    def test_tree_is_trivial(self, rng):
        sysm = assemble(p3_mid())
        assert shift_invariance_check(sysm, None, rng.standard_normal(5), np.zeros(0),
                                      SimConfig(dt=0.01, t_end=1.0)) == 0.0


def test_dominant_frequency():
    t = np.arange(0, 200, 0.01)
    assert dominant_frequency(t, np.sin(1.7 * t)) == pytest.approx(1.7, rel=1e-3)
