import numpy as np
import pytest

from bidomain.conductivity import default_params
from bidomain.ionic import IonicParams, StimulusProtocol, default_protocol
from bidomain.mesh import build_cube_mesh
from bidomain.precond import BlockLUPreconditioner
from bidomain.simulate import (ActivationTracker, SimState, SimulationSetup,
                               activation_times, run_simulation, time_step)
from bidomain.system import BidomainSystem


@pytest.fixture(scope="module")
def small_setup():
    mesh = build_cube_mesh(4)
    params = default_params(3)
    system = BidomainSystem.build(mesh, params, dt=0.2)
    precond = BlockLUPreconditioner(system, inner="exact")
    return SimulationSetup(
        mesh=mesh, system=system, precond=precond, ionic=IonicParams(),
        protocol=default_protocol(3), dt=0.2, t_end=4.0,
    )


class TestActivationTimes:
    def test_initially_active_vertex(self):
        history = np.full((3, 2), 50.0)
        amap = activation_times(history, dt=1.0)
        np.testing.assert_array_equal(amap.phi, [0.0, 0.0])

    def test_linear_interpolation(self):
        history = np.array([[-90.0], [-30.0], [-10.0]])
        amap = activation_times(history, dt=1.0)
        # crossing -20 between t=1 (v=-30) and t=2 (v=-10)
        assert amap.phi[0] == pytest.approx(1.5)

    def test_never_crossed(self):
        history = np.full((5, 3), -90.0)
        amap = activation_times(history, dt=0.5)
        assert not np.isfinite(amap.phi).any()
        assert not amap.all_activated()

    def test_tracker_matches_batch(self, rng):
        history = np.cumsum(rng.uniform(-5, 15, size=(20, 6)), axis=0) - 90.0
        dt = 0.25
        batch = activation_times(history, dt)
        tracker = ActivationTracker(6, history[0])
        for k in range(1, 20):
            tracker.record(history[k - 1], history[k], (k - 1) * dt, dt)
        np.testing.assert_allclose(tracker.result().phi, batch.phi, equal_nan=True)


class TestTimeStep:
    def test_resting_state_is_equilibrium(self, small_setup):
        sys = small_setup.system
        state = SimState.resting(sys.n, sys.n_heart, small_setup.ionic)
        quiet = StimulusProtocol(sites=())
        new_state, stats = time_step(
            state, sys, small_setup.precond, small_setup.ionic, quiet,
            small_setup.dt,
        )
        np.testing.assert_allclose(new_state.v, state.v, atol=1e-10)
        np.testing.assert_allclose(new_state.u, 0.0, atol=1e-10)
        np.testing.assert_array_equal(new_state.w, state.w)
        assert stats.iterations <= 1

    def test_stimulated_step_raises_potential(self, small_setup):
        sys = small_setup.system
        state = SimState.resting(sys.n, sys.n_heart, small_setup.ionic)
        peak_before = state.v.max()
        for _ in range(3):
            state, _ = time_step(
                state, sys, small_setup.precond, small_setup.ionic,
                small_setup.protocol, small_setup.dt,
            )
        assert state.v.max() > peak_before

    def test_mv_accounting(self, small_setup):
        sys = small_setup.system
        state = SimState.resting(sys.n, sys.n_heart, small_setup.ionic)
        state, stats = time_step(
            state, sys, small_setup.precond, small_setup.ionic,
            small_setup.protocol, small_setup.dt,
        )
        assert stats.mv_count == stats.iterations + 1


class TestRunSimulation:
    def test_ends_before_stimulus_starts(self, small_setup):
        from bidomain.ionic import StimulusSite

        delayed = StimulusProtocol(sites=(StimulusSite((0.5, 0.5, 0.5), start=5.0),))
        setup = SimulationSetup(
            mesh=small_setup.mesh, system=small_setup.system,
            precond=small_setup.precond, ionic=small_setup.ionic,
            protocol=delayed, dt=0.2, t_end=1.0,
        )
        result = run_simulation(setup)
        assert not np.isfinite(result.activation.phi).any()

    def test_activation_spreads_outward(self):
        mesh = build_cube_mesh(8)
        params = default_params(3)
        system = BidomainSystem.build(mesh, params, dt=0.2)
        precond = BlockLUPreconditioner(system, inner="exact")
        setup = SimulationSetup(
            mesh=mesh, system=system, precond=precond, ionic=IonicParams(),
            protocol=default_protocol(3), dt=0.2, t_end=30.0,
            stop_when_activated=True,
        )
        result = run_simulation(setup)
        phi = result.activation.phi
        dist = np.linalg.norm(mesh.vertices - 0.5, axis=1)
        center = int(np.argmin(dist))
        corner = int(np.argmax(dist))
        assert np.isfinite(phi[center])
        if np.isfinite(phi[corner]):
            assert phi[center] < phi[corner]
        # distance-binned means increase monotonically where defined
        bins = np.digitize(dist, np.linspace(0, dist.max() + 1e-9, 5))
        means = [phi[(bins == b) & np.isfinite(phi)].mean()
                 for b in range(1, 5) if ((bins == b) & np.isfinite(phi)).any()]
        assert all(a < b for a, b in zip(means, means[1:]))

    def test_normalization_held_every_step(self, small_setup):
        result = run_simulation(small_setup)
        assert (result.u_mean_ratios <= 1e-10).all()

    def test_snapshot_count(self, small_setup, tmp_path):
        seen = []

        def writer(state, step):
            seen.append(step)
            return step

        setup = SimulationSetup(
            mesh=small_setup.mesh, system=small_setup.system,
            precond=small_setup.precond, ionic=small_setup.ionic,
            protocol=small_setup.protocol, dt=0.2, t_end=4.0,
            snapshot_every=5,
        )
        result = run_simulation(setup, snapshot_writer=writer)
        expected = int(np.floor(4.0 / (5 * 0.2))) + 1
        assert len(result.snapshots) == expected
        assert seen[0] == 0

    def test_determinism(self, small_setup):
        r1 = run_simulation(small_setup)
        r2 = run_simulation(small_setup)
        np.testing.assert_array_equal(r1.activation.phi, r2.activation.phi)
        np.testing.assert_array_equal(r1.iters, r2.iters)

    def test_zero_t_end(self, small_setup):
        setup = SimulationSetup(
            mesh=small_setup.mesh, system=small_setup.system,
            precond=small_setup.precond, ionic=small_setup.ionic,
            protocol=small_setup.protocol, dt=0.2, t_end=0.0,
        )
        result = run_simulation(setup)
        assert result.n_steps == 0
        assert not np.isfinite(result.activation.phi).any()
