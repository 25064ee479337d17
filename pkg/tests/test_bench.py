import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidomain.bench import (BenchConfig, calibrate_costs, growth_rate,
                            least_squares_slope, run_scaling_study, save_study)
from bidomain.conductivity import default_params
from bidomain.mesh import build_cube_mesh
from bidomain.precond import BlockLUPreconditioner
from bidomain.system import BidomainSystem


class TestGrowthRate:
    def test_reference_pair(self):
        # published CPU/DOF pair reproducing the tabulated growth value
        assert growth_rate(1.73, 6.32, 143053, 344408) == pytest.approx(1.47, abs=0.01)

    def test_second_reference_pair(self):
        assert growth_rate(4.34, 8.75, 344408, 684112) == pytest.approx(1.02, abs=0.01)

    def test_linear_scaling_gives_one(self):
        assert growth_rate(2.0, 4.0, 1000, 2000) == pytest.approx(1.0)

    @given(
        cost=st.floats(1e-3, 1e3),
        factor=st.floats(1.1, 8.0),
        dof=st.integers(10, 10 ** 7),
    )
    @settings(max_examples=100, deadline=None)
    def test_proportional_cost_is_exactly_one(self, cost, factor, dof):
        dof2 = int(dof * factor)
        if dof2 <= dof:
            return
        ratio = dof2 / dof
        assert growth_rate(cost, cost * ratio, dof, dof2) == pytest.approx(1.0, abs=1e-9)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            growth_rate(0.0, 1.0, 10, 20)
        with pytest.raises(ValueError):
            growth_rate(1.0, 1.0, 20, 10)


def test_least_squares_slope_on_powerlaw():
    dofs = np.array([1e3, 1e4, 1e5])
    costs = 3.0 * dofs ** 1.25
    assert least_squares_slope(dofs, costs) == pytest.approx(1.25, abs=1e-12)


@pytest.fixture(scope="module")
def small_study():
    cfg = BenchConfig(series=(4, 8), dim=3, dt_coarsest=0.4, t_end=2.0,
                      calibration_trials=10)
    return run_scaling_study(cfg)


@pytest.fixture(scope="module")
def cube_pair():
    mesh = build_cube_mesh(8)
    system = BidomainSystem.build(mesh, default_params(3), dt=0.2)
    return system, BlockLUPreconditioner(system, inner="exact")


class TestScalingStudy:
    def test_smoke_two_sizes(self, small_study):
        records = small_study.records
        assert len(records) == 2
        assert records[1].dof > records[0].dof
        assert np.isfinite(records[1].r_iter)
        assert np.isfinite(records[1].r_cpu)

    def test_iteration_counts_sane(self, small_study):
        for r in small_study.records:
            assert 1.0 <= r.iter_avg <= 10.0

    def test_calibration_positive(self, small_study):
        for r in small_study.records:
            assert r.mv_equivalent > 0.0

    def test_save_outputs(self, small_study, tmp_path):
        written = save_study(small_study, tmp_path)
        scaling = tmp_path / "scaling.csv"
        assert scaling in written
        lines = scaling.read_text().strip().splitlines()
        assert lines[0] == "n,dof,iter_avg,cpu_avg_s,r_iter,r_cpu"
        assert len(lines) == 3
        assert (tmp_path / "calibration.csv").exists()
        residuals = list(tmp_path.glob("residuals_*.csv"))
        assert residuals
        for path in residuals:
            header = path.read_text().splitlines()[0]
            assert header == "iter,rel_residual"

    def test_series_too_short(self):
        with pytest.raises(ValueError):
            run_scaling_study(BenchConfig(series=(8,)))


class TestCalibration:
    def test_requires_ten_trials(self, cube_pair):
        with pytest.raises(ValueError):
            calibrate_costs(*cube_pair, trials=3)

    def test_jacobi_ratio_positive(self):
        mesh = build_cube_mesh(4)
        system = BidomainSystem.build(mesh, default_params(3), dt=0.2)
        precond = BlockLUPreconditioner(system, inner="jacobi")
        assert calibrate_costs(system, precond, trials=10) > 0.0

    def test_repeatable_within_band(self, cube_pair):
        system, precond = cube_pair
        rng = np.random.default_rng(5)
        a = calibrate_costs(system, precond, trials=15, rng=rng)
        b = calibrate_costs(system, precond, trials=15, rng=rng)
        assert abs(a - b) <= 0.3 * max(a, b)
