import numpy as np
import pytest

from bidomain.errors import NonConvergenceError
from bidomain.krylov import dump_residuals, pcg_solve
from bidomain.precond import BlockLUPreconditioner
from bidomain.system import BlockVector


@pytest.fixture(scope="module")
def coupled_precond(coupled_2d_system):
    return BlockLUPreconditioner(coupled_2d_system, inner="exact")


def true_residual(sys, x, rhs):
    ax = sys.apply(x)
    num = np.sqrt(np.sum((ax.u - rhs.u) ** 2) + np.sum((ax.v - rhs.v) ** 2))
    return num / rhs.norm()


def random_range_rhs(sys, rng):
    u = rng.standard_normal(sys.n)
    u -= u.mean()
    return BlockVector(u, rng.standard_normal(sys.n_heart))


class TestPcg:
    def test_zero_rhs(self, coupled_2d_system, coupled_precond):
        sys = coupled_2d_system
        x, stats = pcg_solve(sys, coupled_precond,
                             BlockVector.zeros(sys.n, sys.n_heart))
        assert stats.iterations == 0
        assert x.norm() == 0.0
        assert stats.converged

    def test_tolerance_honored(self, coupled_2d_system, coupled_precond, rng):
        sys = coupled_2d_system
        for _ in range(3):
            rhs = random_range_rhs(sys, rng)
            x, stats = pcg_solve(sys, coupled_precond, rhs, tol=1e-6)
            assert true_residual(sys, x, rhs) <= 1e-6
            assert stats.final_residual <= 1e-6

    def test_default_tolerance_level(self, coupled_2d_system, coupled_precond, rng):
        sys = coupled_2d_system
        rhs = random_range_rhs(sys, rng)
        x, stats = pcg_solve(sys, coupled_precond, rhs)
        assert stats.final_residual <= 1e-6

    def test_history_length(self, coupled_2d_system, coupled_precond, rng):
        sys = coupled_2d_system
        rhs = random_range_rhs(sys, rng)
        _, stats = pcg_solve(sys, coupled_precond, rhs, tol=1e-10)
        assert len(stats.residual_history) == stats.iterations + 1
        assert all(np.isfinite(stats.residual_history))

    def test_preconditioned_measure_monotone(self, coupled_2d_system,
                                             coupled_precond, rng):
        sys = coupled_2d_system
        rhs = random_range_rhs(sys, rng)
        _, stats = pcg_solve(sys, coupled_precond, rhs, tol=1e-12)
        hist = stats.preconditioned_history
        for prev, cur in zip(hist, hist[1:]):
            assert cur <= prev * (1 + 1e-12)

    def test_solution_mass_normalized(self, coupled_2d_system, coupled_precond, rng):
        sys = coupled_2d_system
        rhs = random_range_rhs(sys, rng)
        x, _ = pcg_solve(sys, coupled_precond, rhs)
        assert abs(sys.weighted_mean_u(x.u)) <= 1e-10 * max(1.0, np.abs(x.u).max())

    def test_kernel_quotient_invariance(self, coupled_2d_system,
                                        coupled_precond, rng):
        # shifting by the kernel and renormalising reproduces the solution
        sys = coupled_2d_system
        rhs = random_range_rhs(sys, rng)
        x, _ = pcg_solve(sys, coupled_precond, rhs)
        shifted = BlockVector(x.u + 17.3, x.v.copy())
        renorm = sys.normalize(shifted)
        np.testing.assert_allclose(renorm.u, x.u, atol=1e-10 * max(1, np.abs(x.u).max()))
        np.testing.assert_array_equal(renorm.v, x.v)

    def test_warm_start_converges_immediately(self, coupled_2d_system,
                                              coupled_precond, rng):
        sys = coupled_2d_system
        rhs = random_range_rhs(sys, rng)
        x, _ = pcg_solve(sys, coupled_precond, rhs, tol=1e-8)
        x2, stats = pcg_solve(sys, coupled_precond, rhs, tol=1e-6, x0=x)
        assert stats.iterations == 0

    def test_max_iter_error_carries_stats(self, coupled_2d_system, rng):
        sys = coupled_2d_system
        precond = BlockLUPreconditioner(sys, inner="jacobi")
        rhs = random_range_rhs(sys, rng)
        with pytest.raises(NonConvergenceError) as err:
            pcg_solve(sys, precond, rhs, tol=1e-14, max_iter=2)
        assert err.value.stats is not None
        assert err.value.stats.iterations == 2

    def test_counters(self, coupled_2d_system, rng):
        sys = coupled_2d_system
        precond = BlockLUPreconditioner(sys, inner="exact")
        rhs = random_range_rhs(sys, rng)
        _, stats = pcg_solve(sys, precond, rhs, tol=1e-6)
        assert stats.mv_count == stats.iterations + 1
        # one preconditioner application per iteration, each costing (2,1)
        assert stats.p1_count == 2 * stats.iterations
        assert stats.pk_count == stats.iterations

    def test_invalid_tol(self, coupled_2d_system, coupled_precond):
        sys = coupled_2d_system
        with pytest.raises(ValueError):
            pcg_solve(sys, coupled_precond, BlockVector.zeros(sys.n, sys.n_heart),
                      tol=0.0)


class TestEqualAnisotropySingleIteration:
    @pytest.mark.parametrize("dim,cells", [(2, 4), (3, 2)])
    def test_one_iteration_to_machine_precision(self, dim, cells):
        from bidomain.verify import one_iteration_residual

        residual, iterations = one_iteration_residual(dim, cells)
        assert iterations == 1
        assert residual <= 1e-12


def test_dump_residuals(tmp_path, coupled_2d_system, rng):
    precond = BlockLUPreconditioner(coupled_2d_system, inner="exact")
    rhs = random_range_rhs(coupled_2d_system, rng)
    _, stats = pcg_solve(coupled_2d_system, precond, rhs)
    path = tmp_path / "residuals.csv"
    dump_residuals(stats, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iter,rel_residual"
    assert len(lines) == len(stats.residual_history) + 1
    first = lines[1].split(",")
    assert int(first[0]) == 0
    assert float(first[1]) == pytest.approx(stats.residual_history[0])
