"""Structural identity checks on small instances, with dense ground truth.

Each check pits the sparse production code against the dense reference
computations: semi-definiteness and kernel of the coupled operator, the
exactness of its block factorisation, the harmonic-mean form of the Schur
block, the closed-form factor inverses, and single-iteration convergence
in the equal-anisotropy case where the monodomain surrogate is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .conductivity import ConductivityParams, default_params
from .mesh import build_cube_mesh, build_heart_torso_2d, build_square_mesh
from .precond import BlockLUPreconditioner
from .krylov import pcg_solve
from .system import BidomainSystem, BlockVector


@dataclass
class CheckResult:
    name: str
    instance: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.threshold)


def small_instances(dt_2d: float = 0.05, dt_3d: float = 0.2):
    """The three reference instances: 2D coupled, 2D isolated, 3D isolated."""
    instances = []
    mesh = build_heart_torso_2d(8)
    instances.append(("2d-coupled", BidomainSystem.build(mesh, default_params(2), dt_2d)))
    mesh = build_square_mesh(4)
    instances.append(("2d-isolated", BidomainSystem.build(mesh, default_params(2), dt_2d)))
    mesh = build_cube_mesh(2)
    instances.append(("3d-isolated", BidomainSystem.build(mesh, default_params(3), dt_3d)))
    return instances


def equal_anisotropy_params(dim: int) -> ConductivityParams:
    """Extra-cellular tensor exactly twice the intra-cellular one."""
    base = default_params(dim)
    return default_params(
        dim, g_i_l=base.g_i_l, g_i_t=base.g_i_t,
        g_e_l=2.0 * base.g_i_l, g_e_t=2.0 * base.g_i_t,
    )


def spsd_check(sys: BidomainSystem, rng: np.random.Generator,
               trials: int = 100) -> tuple[float, float]:
    """Worst negative quadratic-form excursion and the kernel image norm.

    Returns (quad_form_violation, kernel_residual), both normalised.
    """
    lam = oracle.dense_lambda(sys)
    lam_norm = np.linalg.norm(lam, np.inf)
    worst = 0.0
    for _ in range(trials):
        x = BlockVector(rng.standard_normal(sys.n), rng.standard_normal(sys.n_heart))
        quad = x.dot(sys.apply(x))
        scale = lam_norm * x.dot(x)
        worst = max(worst, -quad / scale)
    kernel_image = sys.apply(BlockVector(np.ones(sys.n), np.zeros(sys.n_heart)))
    kernel_residual = kernel_image.norm() / max(1.0, lam_norm)
    return worst, kernel_residual


def null_space_dimension(sys: BidomainSystem) -> int:
    lam = oracle.dense_lambda(sys)
    eigvals = np.linalg.eigvalsh(lam)
    return int((eigvals < oracle.KERNEL_CUTOFF * eigvals.max()).sum())


def one_iteration_residual(dim: int, cells: int, dt: float = 0.1,
                           rng: np.random.Generator | None = None) -> tuple[float, int]:
    """Equal-anisotropy isolated heart: true residual and iteration count.

    With exact inner solvers and the surrogate equal to the true Schur
    block, the preconditioner inverts the operator on its range and PCG
    must converge in a single iteration.
    """
    rng = rng or np.random.default_rng(7)
    mesh = build_cube_mesh(cells) if dim == 3 else build_square_mesh(cells)
    sys = BidomainSystem.build(mesh, equal_anisotropy_params(dim), dt)
    precond = BlockLUPreconditioner(sys, inner="exact")
    rhs = BlockVector(np.zeros(sys.n), rng.standard_normal(sys.n_heart))
    x, stats = pcg_solve(sys, precond, rhs, tol=1e-12, max_iter=10)
    ax = sys.apply(x)
    residual = float(np.sqrt(
        np.sum((ax.u - rhs.u) ** 2) + np.sum((ax.v - rhs.v) ** 2)
    )) / rhs.norm()
    return residual, stats.iterations


def run_verification(seed: int = 1234) -> list[CheckResult]:
    """All identity checks over the three reference instances."""
    rng = np.random.default_rng(seed)
    results = []
    for label, sys in small_instances():
        quad, kernel = spsd_check(sys, rng)
        results.append(CheckResult("quadratic-form-psd", label, quad, 1e-12))
        results.append(CheckResult("kernel-ones", label, kernel, 1e-13))
        results.append(CheckResult(
            "null-dimension", label,
            abs(null_space_dimension(sys) - 1), 0.0))
        results.append(CheckResult(
            "block-lu-exactness", label, oracle.block_lu_error(sys), 1e-10))
        results.append(CheckResult(
            "harmonic-mean-identity", label,
            oracle.harmonic_mean_identity_error(sys, rng), 1e-9))
        results.append(CheckResult(
            "factor-inverses", label, oracle.lu_inverse_error(sys, rng), 1e-9))

    for dim, cells in ((2, 4), (3, 2)):
        residual, iterations = one_iteration_residual(dim, cells, rng=rng)
        label = f"{dim}d-equal-anisotropy"
        results.append(CheckResult("one-iteration-residual", label, residual, 1e-12))
        results.append(CheckResult(
            "one-iteration-count", label, abs(iterations - 1), 0.0))
    return results
