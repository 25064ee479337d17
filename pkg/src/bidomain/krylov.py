"""Preconditioned conjugate gradient for the singular coupled system.

The operator is symmetric positive semi-definite with kernel (ones, 0); the
right-hand sides produced by the time stepper have a mean-free u-block, so
they lie in the range.  To keep iterates there, the u-component of every
preconditioned residual is projected onto the mean-free complement.  The
returned solution has its free constant fixed by mass-weighted mean removal.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError, NumericalBreakdownError
from .precond import BlockLUPreconditioner
from .system import BidomainSystem, BlockVector


@dataclass
class SolveStats:
    """Instrumentation for one linear solve."""

    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    preconditioned_history: list[float] = field(default_factory=list)
    wall_time_ms: float = 0.0
    mv_count: int = 0
    p1_count: int = 0
    pk_count: int = 0
    converged: bool = False

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else 0.0


def _deflate(x: BlockVector) -> BlockVector:
    x.u -= x.u.mean()
    return x


def pcg_solve(
    system: BidomainSystem,
    precond: BlockLUPreconditioner,
    rhs: BlockVector,
    tol: float = 1e-6,
    max_iter: int = 500,
    x0: BlockVector | None = None,
) -> tuple[BlockVector, SolveStats]:
    """Solve the coupled system to a relative Euclidean residual below tol.

    Expects the u-block of ``rhs`` to be mean-free (automatic for the time
    stepper, whose u-block is zero).  Counts one operator multiply and one
    preconditioner inversion per iteration, plus the initial residual.
    Raises NonConvergenceError (with stats attached) past ``max_iter`` and
    NumericalBreakdownError if the residual degenerates.
    """
    if tol <= 0:
        raise ValueError("tol must be strictly positive")
    stats = SolveStats()
    p1_start, pk_start = precond.p1_count, precond.pk_count
    t_start = time.perf_counter()

    rhs_norm = rhs.norm()
    if rhs_norm == 0.0:
        stats.residual_history.append(0.0)
        stats.converged = True
        return BlockVector.zeros(system.n, system.n_heart), stats

    if x0 is None:
        x = BlockVector.zeros(system.n, system.n_heart)
        r = rhs.copy()
    else:
        x = x0.copy()
        r = rhs.copy()
        ax = system.apply(x)
        stats.mv_count += 1
        r.u -= ax.u
        r.v -= ax.v

    rel = r.norm() / rhs_norm
    stats.residual_history.append(rel)
    if x0 is None:
        stats.mv_count += 1  # initial residual of a zero guess is still one pass
    if rel <= tol:
        stats.converged = True
        x = system.normalize(x)
        _finalize(stats, precond, p1_start, pk_start, t_start)
        return x, stats

    z = _deflate(precond.apply_inverse(r))
    rho = r.dot(z)
    stats.preconditioned_history.append(rho)
    d = z.copy()

    for _ in range(max_iter):
        q = system.apply(d)
        stats.mv_count += 1
        dq = d.dot(q)
        if not np.isfinite(dq) or dq <= 0.0:
            stats.wall_time_ms = (time.perf_counter() - t_start) * 1e3
            raise NumericalBreakdownError(
                f"conjugate gradient breakdown: curvature {dq}", stats=stats
            )
        alpha = rho / dq
        x.u += alpha * d.u
        x.v += alpha * d.v
        r.u -= alpha * q.u
        r.v -= alpha * q.v
        stats.iterations += 1

        rel = r.norm() / rhs_norm
        if not np.isfinite(rel):
            stats.wall_time_ms = (time.perf_counter() - t_start) * 1e3
            raise NumericalBreakdownError("non-finite residual", stats=stats)
        stats.residual_history.append(rel)
        if rel <= tol:
            stats.converged = True
            break

        z = _deflate(precond.apply_inverse(r))
        rho_next = r.dot(z)
        stats.preconditioned_history.append(rho_next)
        beta = rho_next / rho
        rho = rho_next
        d.u = z.u + beta * d.u
        d.v = z.v + beta * d.v

    _finalize(stats, precond, p1_start, pk_start, t_start)
    if not stats.converged:
        raise NonConvergenceError(
            f"PCG did not reach tol={tol} within {max_iter} iterations "
            f"(residual {stats.final_residual:.3e})",
            stats=stats,
        )
    return system.normalize(x), stats


def _finalize(stats, precond, p1_start, pk_start, t_start) -> None:
    stats.p1_count = precond.p1_count - p1_start
    stats.pk_count = precond.pk_count - pk_start
    stats.wall_time_ms = (time.perf_counter() - t_start) * 1e3


def dump_residuals(stats: SolveStats, path) -> None:
    """Write the residual history as CSV with columns iter, rel_residual."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iter", "rel_residual"])
        for k, res in enumerate(stats.residual_history):
            writer.writerow([k, f"{res:.16e}"])
