"""Block-LU preconditioner with a monodomain surrogate for the Schur block.

The coupled operator factors into a block lower-triangular matrix times a
unit upper-triangular one.  All factor blocks are sparse except the
Schur-type block, which is dense; the preconditioner replaces it by the
sparse monodomain matrix (scaled heart mass plus the stiffness of the
harmonic-mean tensor) and replaces exact block inverses by pluggable inner
preconditioners for the bulk stiffness and for the monodomain matrix.

Inner preconditioners implement a minimal contract: ``setup(matrix)`` on a
sparse SPD matrix, then ``apply_inverse(y)``.  The application must be a
linear, symmetric, positive operation for the outer PCG to be valid.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from cvxopt import cholmod, matrix as cvx_matrix, spmatrix as cvx_spmatrix

from .assembly import Space, assemble_stiffness, lumped_mass_diagonal
from .conductivity import ConductivityParams, TensorField
from .errors import PreconditionerError
from .mesh import Mesh
from .system import BidomainSystem, BlockVector

INNER_NAMES = ("exact", "ic0", "jacobi")


def build_monodomain_matrix(mesh: Mesh, params: ConductivityParams,
                            gamma: float) -> sp.csr_matrix:
    """Scaled heart mass plus harmonic-mean stiffness: SPD, sparse,
    same pattern as the intra-cellular stiffness."""
    if gamma <= 0:
        raise ValueError("gamma must be strictly positive")
    stiff_mono = assemble_stiffness(
        mesh, TensorField(params, mesh.dim, "mono"), Space.HEART_ONLY
    )
    mass = lumped_mass_diagonal(mesh, Space.HEART_ONLY)
    out = (stiff_mono + gamma * sp.diags(mass)).tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


@dataclass
class RegularizedStiffness:
    """Singular bulk stiffness made invertible without losing exactness.

    Adds beta/n times the all-ones rank-one to the stiffness, where beta is
    the mean diagonal entry.  On mean-free vectors the inverse agrees with
    the pseudo-inverse exactly; the constant vector maps to 1/beta times
    itself.  The rank-one term is never materialised: solves go through a
    grounded sparse matrix (one diagonal entry bumped) plus mean projections.
    """

    base: sp.csr_matrix
    beta: float

    @property
    def n(self) -> int:
        return self.base.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.base @ x + self.beta * x.mean()

    def grounded(self) -> sp.csr_matrix:
        """Sparse SPD proxy: the stiffness with beta added to entry (0, 0)."""
        bump = sp.csr_matrix(([self.beta], ([0], [0])), shape=self.base.shape)
        out = (self.base + bump).tocsr()
        out.sort_indices()
        return out


def regularize_stiffness(stiff: sp.csr_matrix) -> RegularizedStiffness:
    beta = float(stiff.diagonal().mean())
    return RegularizedStiffness(stiff.tocsr(), beta)


class InnerPreconditioner(ABC):
    """Contract for the two inner solves inside the block preconditioner."""

    @abstractmethod
    def setup(self, matrix: sp.spmatrix) -> None:
        """Factor or otherwise prepare for an SPD sparse matrix."""

    @abstractmethod
    def apply_inverse(self, y: np.ndarray) -> np.ndarray:
        """Apply the (approximate) inverse; linear, symmetric, positive."""


class ExactFactorization(InnerPreconditioner):
    """Direct sparse Cholesky (CHOLMOD); solves to machine precision."""

    def __init__(self):
        self._factor = None

    def setup(self, matrix: sp.spmatrix) -> None:
        coo = sp.coo_matrix(matrix)
        packed = cvx_spmatrix(
            coo.data, coo.row.astype(np.int64), coo.col.astype(np.int64),
            size=coo.shape,
        )
        factor = cholmod.symbolic(packed)
        try:
            cholmod.numeric(packed, factor)
        except ArithmeticError as exc:
            raise PreconditionerError(
                f"sparse Cholesky failed, matrix not positive definite: {exc}"
            ) from exc
        self._factor = factor

    def apply_inverse(self, y: np.ndarray) -> np.ndarray:
        rhs = cvx_matrix(np.asarray(y, dtype=float))
        cholmod.solve(self._factor, rhs)
        return np.asarray(rhs).ravel()


class IncompleteCholesky0(InnerPreconditioner):
    """Zero-fill incomplete Cholesky on the sparsity pattern of the matrix.

    A non-positive pivot restarts the factorisation with the diagonal
    scaled by (1 + 1e-3); at most ``max_restarts`` attempts before failing.
    """

    def __init__(self, max_restarts: int = 20):
        self.max_restarts = max_restarts
        self._lower = None
        self._upper = None
        self.restarts_used = 0

    def setup(self, matrix: sp.spmatrix) -> None:
        a = sp.csr_matrix(matrix)
        a.sum_duplicates()
        a.sort_indices()
        shift = 1.0
        for attempt in range(self.max_restarts + 1):
            factor = self._try_factor(a, shift)
            if factor is not None:
                self._lower = factor
                self._upper = factor.T.tocsr()
                self.restarts_used = attempt
                return
            shift *= 1.0 + 1e-3
        raise PreconditionerError(
            f"incomplete Cholesky failed after {self.max_restarts} diagonal "
            "shift restarts"
        )

    @staticmethod
    def _try_factor(a: sp.csr_matrix, diag_scale: float):
        """One factorisation sweep; None on pivot breakdown."""
        n = a.shape[0]
        lower = sp.tril(a, format="csr")
        indptr, indices, data = lower.indptr, lower.indices, lower.data

        diag_pos = np.empty(n, dtype=np.int64)
        for i in range(n):
            last = indptr[i + 1] - 1
            if last < indptr[i] or indices[last] != i:
                raise PreconditionerError(f"missing diagonal entry in row {i}")
            diag_pos[i] = last
        if diag_scale != 1.0:
            data[diag_pos] *= diag_scale

        values = data.copy()
        for i in range(n):
            row_start, row_end = indptr[i], indptr[i + 1]
            row_cols = indices[row_start:row_end]
            for idx in range(row_start, row_end):
                j = row_cols[idx - row_start]
                js, je = indptr[j], indptr[j + 1]
                # dot product of the already-computed parts of rows i and j
                s = _sparse_row_dot(
                    indices[row_start:idx], values[row_start:idx],
                    indices[js:je - 1], values[js:je - 1],
                )
                if j == i:
                    pivot = values[idx] - s
                    if pivot <= 0.0:
                        return None
                    values[idx] = np.sqrt(pivot)
                else:
                    values[idx] = (values[idx] - s) / values[indptr[j + 1] - 1]
        return sp.csr_matrix((values, indices.copy(), indptr.copy()), shape=(n, n))

    def apply_inverse(self, y: np.ndarray) -> np.ndarray:
        z = spla.spsolve_triangular(self._lower, np.asarray(y, dtype=float),
                                    lower=True)
        return spla.spsolve_triangular(self._upper, z, lower=False)

    @property
    def lower_factor(self) -> sp.csr_matrix:
        return self._lower


def _sparse_row_dot(cols_a, vals_a, cols_b, vals_b) -> float:
    """Dot product of two sparse rows given by sorted index/value pairs."""
    ia = ib = 0
    out = 0.0
    na, nb = len(cols_a), len(cols_b)
    while ia < na and ib < nb:
        ca, cb = cols_a[ia], cols_b[ib]
        if ca == cb:
            out += vals_a[ia] * vals_b[ib]
            ia += 1
            ib += 1
        elif ca < cb:
            ia += 1
        else:
            ib += 1
    return out


class Jacobi(InnerPreconditioner):
    """Diagonal (Jacobi) preconditioner."""

    def __init__(self):
        self._inv_diag = None

    def setup(self, matrix: sp.spmatrix) -> None:
        diag = np.asarray(sp.csr_matrix(matrix).diagonal())
        if (diag <= 0).any():
            raise PreconditionerError("Jacobi requires a strictly positive diagonal")
        self._inv_diag = 1.0 / diag

    def apply_inverse(self, y: np.ndarray) -> np.ndarray:
        return self._inv_diag * y


def make_inner(name: str) -> InnerPreconditioner:
    if name == "exact":
        return ExactFactorization()
    if name == "ic0":
        return IncompleteCholesky0()
    if name == "jacobi":
        return Jacobi()
    raise ValueError(f"unknown inner preconditioner {name!r}; "
                     f"choose one of {INNER_NAMES}")


class BlockLUPreconditioner:
    """Two-solve block preconditioner for the coupled system.

    One application costs two inner bulk solves, one inner monodomain
    solve and two intra-cellular stiffness multiplies; the counters
    ``p1_count`` / ``pk_count`` / ``si_count`` record the running totals.
    """

    def __init__(self, system: BidomainSystem, inner: str = "exact",
                 monodomain_matrix: sp.csr_matrix | None = None):
        self.system = system
        self.inner_name = inner
        self.regularized = regularize_stiffness(system.stiff_total)
        self.inner_bulk = make_inner(inner)
        self.inner_bulk.setup(self.regularized.grounded())
        if monodomain_matrix is None:
            if system.mesh is None or system.params is None:
                raise PreconditionerError(
                    "system carries no mesh/params; pass monodomain_matrix"
                )
            monodomain_matrix = build_monodomain_matrix(
                system.mesh, system.params, system.gamma
            )
        self.monodomain_matrix = monodomain_matrix
        self.inner_schur = make_inner(inner)
        self.inner_schur.setup(monodomain_matrix)
        self.p1_count = 0
        self.pk_count = 0
        self.si_count = 0

    def reset_counters(self) -> None:
        self.p1_count = 0
        self.pk_count = 0
        self.si_count = 0

    def _bulk_inverse(self, y: np.ndarray) -> np.ndarray:
        """Inverse of the regularised bulk operator.

        Mean projections around the grounded solve keep the action equal to
        the stiffness pseudo-inverse on mean-free vectors while mapping the
        constant vector to itself scaled by 1/beta.
        """
        self.p1_count += 1
        mean = y.mean()
        z = self.inner_bulk.apply_inverse(y - mean)
        z -= z.mean()
        return z + mean / self.regularized.beta

    def _schur_inverse(self, y: np.ndarray) -> np.ndarray:
        self.pk_count += 1
        return self.inner_schur.apply_inverse(y)

    def apply_inverse(self, rhs: BlockVector) -> BlockVector:
        """Solve the triangular factor pair: two bulk inverses, one
        monodomain inverse, two intra stiffness multiplies."""
        sysm = self.system
        if rhs.u.shape != (sysm.n,) or rhs.v.shape != (sysm.n_heart,):
            raise ValueError("block vector does not match system sizes")
        nh = sysm.n_heart
        t = self._bulk_inverse(rhs.u)
        self.si_count += 1
        s = self._schur_inverse(rhs.v - sysm.stiff_intra @ t[:nh])
        self.si_count += 1
        correction = np.zeros(sysm.n)
        correction[:nh] = sysm.stiff_intra @ s
        u = t - self._bulk_inverse(correction)
        return BlockVector(u, s)
