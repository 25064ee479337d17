"""The coupled two-by-two block operator solved at every time step.

Unknowns are the whole-domain potential u (length N) and the transmembrane
potential v on the heart block (length N_H).  The operator couples the bulk
stiffness with the intra-cellular stiffness through the heart restriction
and adds a scaled heart mass to the lower-right block.  It is symmetric
positive semi-definite and its kernel is spanned by (ones, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import Space, assemble_stiffness, lumped_mass_diagonal
from .conductivity import ConductivityParams, TensorField
from .mesh import Mesh


def gamma(chi: float, c_m: float, dt: float) -> float:
    """Time-coupling coefficient chi * c_m / dt, in uF/(cm^3 ms)."""
    if chi <= 0 or c_m <= 0 or dt <= 0:
        raise ValueError("chi, c_m and dt must be strictly positive")
    return chi * c_m / dt


@dataclass
class BlockVector:
    """Pair of coefficient vectors: u on the whole domain, v on the heart."""

    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "BlockVector":
        return BlockVector(self.u.copy(), self.v.copy())

    def dot(self, other: "BlockVector") -> float:
        return float(self.u @ other.u + self.v @ other.v)

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    @classmethod
    def zeros(cls, n: int, n_heart: int) -> "BlockVector":
        return cls(np.zeros(n), np.zeros(n_heart))


@dataclass
class BidomainSystem:
    """Assembled blocks of the per-step linear operator.

    stiff_total is the N x N stiffness of the summed heart tensor plus the
    torso conductivities; stiff_extra the analogous extra-cellular one;
    stiff_intra the N_H x N_H intra-cellular stiffness on the heart block.
    Mass matrices are stored as their diagonals.  Instances are immutable
    in practice and safe to share across solves.
    """

    stiff_total: sp.csr_matrix
    stiff_intra: sp.csr_matrix
    stiff_extra: sp.csr_matrix
    mass_diag: np.ndarray
    heart_mass_diag: np.ndarray
    gamma: float
    mesh: Mesh = field(repr=False, default=None)
    params: ConductivityParams = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.stiff_total.shape[0]

    @property
    def n_heart(self) -> int:
        return self.stiff_intra.shape[0]

    @property
    def dof(self) -> int:
        return self.n + self.n_heart

    @classmethod
    def build(cls, mesh: Mesh, params: ConductivityParams, dt: float) -> "BidomainSystem":
        """Assemble all blocks on a mesh for time step dt (ms)."""
        dim = mesh.dim
        return cls(
            stiff_total=assemble_stiffness(mesh, TensorField(params, dim, "bar1")),
            stiff_intra=assemble_stiffness(
                mesh, TensorField(params, dim, "intra"), Space.HEART_ONLY
            ),
            stiff_extra=assemble_stiffness(mesh, TensorField(params, dim, "bar_e")),
            mass_diag=lumped_mass_diagonal(mesh),
            heart_mass_diag=lumped_mass_diagonal(mesh, Space.HEART_ONLY),
            gamma=gamma(params.chi, params.c_m, dt),
            mesh=mesh,
            params=params,
        )

    def _check(self, x: BlockVector) -> None:
        if x.u.shape != (self.n,) or x.v.shape != (self.n_heart,):
            raise ValueError(
                f"block vector shapes {x.u.shape}/{x.v.shape} do not match "
                f"system sizes {self.n}/{self.n_heart}"
            )

    def apply(self, x: BlockVector) -> BlockVector:
        """Operator application: one stiff_total, two stiff_intra and one
        heart-mass multiply."""
        self._check(x)
        nh = self.n_heart
        intra_v = self.stiff_intra @ x.v
        intra_u = self.stiff_intra @ x.u[:nh]
        top = self.stiff_total @ x.u
        top[:nh] += intra_v
        bottom = intra_u + intra_v + self.gamma * (self.heart_mass_diag * x.v)
        return BlockVector(top, bottom)

    def build_rhs(
        self,
        v_prev: np.ndarray,
        ion_current: np.ndarray,
        stim_current: np.ndarray,
        chi: float,
    ) -> BlockVector:
        """Right-hand side of the implicit step from the previous state.

        The u-block is identically zero, which places the right-hand side
        in the range of the operator by construction.
        """
        nh = self.n_heart
        for name, vec in (("v_prev", v_prev), ("ion_current", ion_current),
                          ("stim_current", stim_current)):
            if np.asarray(vec).shape != (nh,):
                raise ValueError(f"{name} must have length {nh}")
        load = self.gamma * v_prev - chi * (ion_current - stim_current)
        return BlockVector(np.zeros(self.n), self.heart_mass_diag * load)

    def normalize(self, x: BlockVector) -> BlockVector:
        """Remove the mass-weighted mean of u, fixing the free constant.

        The returned u satisfies <M u, ones> = 0, i.e. zero integral over
        the domain.
        """
        self._check(x)
        alpha = float(self.mass_diag @ x.u) / float(self.mass_diag.sum())
        return BlockVector(x.u - alpha, x.v.copy())

    def weighted_mean_u(self, u: np.ndarray) -> float:
        """Mass-weighted mean of a whole-domain vector (the normalised quantity)."""
        return float(self.mass_diag @ u) / float(self.mass_diag.sum())
