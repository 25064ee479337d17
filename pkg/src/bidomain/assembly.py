"""Sparse stiffness and lumped mass matrices for P1 elements on simplices.

Gradients of the barycentric basis are constant per element, so each
element contributes vol * G sigma G^T with sigma evaluated once at the
centroid.  Mass matrices are diagonal by row-sum lumping: every vertex
receives an equal share of each adjacent element's measure.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .conductivity import TensorField
from .errors import AssemblyError
from .mesh import Mesh, Region


class Space(Enum):
    """Assembly target: all vertices of the domain, or the heart block only."""

    FULL = "full"
    HEART_ONLY = "heart_only"


def _element_selection(mesh: Mesh, space: Space):
    if space == Space.HEART_ONLY:
        mask = mesh.tags == Region.HEART
        return mesh.elements[mask], mesh.tags[mask], mesh.heart_vertex_count
    return mesh.elements, mesh.tags, mesh.vertex_count


def _gradients_and_volumes(mesh: Mesh, elements: np.ndarray):
    """Per-element basis gradients (n, d+1, d) and volumes (n,)."""
    d = mesh.dim
    coords = mesh.vertices[elements]
    edges = coords[:, 1:, :] - coords[:, :1, :]
    det = np.linalg.det(edges)
    if not (det > 0).all():
        raise AssemblyError("degenerate element (non-positive volume)")
    volumes = det / math.factorial(d)
    # Rows of inv(edges)^T are the gradients of the last d barycentric
    # functions; the first gradient is minus their sum, which pins the
    # element row sums to zero.
    grads_tail = np.linalg.inv(edges).transpose(0, 2, 1)
    grad0 = -grads_tail.sum(axis=1, keepdims=True)
    return np.concatenate([grad0, grads_tail], axis=1), volumes


def assemble_stiffness(mesh: Mesh, field: TensorField, space: Space = Space.FULL) -> sp.csr_matrix:
    """Assemble the stiffness matrix for the given conductivity field.

    The result is symmetric positive semi-definite with the constant vector
    in its kernel (pure Neumann / transmission setting).  Local matrices
    are symmetrised before accumulation so stored (i,j) and (j,i) values
    are bitwise equal.
    """
    elements, tags, n = _element_selection(mesh, space)
    grads, volumes = _gradients_and_volumes(mesh, elements)
    centroids = mesh.vertices[elements].mean(axis=1)
    sigma = field.evaluate_batch(centroids, tags)

    local = np.einsum("eid,edk,ejk->eij", grads, sigma, grads)
    local = 0.5 * (local + local.transpose(0, 2, 1))
    local *= volumes[:, None, None]

    arity = mesh.dim + 1
    rows = np.repeat(elements, arity, axis=1).ravel()
    cols = np.tile(elements, (1, arity)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_lumped_mass(mesh: Mesh, space: Space = Space.FULL) -> sp.csr_matrix:
    """Diagonal mass matrix: vertex i gets sum of |element|/(d+1) over its elements."""
    elements, _, n = _element_selection(mesh, space)
    coords = mesh.vertices[elements]
    det = np.linalg.det(coords[:, 1:, :] - coords[:, :1, :])
    if not (det > 0).all():
        raise AssemblyError("degenerate element (non-positive volume)")
    volumes = det / math.factorial(mesh.dim)

    diag = np.zeros(n)
    share = volumes / (mesh.dim + 1)
    for k in range(mesh.dim + 1):
        np.add.at(diag, elements[:, k], share)
    return sp.csr_matrix(sp.diags(diag))


def lumped_mass_diagonal(mesh: Mesh, space: Space = Space.FULL) -> np.ndarray:
    """Diagonal of the lumped mass matrix as a plain vector."""
    return assemble_lumped_mass(mesh, space).diagonal()


def write_matrix_market(matrix: sp.spmatrix, path) -> None:
    """Export a sparse matrix in MatrixMarket coordinate format (debug aid)."""
    from scipy.io import mmwrite

    mmwrite(str(path), matrix)
