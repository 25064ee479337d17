"""Structured simplicial meshes of the thorax with the heart as an exact submesh.

The whole domain is meshed with triangles (2D) or tetrahedra (3D) and every
element carries a region tag.  Vertices are ordered heart-first, so the
indices 0..N_H-1 are exactly the vertices of the cardiac region and the
restriction of a coefficient vector to the heart is a plain truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import AssemblyError


class Region(IntEnum):
    HEART = 0
    TORSO_LUNG = 1
    TORSO_CAVITY = 2
    TORSO_OTHER = 3


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh with a tagged, vertex-contiguous cardiac submesh.

    Attributes
    ----------
    dim : 2 or 3
    vertices : (N, dim) float array, coordinates in cm
    elements : (n_elements, dim+1) int array of vertex indices
    tags : (n_elements,) int array of Region values
    heart_vertex_count : number N_H of heart vertices; these occupy
        indices 0..N_H-1
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    tags: np.ndarray
    heart_vertex_count: int

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def heart_vertex_ids(self) -> np.ndarray:
        return np.arange(self.heart_vertex_count)

    def element_volumes(self) -> np.ndarray:
        """Signed measures of all elements (areas in 2D, volumes in 3D)."""
        coords = self.vertices[self.elements]
        edges = coords[:, 1:, :] - coords[:, :1, :]
        return np.linalg.det(edges) / math.factorial(self.dim)

    def element_centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    def heart_volume(self) -> float:
        return float(self.element_volumes()[self.tags == Region.HEART].sum())

    def restriction(self) -> "RestrictionMap":
        return RestrictionMap(self.vertex_count, self.heart_vertex_count)

    def validate(self) -> None:
        """Check the structural invariants; raise AssemblyError on violation."""
        if self.dim not in (2, 3):
            raise AssemblyError(f"unsupported dimension {self.dim}")
        if self.elements.shape[1] != self.dim + 1:
            raise AssemblyError("element arity does not match dimension")
        if (np.diff(np.sort(self.elements, axis=1), axis=1) == 0).any():
            raise AssemblyError("element with repeated vertices")
        vols = self.element_volumes()
        if not (vols > 0).all():
            raise AssemblyError("non-positive element volume")
        heart_elements = self.elements[self.tags == Region.HEART]
        if heart_elements.size and heart_elements.max() >= self.heart_vertex_count:
            raise AssemblyError("heart element touches a non-heart vertex index")
        used = np.unique(heart_elements)
        if used.size != self.heart_vertex_count:
            raise AssemblyError("heart vertex block is not contiguous")


@dataclass(frozen=True)
class RestrictionMap:
    """Coefficient-space restriction from the whole domain to the heart.

    With the heart-first vertex ordering, restriction is truncation and its
    transpose is zero padding of the coefficient vector (which is not the
    same function as extending by zero).  Composing restriction after
    padding is the identity on heart vectors, exactly.
    """

    n: int
    n_heart: int

    def apply(self, full_vector: np.ndarray) -> np.ndarray:
        return restrict(self, full_vector)

    def transpose_apply(self, heart_vector: np.ndarray) -> np.ndarray:
        return transpose_restrict(self, heart_vector)


def restrict(rmap: RestrictionMap, full_vector: np.ndarray) -> np.ndarray:
    """Truncate a whole-domain coefficient vector to its heart entries."""
    full_vector = np.asarray(full_vector)
    if full_vector.shape != (rmap.n,):
        raise ValueError(f"expected vector of length {rmap.n}, got {full_vector.shape}")
    return full_vector[: rmap.n_heart].copy()


def transpose_restrict(rmap: RestrictionMap, heart_vector: np.ndarray) -> np.ndarray:
    """Pad a heart coefficient vector with zeros up to the whole domain."""
    heart_vector = np.asarray(heart_vector)
    if heart_vector.shape != (rmap.n_heart,):
        raise ValueError(
            f"expected vector of length {rmap.n_heart}, got {heart_vector.shape}"
        )
    out = np.zeros(rmap.n, dtype=heart_vector.dtype)
    out[: rmap.n_heart] = heart_vector
    return out


# Vertex permutations of the six tetrahedra of the Kuhn split of a unit cube.
# Each tet walks from corner (0,0,0) to (1,1,1) along one axis ordering; the
# last two vertices are swapped for odd orderings to keep the volume positive.
_KUHN_PATHS = [
    ((0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 0, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (0, 1, 0), (0, 1, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1)),
    ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)),
]


def build_cube_mesh(cells_per_side: int) -> Mesh:
    """Kuhn-triangulated unit cube, all elements tagged as heart tissue.

    The domain [0,1]^3 cm is split into cells_per_side^3 cubes of six
    tetrahedra each; this is the isolated-heart configuration where the
    cardiac region fills the whole domain.
    """
    m = int(cells_per_side)
    if m < 2:
        raise ValueError("cells_per_side must be at least 2")
    npts = m + 1
    h = 1.0 / m

    grid = np.arange(npts)
    ii, jj, kk = np.meshgrid(grid, grid, grid, indexing="ij")

    def vid(i, j, k):
        return (i * npts + j) * npts + k

    vertices = np.column_stack(
        [ii.ravel() * h, jj.ravel() * h, kk.ravel() * h]
    ).astype(float)

    elements = []
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for path in _KUHN_PATHS:
                    tet = [vid(i + dx, j + dy, k + dz) for (dx, dy, dz) in path]
                    elements.append(tet)
    elements = np.asarray(elements, dtype=np.int64)

    coords = vertices[elements]
    vols = np.linalg.det(coords[:, 1:, :] - coords[:, :1, :])
    flip = vols < 0
    elements[flip, 2], elements[flip, 3] = (
        elements[flip, 3].copy(),
        elements[flip, 2].copy(),
    )

    tags = np.full(len(elements), int(Region.HEART), dtype=np.int64)
    mesh = Mesh(3, vertices, elements, tags, vertices.shape[0])
    mesh.validate()
    return mesh


def _square_grid(cells_per_side: int):
    """Vertices and positively oriented triangles of an n x n unit-square grid."""
    m = int(cells_per_side)
    npts = m + 1
    h = 1.0 / m
    jj, ii = np.meshgrid(np.arange(npts), np.arange(npts), indexing="ij")
    vertices = np.column_stack([ii.ravel() * h, jj.ravel() * h]).astype(float)

    def vid(i, j):
        return j * npts + i

    elements = []
    cells = []
    for j in range(m):
        for i in range(m):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            elements.append([v00, v10, v11])
            elements.append([v00, v11, v01])
            cells.append((i, j))
            cells.append((i, j))
    return vertices, np.asarray(elements, dtype=np.int64), cells


def build_square_mesh(cells_per_side: int) -> Mesh:
    """Unit square, two triangles per cell, all heart (isolated 2D case)."""
    if cells_per_side < 2:
        raise ValueError("cells_per_side must be at least 2")
    vertices, elements, _ = _square_grid(cells_per_side)
    tags = np.full(len(elements), int(Region.HEART), dtype=np.int64)
    mesh = Mesh(2, vertices, elements, tags, vertices.shape[0])
    mesh.validate()
    return mesh


def build_heart_torso_2d(cells_per_side: int) -> Mesh:
    """Synthetic 2D thorax: heart block inside a heterogeneous torso square.

    The unit square is triangulated on a regular grid; the heart occupies
    the grid-aligned block [0.25,0.75]^2 so that its triangulation is an
    exact submesh.  Two further blocks, [0,0.25]x[0.25,0.75] and
    [0.75,1]x[0.25,0.75], are tagged as lung and blood cavity to provide a
    heterogeneous torso; the remainder is generic tissue.  The outer
    boundary never touches the heart.  Vertices are permuted heart-first.
    """
    m = int(cells_per_side)
    if m < 4 or m % 4 != 0:
        raise ValueError("cells_per_side must be a positive multiple of 4")

    vertices, elements, cells = _square_grid(m)
    q = m // 4

    tags = np.empty(len(elements), dtype=np.int64)
    for e, (i, j) in enumerate(cells):
        in_mid_band = q <= j < 3 * q
        if q <= i < 3 * q and in_mid_band:
            tags[e] = Region.HEART
        elif i < q and in_mid_band:
            tags[e] = Region.TORSO_LUNG
        elif i >= 3 * q and in_mid_band:
            tags[e] = Region.TORSO_CAVITY
        else:
            tags[e] = Region.TORSO_OTHER

    heart_mask = np.zeros(vertices.shape[0], dtype=bool)
    heart_mask[np.unique(elements[tags == Region.HEART])] = True
    n_heart = int(heart_mask.sum())

    # Permute vertices so the heart block comes first, preserving relative order.
    new_index = np.empty(vertices.shape[0], dtype=np.int64)
    new_index[heart_mask] = np.arange(n_heart)
    new_index[~heart_mask] = n_heart + np.arange(vertices.shape[0] - n_heart)

    reordered = np.empty_like(vertices)
    reordered[new_index] = vertices
    elements = new_index[elements]

    mesh = Mesh(2, reordered, elements, tags, n_heart)
    mesh.validate()
    return mesh
