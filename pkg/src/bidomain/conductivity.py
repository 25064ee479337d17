"""Anisotropic conductivity tensors evaluated at element centroids.

Cardiac tissue carries two transversely isotropic tensors (intra- and
extra-cellular) whose principal axis follows the local fibre direction;
torso regions are isotropic with a per-organ conductivity.  The monodomain
surrogate tensor is the harmonic mean of the intra- and extra-cellular
tensors.  All conductivities are in mS/cm, lengths in cm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalDegeneracyError
from .mesh import Region

#: Default membrane surface-to-volume ratio per dimension, 1/cm.
CHI_DEFAULT = {2: 1500.0, 3: 500.0}


@dataclass(frozen=True)
class ConductivityParams:
    """Physical conductivity and membrane parameters.

    Longitudinal/transverse intra- and extra-cellular conductivities,
    isotropic organ conductivities, the surface-to-volume ratio chi (1/cm)
    and the membrane capacitance c_m (uF/cm^2).
    """

    g_i_l: float = 1.741
    g_i_t: float = 0.1934
    g_e_l: float = 3.906
    g_e_t: float = 1.970
    k_lung: float = 0.5
    k_cavity: float = 6.7
    k_other: float = 2.2
    chi: float = 500.0
    c_m: float = 1.0

    def __post_init__(self):
        for name in (
            "g_i_l", "g_i_t", "g_e_l", "g_e_t",
            "k_lung", "k_cavity", "k_other", "chi", "c_m",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def torso_conductivity(self, tag: int) -> float:
        if tag == Region.TORSO_LUNG:
            return self.k_lung
        if tag == Region.TORSO_CAVITY:
            return self.k_cavity
        if tag == Region.TORSO_OTHER:
            return self.k_other
        raise ValueError(f"unknown torso region tag {tag}")


def default_params(dim: int, **overrides) -> ConductivityParams:
    """Table defaults with the dimension-dependent chi filled in."""
    overrides.setdefault("chi", CHI_DEFAULT[dim])
    return ConductivityParams(**overrides)


def fiber_direction_3d(x) -> np.ndarray:
    """Horizontal fibre direction rotating linearly with depth.

    The in-plane angle goes from +pi/4 at z=0 to -pi/4 at z=1 (z clamped
    to [0,1]); the direction is independent of x and y.
    """
    z = min(max(float(np.asarray(x)[2]), 0.0), 1.0)
    theta = np.pi / 4 - np.pi / 2 * z
    return np.array([np.cos(theta), np.sin(theta), 0.0])


def fiber_direction_2d(x, center=(0.5, 0.5)) -> np.ndarray:
    """Circular fibre field around the heart-block centre.

    Returns the unit tangent of the circle through x; at the centre itself
    the direction degenerates and falls back to the x-axis.
    """
    dx = float(x[0]) - center[0]
    dy = float(x[1]) - center[1]
    r = np.hypot(dx, dy)
    if r == 0.0:
        return np.array([1.0, 0.0])
    return np.array([-dy / r, dx / r])


def tensor_from_fiber(f: np.ndarray, g_l: float, g_t: float) -> np.ndarray:
    """Transversely isotropic tensor g_l f f^T + g_t (I - f f^T).

    Eigenvalues are g_l along the fibre and g_t across it.  The outer
    products make the result symmetric by construction.
    """
    f = np.asarray(f, dtype=float)
    if abs(np.dot(f, f) - 1.0) > 1e-12:
        raise ValueError("fibre direction must be a unit vector")
    proj = np.outer(f, f)
    return g_l * proj + g_t * (np.eye(f.size) - proj)


def harmonic_mean_tensor(si: np.ndarray, se: np.ndarray) -> np.ndarray:
    """Tensor harmonic mean (si^-1 + se^-1)^-1 of two SPD tensors."""
    si = np.asarray(si, dtype=float)
    se = np.asarray(se, dtype=float)
    try:
        inv_sum = np.linalg.inv(si) + np.linalg.inv(se)
        out = np.linalg.inv(inv_sum)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"singular conductivity tensor: {exc}") from exc
    if not np.isfinite(out).all():
        raise NumericalDegeneracyError("harmonic mean produced non-finite entries")
    return 0.5 * (out + out.T)


def sigma_bar_1(params: ConductivityParams, centroid, tag: int, dim: int | None = None) -> np.ndarray:
    """Bulk tensor: intra- plus extra-cellular in the heart, organ k*I outside."""
    dim = len(centroid) if dim is None else dim
    if tag == Region.HEART:
        f = _fiber_at(centroid, dim)
        return tensor_from_fiber(f, params.g_i_l, params.g_i_t) + tensor_from_fiber(
            f, params.g_e_l, params.g_e_t
        )
    return params.torso_conductivity(tag) * np.eye(dim)


def sigma_bar_e(params: ConductivityParams, centroid, tag: int, dim: int | None = None) -> np.ndarray:
    """Extra-cellular tensor in the heart, organ k*I outside."""
    dim = len(centroid) if dim is None else dim
    if tag == Region.HEART:
        f = _fiber_at(centroid, dim)
        return tensor_from_fiber(f, params.g_e_l, params.g_e_t)
    return params.torso_conductivity(tag) * np.eye(dim)


def _fiber_at(centroid, dim: int) -> np.ndarray:
    return fiber_direction_3d(centroid) if dim == 3 else fiber_direction_2d(centroid)


class TensorField:
    """Evaluation rule (element centroid, region tag) -> symmetric SPD tensor.

    kind selects which physical tensor the field represents:

    - "intra": intra-cellular tensor, heart elements only
    - "extra": extra-cellular tensor, heart elements only
    - "mono":  harmonic mean of intra and extra, heart elements only
    - "bar1":  intra + extra in the heart, isotropic organ values in the torso
    - "bar_e": extra in the heart, isotropic organ values in the torso
    """

    KINDS = ("intra", "extra", "mono", "bar1", "bar_e")

    def __init__(self, params: ConductivityParams, dim: int, kind: str):
        if kind not in self.KINDS:
            raise ValueError(f"unknown tensor field kind {kind!r}")
        self.params = params
        self.dim = dim
        self.kind = kind

    def __call__(self, centroid, tag: int) -> np.ndarray:
        p = self.params
        if self.kind == "bar1":
            return sigma_bar_1(p, centroid, tag, self.dim)
        if self.kind == "bar_e":
            return sigma_bar_e(p, centroid, tag, self.dim)
        if tag != Region.HEART:
            raise ValueError(f"{self.kind!r} tensor is only defined on heart elements")
        f = _fiber_at(centroid, self.dim)
        if self.kind == "intra":
            return tensor_from_fiber(f, p.g_i_l, p.g_i_t)
        if self.kind == "extra":
            return tensor_from_fiber(f, p.g_e_l, p.g_e_t)
        return harmonic_mean_tensor(
            tensor_from_fiber(f, p.g_i_l, p.g_i_t),
            tensor_from_fiber(f, p.g_e_l, p.g_e_t),
        )

    def evaluate_batch(self, centroids: np.ndarray, tags: np.ndarray) -> np.ndarray:
        """Vectorised evaluation over many elements, shape (n, dim, dim).

        Agrees elementwise with calling the field per centroid; the batch
        path exists because assembly visits every element.
        """
        centroids = np.asarray(centroids, dtype=float)
        tags = np.asarray(tags)
        n, d = centroids.shape[0], self.dim
        p = self.params
        out = np.zeros((n, d, d))

        heart = tags == Region.HEART
        if self.kind in ("intra", "extra", "mono") and not heart.all():
            raise ValueError(f"{self.kind!r} tensor is only defined on heart elements")

        if heart.any():
            fibers = _fibers_batch(centroids[heart], d)
            proj = np.einsum("ni,nj->nij", fibers, fibers)
            eye = np.eye(d)
            intra = p.g_i_l * proj + p.g_i_t * (eye - proj)
            extra = p.g_e_l * proj + p.g_e_t * (eye - proj)
            if self.kind == "intra":
                out[heart] = intra
            elif self.kind == "extra" or self.kind == "bar_e":
                out[heart] = extra
            elif self.kind == "bar1":
                out[heart] = intra + extra
            else:
                mono = np.linalg.inv(np.linalg.inv(intra) + np.linalg.inv(extra))
                out[heart] = 0.5 * (mono + mono.transpose(0, 2, 1))

        if self.kind in ("bar1", "bar_e"):
            eye = np.eye(d)
            for torso_tag in (Region.TORSO_LUNG, Region.TORSO_CAVITY, Region.TORSO_OTHER):
                mask = tags == torso_tag
                if mask.any():
                    out[mask] = p.torso_conductivity(torso_tag) * eye
            known = heart
            for torso_tag in (Region.TORSO_LUNG, Region.TORSO_CAVITY, Region.TORSO_OTHER):
                known = known | (tags == torso_tag)
            if not known.all():
                raise ValueError("unknown region tag in mesh")
        return out


def _fibers_batch(centroids: np.ndarray, dim: int) -> np.ndarray:
    if dim == 3:
        z = np.clip(centroids[:, 2], 0.0, 1.0)
        theta = np.pi / 4 - np.pi / 2 * z
        return np.column_stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)])
    dx = centroids[:, 0] - 0.5
    dy = centroids[:, 1] - 0.5
    r = np.hypot(dx, dy)
    fibers = np.column_stack([-dy, dx])
    degenerate = r == 0.0
    r[degenerate] = 1.0
    fibers /= r[:, None]
    fibers[degenerate] = (1.0, 0.0)
    return fibers
