"""Report figures rendered next to the delimited output files.

All plots go straight to image files through the Agg backend, so the
report path works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .mesh import Mesh, Region


def plot_scaling(study, path) -> Path:
    """Log-log cost panels: DOF*Iter and CPU per solve versus DOF."""
    records = study.records
    dofs = np.array([r.dof for r in records], dtype=float)
    iter_cost = np.array([r.iter_avg * r.dof for r in records])
    cpu = np.array([r.cpu_avg for r in records])

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.loglog(dofs, iter_cost, "o-", label="DOF x Iter")
    ref = iter_cost[0] * (dofs / dofs[0]) ** study.slope_iter_dof
    ax1.loglog(dofs, ref, "--", color="gray",
               label=f"slope {study.slope_iter_dof:.2f}")
    ax1.set_xlabel("DOF")
    ax1.set_ylabel("DOF x mean iterations")
    ax1.legend()

    ax2.loglog(dofs, cpu, "s-", color="tab:red", label="CPU per solve")
    ref = cpu[0] * (dofs / dofs[0]) ** study.slope_cpu
    ax2.loglog(dofs, ref, "--", color="gray", label=f"slope {study.slope_cpu:.2f}")
    ax2.set_xlabel("DOF")
    ax2.set_ylabel("mean solve time [s]")
    ax2.legend()

    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_convergence(histories: dict, path) -> Path:
    """Residual decay per iteration for one or more labelled solves."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, history in histories.items():
        if not len(history):
            continue
        ax.semilogy(range(len(history)), history, "o-", label=str(label))
    ax.set_xlabel("PCG iteration")
    ax.set_ylabel("relative residual")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_activation(mesh: Mesh, phi: np.ndarray, path, slice_z: float = 0.5) -> Path:
    """Activation-time map: heart triangles in 2D, a z-slice scatter in 3D."""
    fig, ax = plt.subplots(figsize=(5.5, 4.6))
    finite = np.isfinite(phi)
    if mesh.dim == 2:
        heart_elements = mesh.elements[mesh.tags == Region.HEART]
        pts = mesh.vertices[: mesh.heart_vertex_count]
        values = np.where(finite, phi, np.nan)
        tpc = ax.tripcolor(pts[:, 0], pts[:, 1], heart_elements, values,
                           shading="gouraud", cmap="viridis")
        fig.colorbar(tpc, ax=ax, label="activation time [ms]")
    else:
        pts = mesh.vertices[: mesh.heart_vertex_count]
        on_slice = np.isclose(pts[:, 2], slice_z)
        sel = on_slice & finite[: pts.shape[0]]
        sc = ax.scatter(pts[sel, 0], pts[sel, 1], c=phi[: pts.shape[0]][sel],
                        cmap="viridis", s=18)
        fig.colorbar(sc, ax=ax, label="activation time [ms]")
        ax.set_title(f"z = {slice_z}")
    ax.set_xlabel("x [cm]")
    ax.set_ylabel("y [cm]")
    ax.set_aspect("equal")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
