"""Mesh-refinement complexity study: iterations, CPU time, growth rates.

For a series of meshes of increasing resolution, a depolarisation wave is
simulated over a fixed physical window and the mean PCG iteration count
and solve time are taken over the depolarisation steps.  Logarithmic
growth rates between consecutive sizes and least-squares log-log slopes
quantify how the cost scales with the number of unknowns; a calibration
pass expresses one preconditioner inversion in operator-multiply units.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conductivity import ConductivityParams
from .errors import BidomainError
from .ionic import IonicParams, StimulusProtocol, default_protocol
from .mesh import build_cube_mesh, build_heart_torso_2d
from .precond import BlockLUPreconditioner
from .simulate import SimulationSetup, run_simulation
from .system import BidomainSystem, BlockVector


def growth_rate(cost_prev: float, cost_cur: float,
                dof_prev: int, dof_cur: int) -> float:
    """log(cost ratio) / log(size ratio) between consecutive refinements."""
    if min(cost_prev, cost_cur, dof_prev, dof_cur) <= 0:
        raise ValueError("costs and sizes must be strictly positive")
    if dof_cur <= dof_prev:
        raise ValueError("dof must increase along the series")
    return math.log(cost_cur / cost_prev) / math.log(dof_cur / dof_prev)


def least_squares_slope(dofs, costs) -> float:
    """Slope of the best line through (log dof, log cost)."""
    x = np.log(np.asarray(dofs, dtype=float))
    y = np.log(np.asarray(costs, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class BenchRecord:
    """Aggregates for one mesh of the series."""

    n: int
    cells: int
    dof: int
    iter_avg: float
    cpu_avg: float
    r_iter: float = float("nan")
    r_cpu: float = float("nan")
    mv_equivalent: float = float("nan")
    residual_sample: list[float] = field(default_factory=list)


@dataclass
class ScalingStudy:
    records: list[BenchRecord]
    slope_iter_dof: float
    slope_cpu: float

    def dofs(self):
        return [r.dof for r in self.records]


@dataclass
class BenchConfig:
    """Knobs of the scaling study (mesh series, physics, solver, window)."""

    series: tuple = (8, 16, 32)
    dim: int = 3
    coupled: bool = False
    dt_coarsest: float = 0.2
    t_end: float = 10.0
    tol: float = 1e-6
    max_iter: int = 500
    inner: str = "exact"
    calibration_trials: int = 11
    seed: int = 1234
    params: ConductivityParams | None = None
    ionic: IonicParams = field(default_factory=IonicParams)
    protocol: StimulusProtocol | None = None


class BenchAborted(BidomainError):
    """A solve in the series failed; completed records are preserved."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


def _build_mesh(cfg: BenchConfig, cells: int):
    if cfg.dim == 3:
        return build_cube_mesh(cells)
    if cfg.coupled:
        return build_heart_torso_2d(cells)
    from .mesh import build_square_mesh

    return build_square_mesh(cells)


def run_scaling_study(cfg: BenchConfig) -> ScalingStudy:
    """Run the series; the time step shrinks with the mesh size.

    Aborts with partial records preserved (BenchAborted) if any solve in
    the series fails.
    """
    if len(cfg.series) < 2:
        raise ValueError("series needs at least two mesh sizes")
    from .conductivity import default_params

    params = cfg.params or default_params(cfg.dim)
    protocol = cfg.protocol or default_protocol(cfg.dim)
    rng = np.random.default_rng(cfg.seed)

    records: list[BenchRecord] = []
    for idx, cells in enumerate(cfg.series):
        dt = cfg.dt_coarsest * cfg.series[0] / cells
        mesh = _build_mesh(cfg, cells)
        system = BidomainSystem.build(mesh, params, dt)
        precond = BlockLUPreconditioner(system, inner=cfg.inner)
        setup = SimulationSetup(
            mesh=mesh, system=system, precond=precond, ionic=cfg.ionic,
            protocol=protocol, dt=dt, t_end=cfg.t_end, tol=cfg.tol,
            max_iter=cfg.max_iter,
        )
        try:
            result = run_simulation(setup)
        except BidomainError as exc:
            raise BenchAborted(
                f"series entry {idx + 1} (cells={cells}) failed: {exc}", records
            ) from exc

        record = BenchRecord(
            n=idx + 1,
            cells=cells,
            dof=system.dof,
            iter_avg=result.depol_iter_avg,
            cpu_avg=result.depol_cpu_avg,
            mv_equivalent=calibrate_costs(system, precond,
                                          trials=cfg.calibration_trials, rng=rng),
            residual_sample=result.sample_history,
        )
        records.append(record)

    for prev, cur in zip(records, records[1:]):
        cur.r_iter = growth_rate(prev.iter_avg * prev.dof, cur.iter_avg * cur.dof,
                                 prev.dof, cur.dof)
        cur.r_cpu = growth_rate(prev.cpu_avg, cur.cpu_avg, prev.dof, cur.dof)

    dofs = [r.dof for r in records]
    return ScalingStudy(
        records=records,
        slope_iter_dof=least_squares_slope(dofs, [r.iter_avg * r.dof for r in records]),
        slope_cpu=least_squares_slope(dofs, [r.cpu_avg for r in records]),
    )


def calibrate_costs(system: BidomainSystem, precond: BlockLUPreconditioner,
                    trials: int = 11, rng: np.random.Generator | None = None) -> float:
    """Median preconditioner-inversion time over median operator-multiply time.

    Run on random block vectors; expresses the cost of one preconditioner
    application in operator-multiply units.
    """
    if trials < 10:
        raise ValueError("calibration needs at least 10 trials")
    rng = rng or np.random.default_rng(0)
    apply_times = []
    inverse_times = []
    for _ in range(trials):
        y = BlockVector(rng.standard_normal(system.n),
                        rng.standard_normal(system.n_heart))
        t0 = time.perf_counter()
        system.apply(y)
        t1 = time.perf_counter()
        precond.apply_inverse(y)
        t2 = time.perf_counter()
        apply_times.append(t1 - t0)
        inverse_times.append(t2 - t1)
    return float(np.median(inverse_times) / np.median(apply_times))


def save_study(study: ScalingStudy, out_dir, calibration: bool = True) -> list[Path]:
    """Write scaling.csv, per-mesh residual histories and calibration.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    scaling = out / "scaling.csv"
    with open(scaling, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n", "dof", "iter_avg", "cpu_avg_s", "r_iter", "r_cpu"])
        for r in study.records:
            writer.writerow([
                r.n, r.dof, f"{r.iter_avg:.6f}", f"{r.cpu_avg:.8f}",
                f"{r.r_iter:.6f}", f"{r.r_cpu:.6f}",
            ])
    written.append(scaling)

    for r in study.records:
        if not r.residual_sample:
            continue
        res_path = out / f"residuals_{r.n}.csv"
        with open(res_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["iter", "rel_residual"])
            for k, val in enumerate(r.residual_sample):
                writer.writerow([k, f"{val:.16e}"])
        written.append(res_path)

    if calibration:
        calib = out / "calibration.csv"
        with open(calib, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["dof", "mv_equiv"])
            for r in study.records:
                writer.writerow([r.dof, f"{r.mv_equivalent:.6f}"])
        written.append(calib)
    return written
