"""Command-line entry point: mesh export, solves, simulations, benchmarks.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 on
numerical failures.  Outputs are deterministic for a given seed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import plots, vtkio
from .config import RunConfig, load_config
from .errors import BidomainError, ConfigError
from .ionic import ionic_current, stimulus_vector
from .krylov import dump_residuals, pcg_solve
from .precond import BlockLUPreconditioner
from .simulate import SimState, SimulationSetup, run_simulation
from .system import BidomainSystem
from .verify import run_verification

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "inner", None):
        cfg.inner = args.inner
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _build_setup(cfg: RunConfig, mesh_file: str | None = None):
    mesh = vtkio.read_mesh_vtk(mesh_file) if mesh_file else cfg.build_mesh()
    system = BidomainSystem.build(mesh, cfg.conductivity(), cfg.dt)
    precond = BlockLUPreconditioner(system, inner=cfg.inner)
    return SimulationSetup(
        mesh=mesh, system=system, precond=precond, ionic=cfg.ionic,
        protocol=cfg.stimulus_protocol(), dt=cfg.dt, t_end=cfg.t_end,
        tol=cfg.tol, max_iter=cfg.max_iter,
        snapshot_every=cfg.snapshot_every,
        stop_when_activated=cfg.stop_when_activated,
    )


def cmd_mesh(args) -> int:
    cfg = _load(args)
    mesh = cfg.build_mesh()
    out = Path(args.out or "mesh.vtk")
    out.parent.mkdir(parents=True, exist_ok=True)
    vtkio.write_mesh_vtk(mesh, out)
    print(f"wrote {out} ({mesh.vertex_count} vertices, "
          f"{mesh.elements.shape[0]} elements, {mesh.heart_vertex_count} heart)")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load(args)
    setup = _build_setup(cfg, getattr(args, "mesh_file", None))
    system = setup.system

    # One implicit step from rest with the stimulus held mid-window.
    state = SimState.resting(system.n, system.n_heart, setup.ionic)
    t_probe = 0.5 * setup.protocol.duration
    ion = ionic_current(state.v, state.w, setup.ionic, system.params.c_m)
    stim = stimulus_vector(setup.mesh.vertices[: system.n_heart], t_probe,
                           setup.protocol)
    rhs = system.build_rhs(state.v, ion, stim, system.params.chi)
    x, stats = pcg_solve(system, setup.precond, rhs, tol=cfg.tol,
                         max_iter=cfg.max_iter)

    print(f"dof {system.dof}  iterations {stats.iterations}  "
          f"residual {stats.final_residual:.3e}  "
          f"wall {stats.wall_time_ms:.2f} ms  "
          f"applies mv={stats.mv_count} p1={stats.p1_count} pk={stats.pk_count}")
    print(f"u range [{x.u.min():.4f}, {x.u.max():.4f}] mV  "
          f"v range [{x.v.min():.4f}, {x.v.max():.4f}] mV")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        dump_residuals(stats, out / "residuals.csv")
        plots.plot_convergence({"solve": stats.residual_history},
                               out / "convergence.png")
        print(f"wrote {out / 'residuals.csv'} and {out / 'convergence.png'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    setup = _build_setup(cfg, getattr(args, "mesh_file", None))
    out = Path(args.out or "sim_out")
    out.mkdir(parents=True, exist_ok=True)

    writer = None
    if setup.snapshot_every > 0:
        def writer(state, step):
            path = out / f"fields_{step:06d}.vtk"
            vtkio.write_fields_vtk(setup.mesh, path, state.u, state.v)
            return path

    result = run_simulation(setup, snapshot_writer=writer)

    phi = result.activation.phi
    mesh = setup.mesh
    csv_path = out / "activation.csv"
    with open(csv_path, "w", newline="") as handle:
        writer_csv = csv.writer(handle)
        writer_csv.writerow(["vertex_id", "x", "y", "z", "phi_ms"])
        for vid in range(mesh.heart_vertex_count):
            coords = list(mesh.vertices[vid]) + [0.0] * (3 - mesh.dim)
            writer_csv.writerow(
                [vid, *(f"{c:.17g}" for c in coords), f"{phi[vid]:.10g}"])
    plots.plot_activation(mesh, phi, out / "activation.png")

    activated = int(np.isfinite(phi).sum())
    print(f"steps {result.n_steps}  activated {activated}/{phi.size}  "
          f"depol steps {int(result.depol_mask.sum())}")
    if result.depol_mask.any():
        print(f"depol window: iter_avg {result.depol_iter_avg:.2f}  "
              f"cpu_avg {result.depol_cpu_avg * 1e3:.2f} ms")
    print(f"wrote {csv_path} and {out / 'activation.png'}"
          + (f" plus {len(result.snapshots)} snapshots" if result.snapshots else ""))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args)
    bench_cfg = bench_mod.BenchConfig(
        series=cfg.bench_series, dim=cfg.dim, coupled=cfg.coupled,
        dt_coarsest=cfg.bench_dt_coarsest, t_end=cfg.bench_t_end,
        tol=cfg.tol, max_iter=cfg.max_iter, inner=cfg.inner,
        calibration_trials=cfg.bench_calibration_trials, seed=cfg.seed,
        params=cfg.conductivity(), ionic=cfg.ionic,
        protocol=cfg.stimulus_protocol(),
    )
    study = bench_mod.run_scaling_study(bench_cfg)

    out = Path(args.out or "bench_out")
    written = bench_mod.save_study(study, out)
    written.append(plots.plot_scaling(study, out / "scaling.png"))
    histories = {f"mesh {r.n} (dof {r.dof})": r.residual_sample
                 for r in study.records if r.residual_sample}
    if histories:
        written.append(plots.plot_convergence(histories, out / "convergence.png"))

    print(f"{'n':>3} {'dof':>9} {'iter_avg':>9} {'cpu_avg_s':>11} "
          f"{'r_iter':>7} {'r_cpu':>7} {'mv_eq':>7}")
    for r in study.records:
        print(f"{r.n:>3} {r.dof:>9} {r.iter_avg:>9.2f} {r.cpu_avg:>11.5f} "
              f"{r.r_iter:>7.2f} {r.r_cpu:>7.2f} {r.mv_equivalent:>7.1f}")
    print(f"log-log slopes: DOF*Iter {study.slope_iter_dof:.3f}, "
          f"CPU {study.slope_cpu:.3f}")
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    results = run_verification(seed=cfg.seed)
    failures = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        failures += 0 if res.passed else 1
        print(f"[{status}] {res.name:28s} {res.instance:22s} "
              f"value {res.value:.3e}  bound {res.threshold:.1e}")
    if failures:
        print(f"{failures} identity check(s) failed", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"all {len(results)} identity checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bidomain",
        description="Coupled heart-torso solver with a block-LU / "
                    "monodomain preconditioner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mesh_file=False):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="seed for random test vectors")
        p.add_argument("--inner", choices=["exact", "ic0", "jacobi"],
                       help="inner preconditioner override")
        if mesh_file:
            p.add_argument("--mesh-file", help="read geometry from a VTK file")

    p = sub.add_parser("mesh", help="generate a mesh and write legacy VTK")
    common(p)
    p.add_argument("--out", help="output .vtk path (default mesh.vtk)")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="run a single implicit-step solve")
    common(p, mesh_file=True)
    p.add_argument("--out", help="directory for residual CSV and figure")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run the time loop")
    common(p, mesh_file=True)
    p.add_argument("--out", help="output directory (default sim_out)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="mesh-refinement scaling study")
    common(p)
    p.add_argument("--out", help="output directory (default bench_out)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="dense-oracle identity checks")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BidomainError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
