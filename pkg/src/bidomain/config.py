"""JSON run configuration: defaults, strict validation, object construction.

Unknown keys are rejected with the offending key named; physical values
are checked for positivity where required.  Defaults follow the standard
parameter table, with the surface-to-volume ratio and the stimulation
protocol depending on the dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .conductivity import ConductivityParams, default_params
from .errors import ConfigError
from .ionic import IonicParams, StimulusProtocol, StimulusSite, default_protocol
from .mesh import build_cube_mesh, build_heart_torso_2d, build_square_mesh
from .precond import INNER_NAMES

_SECTION_KEYS = {
    "mesh": {"dim", "cells", "coupled"},
    "physics": {"g_i_l", "g_i_t", "g_e_l", "g_e_t", "k_lung", "k_cavity",
                "k_other", "chi", "c_m"},
    "ionic": {"v_rest", "v_peak", "tau_in", "tau_out", "tau_open",
              "tau_close", "u_gate"},
    "stimulus": {"radius", "amplitude", "duration", "sites"},
    "solver": {"tol", "max_iter", "inner"},
    "sim": {"dt_ms", "t_end_ms", "snapshot_every", "stop_when_activated"},
    "bench": {"series", "seed", "t_end_ms", "dt_coarsest_ms",
              "calibration_trials"},
}

_SITE_KEYS = {"center", "start"}


@dataclass
class RunConfig:
    """Validated configuration, ready to build meshes and systems from."""

    dim: int = 3
    cells: int = 8
    coupled: bool = False
    physics: dict = field(default_factory=dict)
    ionic: IonicParams = field(default_factory=IonicParams)
    protocol: StimulusProtocol | None = None
    tol: float = 1e-6
    max_iter: int = 500
    inner: str = "exact"
    dt: float = 0.2
    t_end: float = 10.0
    snapshot_every: int = 0
    stop_when_activated: bool = False
    bench_series: tuple = (8, 16, 32)
    bench_t_end: float = 10.0
    bench_dt_coarsest: float = 0.2
    bench_calibration_trials: int = 11
    seed: int = 1234

    def conductivity(self) -> ConductivityParams:
        return default_params(self.dim, **self.physics)

    def stimulus_protocol(self) -> StimulusProtocol:
        return self.protocol if self.protocol is not None else default_protocol(self.dim)

    def build_mesh(self):
        try:
            if self.dim == 3:
                if self.coupled:
                    raise ConfigError("coupled geometry is 2D only")
                return build_cube_mesh(self.cells)
            if self.coupled:
                return build_heart_torso_2d(self.cells)
            return build_square_mesh(self.cells)
        except ValueError as exc:
            raise ConfigError(f"mesh.cells: {exc}") from exc


def _check_keys(section: str, entries: dict) -> None:
    allowed = _SECTION_KEYS[section]
    for key in entries:
        if key not in allowed:
            raise ConfigError(f"unknown key '{section}.{key}'")


def _positive(section: str, key: str, value) -> float:
    value = float(value)
    if value <= 0:
        raise ConfigError(f"'{section}.{key}' must be strictly positive")
    return value


def parse_config(doc: dict) -> RunConfig:
    """Validate a parsed JSON document and produce a RunConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a JSON object")
    for key in doc:
        if key not in _SECTION_KEYS:
            raise ConfigError(f"unknown key '{key}'")

    cfg = RunConfig()

    mesh_doc = doc.get("mesh", {})
    _check_keys("mesh", mesh_doc)
    cfg.dim = int(mesh_doc.get("dim", 3))
    if cfg.dim not in (2, 3):
        raise ConfigError("'mesh.dim' must be 2 or 3")
    cfg.coupled = bool(mesh_doc.get("coupled", cfg.dim == 2))
    cfg.cells = int(mesh_doc.get("cells", 8))
    if cfg.cells < 2:
        raise ConfigError("'mesh.cells' must be at least 2")

    physics_doc = doc.get("physics", {})
    _check_keys("physics", physics_doc)
    cfg.physics = {k: _positive("physics", k, v) for k, v in physics_doc.items()}
    try:
        cfg.conductivity()
    except ValueError as exc:
        raise ConfigError(f"physics: {exc}") from exc

    ionic_doc = doc.get("ionic", {})
    _check_keys("ionic", ionic_doc)
    try:
        cfg.ionic = IonicParams(**{k: float(v) for k, v in ionic_doc.items()})
    except ValueError as exc:
        raise ConfigError(f"ionic: {exc}") from exc

    stim_doc = doc.get("stimulus", {})
    _check_keys("stimulus", stim_doc)
    if stim_doc:
        base = default_protocol(cfg.dim)
        sites = base.sites
        if "sites" in stim_doc:
            parsed = []
            for k, entry in enumerate(stim_doc["sites"]):
                for key in entry:
                    if key not in _SITE_KEYS:
                        raise ConfigError(f"unknown key 'stimulus.sites[{k}].{key}'")
                if "center" not in entry:
                    raise ConfigError(f"'stimulus.sites[{k}].center' is required")
                center = tuple(float(c) for c in entry["center"])
                if len(center) != cfg.dim:
                    raise ConfigError(
                        f"'stimulus.sites[{k}].center' must have {cfg.dim} coordinates"
                    )
                parsed.append(StimulusSite(center, float(entry.get("start", 0.0))))
            sites = tuple(parsed)
        cfg.protocol = StimulusProtocol(
            sites=sites,
            radius=_positive("stimulus", "radius", stim_doc.get("radius", base.radius)),
            amplitude=float(stim_doc.get("amplitude", base.amplitude)),
            duration=_positive("stimulus", "duration",
                               stim_doc.get("duration", base.duration)),
        )

    solver_doc = doc.get("solver", {})
    _check_keys("solver", solver_doc)
    cfg.tol = _positive("solver", "tol", solver_doc.get("tol", cfg.tol))
    cfg.max_iter = int(solver_doc.get("max_iter", cfg.max_iter))
    if cfg.max_iter < 1:
        raise ConfigError("'solver.max_iter' must be at least 1")
    cfg.inner = str(solver_doc.get("inner", cfg.inner))
    if cfg.inner not in INNER_NAMES:
        raise ConfigError(
            f"'solver.inner' must be one of {list(INNER_NAMES)}, got '{cfg.inner}'"
        )

    sim_doc = doc.get("sim", {})
    _check_keys("sim", sim_doc)
    cfg.dt = _positive("sim", "dt_ms", sim_doc.get("dt_ms", cfg.dt))
    cfg.t_end = float(sim_doc.get("t_end_ms", cfg.t_end))
    if cfg.t_end < 0:
        raise ConfigError("'sim.t_end_ms' must be non-negative")
    cfg.snapshot_every = int(sim_doc.get("snapshot_every", 0))
    if cfg.snapshot_every < 0:
        raise ConfigError("'sim.snapshot_every' must be non-negative")
    cfg.stop_when_activated = bool(sim_doc.get("stop_when_activated", False))

    bench_doc = doc.get("bench", {})
    _check_keys("bench", bench_doc)
    series = bench_doc.get("series", list(cfg.bench_series))
    cfg.bench_series = tuple(int(s) for s in series)
    if any(s < 2 for s in cfg.bench_series):
        raise ConfigError("'bench.series' entries must be at least 2")
    cfg.seed = int(bench_doc.get("seed", cfg.seed))
    cfg.bench_t_end = _positive("bench", "t_end_ms",
                                bench_doc.get("t_end_ms", cfg.bench_t_end))
    cfg.bench_dt_coarsest = _positive(
        "bench", "dt_coarsest_ms",
        bench_doc.get("dt_coarsest_ms", cfg.bench_dt_coarsest))
    cfg.bench_calibration_trials = int(
        bench_doc.get("calibration_trials", cfg.bench_calibration_trials))

    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in config file: {exc}") from exc
    return parse_config(doc)
