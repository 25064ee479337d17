"""Two-variable membrane model and stimulation protocol.

A Mitchell-Schaeffer style model: one cubic inward/outward current balance
driven by a single gate, mapped to physiological millivolts through an
affine change of variable between rest (-90 mV) and peak (+50 mV).  The
solver tolerances and iteration counts under study do not depend on the
membrane kinetics; this model exists to drive a realistic depolarisation
wave at a fraction of the cost of a full ventricular cell model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IonicParams:
    """Gate time constants (ms), threshold, and the mV <-> dimensionless map."""

    v_rest: float = -90.0
    v_peak: float = 50.0
    tau_in: float = 0.3
    tau_out: float = 6.0
    tau_open: float = 120.0
    tau_close: float = 150.0
    u_gate: float = 0.13

    def __post_init__(self):
        if self.v_peak <= self.v_rest:
            raise ValueError("v_peak must exceed v_rest")
        for name in ("tau_in", "tau_out", "tau_open", "tau_close"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def v_span(self) -> float:
        return self.v_peak - self.v_rest

    def dimensionless(self, v):
        return (np.asarray(v, dtype=float) - self.v_rest) / self.v_span


def ionic_current(v, w, params: IonicParams, c_m: float = 1.0):
    """Membrane current density (uA/cm^2) for potential v (mV) and gate w.

    Negative values depolarise.  Zero at rest for any gate state.
    """
    u = params.dimensionless(v)
    rate = np.asarray(w) * u * u * (1.0 - u) / params.tau_in - u / params.tau_out
    return -c_m * params.v_span * rate


def update_gate(w, v, dt: float, params: IonicParams):
    """One explicit Euler step of the gate ODE, clamped to [0, 1].

    The gate recovers towards 1 below the threshold and closes towards 0
    above it.
    """
    if dt <= 0:
        raise ValueError("dt must be strictly positive")
    u = params.dimensionless(v)
    w = np.asarray(w, dtype=float)
    opening = (1.0 - w) / params.tau_open
    closing = -w / params.tau_close
    rate = np.where(u < params.u_gate, opening, closing)
    return np.clip(w + dt * rate, 0.0, 1.0)


@dataclass(frozen=True)
class StimulusSite:
    """Ball-shaped current injection active on [start, start + duration)."""

    center: tuple
    start: float = 0.0


@dataclass(frozen=True)
class StimulusProtocol:
    """Collection of stimulation sites sharing radius, amplitude, duration."""

    sites: tuple = ()
    radius: float = 0.1
    amplitude: float = 100.0
    duration: float = 1.0

    @property
    def t_end(self) -> float:
        if not self.sites:
            return 0.0
        return max(s.start for s in self.sites) + self.duration


def default_protocol(dim: int) -> StimulusProtocol:
    """Centre stimulus in 3D; two early and two delayed sites in 2D.

    The 2D sites sit near the left and right edges of the heart block, the
    right pair firing 5 ms after the left pair.
    """
    if dim == 3:
        return StimulusProtocol(sites=(StimulusSite((0.5, 0.5, 0.5)),))
    return StimulusProtocol(
        sites=(
            StimulusSite((0.30, 0.40), start=0.0),
            StimulusSite((0.30, 0.60), start=0.0),
            StimulusSite((0.70, 0.40), start=5.0),
            StimulusSite((0.70, 0.60), start=5.0),
        )
    )


def stimulus(x, t: float, protocol: StimulusProtocol) -> float:
    """Stimulation current density at point x and time t (0 outside sites)."""
    x = np.asarray(x, dtype=float)
    value = 0.0
    for site in protocol.sites:
        if site.start <= t < site.start + protocol.duration:
            if np.linalg.norm(x - np.asarray(site.center)) <= protocol.radius:
                value = max(value, protocol.amplitude)
    return value


def stimulus_vector(points: np.ndarray, t: float,
                    protocol: StimulusProtocol) -> np.ndarray:
    """Vectorised stimulus over many points (one value per row of points)."""
    points = np.asarray(points, dtype=float)
    out = np.zeros(points.shape[0])
    for site in protocol.sites:
        if site.start <= t < site.start + protocol.duration:
            dist2 = ((points - np.asarray(site.center)) ** 2).sum(axis=1)
            inside = dist2 <= protocol.radius ** 2
            out[inside] = np.maximum(out[inside], protocol.amplitude)
    return out
