"""Fiber-link models: loss budgets, delay drift, polarization wander.

Deployed fiber changes its effective length with temperature and wind, so
the relative arrival time of the two signal photons at the swapping
station wanders by hundreds of picoseconds over a day; the daily
peak-to-peak excursion depends on the weather (roughly 200 ps on rainy
days, 500 ps cloudy, 1000 ps sunny).  The drift model is a slow diurnal
sinusoid plus mean-reverting (Ornstein-Uhlenbeck) noise, calibrated so the
open-loop 24 h excursion lands on the preset value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

#: Diurnal period of the deterministic drift component, s.
DAY_S = 86_400.0

#: Sinusoid amplitude as a fraction of the preset peak-to-peak.
_SINE_FRACTION = 0.45

#: OU stationary sigma as a fraction of the preset peak-to-peak.
_NOISE_FRACTION = 0.04


@dataclass(frozen=True)
class LinkBudget:
    """Transmission losses of one photon path, by fiber type (dB)."""

    coiled_db: float = 0.0
    underground_db: float = 0.0
    aerial_db: float = 0.0
    length_km: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("coiled_db", "underground_db", "aerial_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total_db(self) -> float:
        return self.coiled_db + self.underground_db + self.aerial_db


def survival_probability(budget: LinkBudget, extra_db: float = 0.0) -> float:
    """Photon survival 10^(-total_dB/10) through the link plus insertions."""
    if extra_db < 0:
        raise ValueError("insertion losses must be >= 0")
    return 10.0 ** (-(budget.total_db + extra_db) / 10.0)


@dataclass(frozen=True)
class WeatherPreset:
    label: str
    peak_to_peak_ps: float
    drift_timescale_s: float = 3600.0

    def __post_init__(self):
        if self.peak_to_peak_ps < 0 or self.drift_timescale_s <= 0:
            raise ValueError("invalid weather preset")


RAINY = WeatherPreset("rainy", 200.0)
CLOUDY = WeatherPreset("cloudy", 500.0)
SUNNY = WeatherPreset("sunny", 1000.0)
CALM = WeatherPreset("calm", 0.0)     # no drift; handy for idealized runs

PRESETS = {p.label: p for p in (RAINY, CLOUDY, SUNNY, CALM)}


@dataclass(frozen=True)
class DriftTrace:
    """Relative arrival-time delay vs wall clock under one weather preset."""

    times_s: np.ndarray
    delays_ps: np.ndarray
    preset: WeatherPreset
    seed: int

    def __post_init__(self):
        if len(self.times_s) != len(self.delays_ps):
            raise ValueError("time and delay series must have equal length")
        if len(self.times_s) > 1 and not np.all(np.diff(self.times_s) > 0):
            raise ValueError("wall time must be strictly increasing")
        if len(self.delays_ps) and self.preset.peak_to_peak_ps > 0:
            excursion = float(np.ptp(self.delays_ps))
            if excursion > 1.2 * self.preset.peak_to_peak_ps:
                raise ValueError(
                    f"delay excursion {excursion:.0f} ps exceeds 1.2x preset "
                    f"peak-to-peak {self.preset.peak_to_peak_ps:.0f} ps"
                )

    def delay_at(self, t_s) -> np.ndarray:
        """Nearest-earlier sample lookup (traces are dense, dt ~ seconds)."""
        idx = np.clip(
            np.searchsorted(self.times_s, np.atleast_1d(t_s), side="right") - 1,
            0,
            len(self.times_s) - 1,
        )
        return self.delays_ps[idx]


def _rng(seed: int, stream: int) -> Generator:
    return Generator(Philox(SeedSequence(seed, spawn_key=(stream,))))


def generate_drift(
    preset: WeatherPreset, duration_s: float, dt_s: float, seed: int
) -> DriftTrace:
    """Stochastic delay drift: diurnal sinusoid + OU noise, seeded.

    The unit-scale noise path is drawn first and multiplied by the preset
    amplitude, so traces of different presets at an equal seed are ordered
    by their peak-to-peak targets.
    """
    if duration_s <= 0 or dt_s <= 0:
        raise ValueError("duration and sample step must be positive")
    rng = _rng(seed, 1)
    n = int(round(duration_s / dt_s)) + 1
    t = np.arange(n) * dt_s

    phase0 = rng.uniform(0.0, 2.0 * math.pi)
    sine = np.sin(2.0 * math.pi * t / DAY_S + phase0)

    # exact OU discretization at unit stationary variance
    rho = math.exp(-dt_s / preset.drift_timescale_s)
    kick = math.sqrt(1.0 - rho * rho)
    eps = rng.standard_normal(n)
    ou = np.empty(n)
    ou[0] = eps[0]
    for i in range(1, n):
        ou[i] = rho * ou[i - 1] + kick * eps[i]
    # keep rare excursions inside the preset's 1.2x peak-to-peak envelope
    np.clip(ou, -3.5, 3.5, out=ou)

    ptp = preset.peak_to_peak_ps
    delays = _SINE_FRACTION * ptp * sine + _NOISE_FRACTION * ptp * ou
    return DriftTrace(times_s=t, delays_ps=delays, preset=preset, seed=seed)


def polarization_drift(
    duration_s: float, rate_param: float, seed: int, dt_s: float = 10.0
) -> "OverlapTrace":
    """Polarization wander of one channel relative to the other.

    The relative Stokes vector performs isotropic diffusion on the sphere
    with angular diffusion rate ``rate_param`` (rad^2/s); the returned
    trace is the pairwise intensity overlap |<p_A|p_B>|^2 = (1+cos g)/2
    for sphere angle g.  A long unconstrained walk averages to 1/2.
    """
    if rate_param < 0:
        raise ValueError("drift rate must be >= 0")
    if duration_s <= 0 or dt_s <= 0:
        raise ValueError("duration and sample step must be positive")
    rng = _rng(seed, 2)
    n = int(round(duration_s / dt_s)) + 1
    t = np.arange(n) * dt_s

    v = np.zeros((n, 3))
    v[0] = (0.0, 0.0, 1.0)
    step_sigma = math.sqrt(rate_param * dt_s)
    for i in range(1, n):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = rng.standard_normal() * step_sigma
        v[i] = _rotate(v[i - 1], axis, angle)
    overlap = (1.0 + v[:, 2]) / 2.0
    return OverlapTrace(times_s=t, overlap=np.clip(overlap, 0.0, 1.0), seed=seed)


def _rotate(vec: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``vec`` about ``axis`` by ``angle``."""
    c, s = math.cos(angle), math.sin(angle)
    return (
        vec * c
        + np.cross(axis, vec) * s
        + axis * np.dot(axis, vec) * (1.0 - c)
    )


@dataclass(frozen=True)
class OverlapTrace:
    """Polarization intensity-overlap factor vs wall clock."""

    times_s: np.ndarray
    overlap: np.ndarray
    seed: int

    def overlap_at(self, t_s) -> np.ndarray:
        idx = np.clip(
            np.searchsorted(self.times_s, np.atleast_1d(t_s), side="right") - 1,
            0,
            len(self.times_s) - 1,
        )
        return self.overlap[idx]


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def write_trace_csv(trace: DriftTrace, path, header_comment: str = "") -> None:
    """DriftTrace export: columns time_s, delay_ps (header row required)."""
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("time_s,delay_ps\n")
        for t, d in zip(trace.times_s, trace.delays_ps):
            fh.write(f"{t:.6f},{d:.6f}\n")


def read_trace_csv(path, preset: WeatherPreset | None = None) -> DriftTrace:
    times, delays = [], []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header[:2] != ["time_s", "delay_ps"]:
                    raise ValueError(
                        f"expected header 'time_s,delay_ps', got {line!r}"
                    )
                continue
            ts, ds = line.split(",")[:2]
            times.append(float(ts))
            delays.append(float(ds))
    if preset is None:
        span = float(np.ptp(delays)) if delays else 0.0
        preset = WeatherPreset("imported", max(span, 1.0))
    return DriftTrace(
        times_s=np.asarray(times), delays_ps=np.asarray(delays),
        preset=preset, seed=-1,
    )
