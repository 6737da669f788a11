"""Scenario configuration: schema, validation, hashing, bundled files.

Scenario files are JSON.  The key layout mirrors the dataclasses below;
``load_scenario`` reports schema violations with the offending key path
(or the JSON line/column for syntax errors).  Values that stand in for
unpublished experimental parameters are listed under ``calibrated`` in
the bundled files.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from importlib import resources

from .channel import LinkBudget, WeatherPreset, PRESETS
from .detection import DetectorConfig, TdcConfig
from .errors import ConfigError

#: Speed of light, m/s.
C_M_PER_S = 299_792_458.0


@dataclass(frozen=True)
class SourceConfig:
    """One sequential time-bin pair source."""

    mu: float = 0.023                    # mean pair number per time bin
    n_bins: int = 8                      # bins per analysis frame
    clock_rate_hz: float = 1e9
    pump_coherence_s: float = 300e-6
    wavelength_stability_pm: float = 0.18
    wavelength_nm: float = 1550.0
    visibility: float = 1.0              # source dephasing factor in (0, 1]
    emission: str = "poisson"            # "poisson" | "single" (forced one pair)

    def __post_init__(self):
        if self.mu < 0:
            raise ConfigError("mu must be >= 0", "source.mu")
        if self.clock_rate_hz <= 0:
            raise ConfigError("clock rate must be positive", "source.clock_rate_hz")
        if self.n_bins < 1:
            raise ConfigError("n_bins must be >= 1", "source.n_bins")
        if not 0.0 < self.visibility <= 1.0:
            raise ConfigError("visibility must be in (0, 1]", "source.visibility")
        if self.emission not in ("poisson", "single"):
            raise ConfigError("emission must be 'poisson' or 'single'", "source.emission")

    @property
    def tau_s(self) -> float:
        return 1.0 / self.clock_rate_hz

    def p_single_pair_frame(self) -> float:
        """Probability that a frame carries exactly one pair."""
        if self.emission == "single":
            return 1.0
        lam = self.n_bins * self.mu
        return lam * math.exp(-lam)


@dataclass(frozen=True)
class StabilizationConfig:
    enabled: bool = True
    update_period_s: float = 60.0
    gain: float = 1.0
    actuator_range_ps: float = 600.0
    actuator_resolution_ps: float = 1.0
    events_per_estimate: int = 10_000


@dataclass(frozen=True)
class PolarizationConfig:
    enabled: bool = True          # electronic polarization controller on/off
    drift_rate: float = 1e-4      # angular diffusion, rad^2/s
    gain: float = 0.7
    update_period_s: float = 30.0


@dataclass(frozen=True)
class NoiseChannels:
    multi_pair: bool = False
    phase_noise: bool = False
    # Scale applied to the sampled pump-phase offsets; calibrated so the
    # pump-instability channel alone degrades the swapped fringe to ~0.96.
    phase_noise_scale: float = 0.6687


@dataclass(frozen=True)
class SweepPlan:
    kind: str = "phase"                   # "phase" | "temperature"
    parameter: str = "alice"              # which analyzer is swept
    values: tuple = ()
    fixed_phase_rad: float = 0.0          # the other analyzer's dial
    seconds_per_point: float = 1.0
    coefficient_rad_per_c: float = 2.0 * math.pi / 0.5
    offset_rad: float = 0.0

    def __post_init__(self):
        if self.kind not in ("phase", "temperature"):
            raise ConfigError("sweep kind must be 'phase' or 'temperature'", "sweep.kind")
        if len(self.values) < 1:
            raise ConfigError("sweep needs at least one value", "sweep.values")
        if self.seconds_per_point <= 0:
            raise ConfigError("seconds_per_point must be positive", "sweep.seconds_per_point")

    def dial_values(self):
        """Swept analyzer dial in radians."""
        if self.kind == "phase":
            return [float(v) for v in self.values]
        return [
            float(v) * self.coefficient_rad_per_c + self.offset_rad
            for v in self.values
        ]


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    mode: str                              # "swap" | "source"
    alice: SourceConfig
    bob: SourceConfig
    links: dict                            # photon path -> LinkBudget
    extra_db: dict                         # per-photon insertion losses, dB
    detectors: DetectorConfig
    tdc: TdcConfig
    weather: WeatherPreset
    stabilization: StabilizationConfig
    polarization: PolarizationConfig
    channels: NoiseChannels
    sweep: SweepPlan
    seed: int = 1
    which_source: str = "alice"            # analyzed source in source mode
    coincidence_window_ps: float = 500.0
    coherence_time_ps: float = 110.0
    theta_per_bin_rad: float = 0.6
    calibrated: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("swap", "source"):
            raise ConfigError("mode must be 'swap' or 'source'", "mode")
        if self.alice.n_bins != self.bob.n_bins:
            raise ConfigError("sources must share n_bins", "sources")
        if self.alice.clock_rate_hz != self.bob.clock_rate_hz:
            raise ConfigError("sources must share the clock rate", "sources")
        for path in ("alice_signal", "bob_signal", "alice_idler", "bob_idler"):
            if path not in self.links:
                raise ConfigError(f"missing link budget '{path}'", "links")

    @property
    def n_bins(self) -> int:
        return self.alice.n_bins

    @property
    def frame_rate_hz(self) -> float:
        return self.alice.clock_rate_hz / self.n_bins

    @property
    def tau_ps(self) -> float:
        return 1e12 / self.alice.clock_rate_hz

    def to_dict(self) -> dict:
        d = asdict(self)
        d["links"] = {
            k: {
                "coiled_db": v.coiled_db,
                "underground_db": v.underground_db,
                "aerial_db": v.aerial_db,
            }
            for k, v in self.links.items()
        }
        d["weather"] = {
            "label": self.weather.label,
            "peak_to_peak_ps": self.weather.peak_to_peak_ps,
            "drift_timescale_s": self.weather.drift_timescale_s,
        }
        d["sweep"] = dict(asdict(self.sweep), values=list(self.sweep.values))
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def sigma_theta_rad(src: SourceConfig) -> float:
    """Per-bin phase jitter from the pump wavelength stability.

    sigma = 2 pi c dlambda tau / lambda^2; 0.18 pm at 1550 nm and a 1 ns
    bin gives about 0.141 rad.
    """
    lam = src.wavelength_nm * 1e-9
    dlam = src.wavelength_stability_pm * 1e-12
    return 2.0 * math.pi * C_M_PER_S * dlam * src.tau_s / lam**2


# ---------------------------------------------------------------------------
# JSON loading
# ---------------------------------------------------------------------------

_KNOWN_TOP_KEYS = {
    "name", "mode", "sources", "links", "extra_db", "detectors", "tdc",
    "weather", "stabilization", "polarization", "channels", "sweep", "seed",
    "which_source", "coincidence_window_ps", "coherence_time_ps",
    "theta_per_bin_rad", "calibrated", "description",
}


def _take(d: dict, key: str, cls, path: str):
    sub = d.get(key, {})
    if not isinstance(sub, dict):
        raise ConfigError(f"expected an object for '{key}'", path)
    try:
        return cls(**sub)
    except TypeError as exc:
        raise ConfigError(f"bad keys for '{key}': {exc}", path) from exc
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc), path) from exc


def scenario_from_dict(raw: dict, name_hint: str = "scenario") -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object", name_hint)
    unknown = set(raw) - _KNOWN_TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}", name_hint)
    for key in ("mode", "sweep"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'", name_hint)

    sources = raw.get("sources", {})
    alice = _take(sources, "alice", SourceConfig, "sources.alice")
    bob = _take(sources, "bob", SourceConfig, "sources.bob")

    links = {}
    for path_name, sub in raw.get("links", {}).items():
        try:
            links[path_name] = LinkBudget(**sub)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), f"links.{path_name}") from exc

    weather_raw = raw.get("weather", "calm")
    if isinstance(weather_raw, str):
        if weather_raw not in PRESETS:
            raise ConfigError(
                f"unknown weather preset '{weather_raw}' "
                f"(known: {sorted(PRESETS)})", "weather",
            )
        weather = PRESETS[weather_raw]
    else:
        try:
            weather = WeatherPreset(**weather_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "weather") from exc

    sweep_raw = dict(raw["sweep"])
    if "values" in sweep_raw:
        sweep_raw["values"] = tuple(sweep_raw["values"])
    try:
        sweep = SweepPlan(**sweep_raw)
    except TypeError as exc:
        raise ConfigError(f"bad sweep keys: {exc}", "sweep") from exc

    try:
        cfg = ScenarioConfig(
            name=raw.get("name", name_hint),
            mode=raw["mode"],
            alice=alice,
            bob=bob,
            links=links,
            extra_db=dict(raw.get("extra_db", {})),
            detectors=_take(raw, "detectors", DetectorConfig, "detectors"),
            tdc=_take(raw, "tdc", TdcConfig, "tdc"),
            weather=weather,
            stabilization=_take(raw, "stabilization", StabilizationConfig, "stabilization"),
            polarization=_take(raw, "polarization", PolarizationConfig, "polarization"),
            channels=_take(raw, "channels", NoiseChannels, "channels"),
            sweep=sweep,
            seed=int(raw.get("seed", 1)),
            which_source=raw.get("which_source", "alice"),
            coincidence_window_ps=float(raw.get("coincidence_window_ps", 500.0)),
            coherence_time_ps=float(raw.get("coherence_time_ps", 110.0)),
            theta_per_bin_rad=float(raw.get("theta_per_bin_rad", 0.6)),
            calibrated=dict(raw.get("calibrated", {})),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), name_hint) from exc
    return cfg


def load_scenario(path) -> ScenarioConfig:
    """Load and validate a scenario file, with line-precise diagnostics."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}"
        ) from exc
    except OSError as exc:
        raise ConfigError(str(exc), str(path)) from exc
    return scenario_from_dict(raw, name_hint=str(path))


def bundled_scenario_names() -> list:
    files = resources.files("swapsim") / "scenarios"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_bundled_scenario(name: str) -> ScenarioConfig:
    files = resources.files("swapsim") / "scenarios" / f"{name}.json"
    raw = json.loads(files.read_text())
    return scenario_from_dict(raw, name_hint=name)
