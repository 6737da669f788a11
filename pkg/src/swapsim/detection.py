"""Single-photon detection: efficiency, dark counts, dead time, TDC.

Click records are timestamped at the time-to-digital converter resolution
(4 ps) and carry the frame (trial) they belong to.  Coincidence counting
walks time-sorted streams with a greedy earliest-match rule so that each
click is used at most once per tuple; the rule is deterministic for
sorted input and documented here as the package's pairing convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

#: SNSPD recovery time, ps.
DEAD_TIME_PS = 40_000.0

#: TDC resolution, ps.
TDC_RESOLUTION_PS = 4.0


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 0.70
    dark_rate_hz: float = 100.0
    dead_time_ps: float = DEAD_TIME_PS
    jitter_sigma_ps: float = 0.0    # disabled by default; TDC granularity dominates

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if self.dead_time_ps < 0 or self.dark_rate_hz < 0 or self.jitter_sigma_ps < 0:
            raise ValueError("detector parameters must be >= 0")


@dataclass(frozen=True)
class TdcConfig:
    resolution_ps: float = TDC_RESOLUTION_PS
    sync_source: str = "charlie-10mhz"

    def __post_init__(self):
        if self.resolution_ps <= 0:
            raise ValueError("TDC resolution must be positive")


@dataclass(frozen=True)
class ClickRecord:
    detector_id: str
    time_ps: float      # TDC-quantized
    trial_id: int


@dataclass(frozen=True)
class CoincidenceWindow:
    width_ps: float = 500.0
    allowed_bin_offsets: tuple = (0,)
    bin_separation_ps: float = 1000.0

    def __post_init__(self):
        if self.width_ps <= 0:
            raise ValueError("window width must be positive")

    def matches(self, dt_ps: float) -> bool:
        return any(
            abs(abs(dt_ps) - abs(m) * self.bin_separation_ps) <= self.width_ps / 2.0
            for m in self.allowed_bin_offsets
        )


def tdc_quantize(t_ps, cfg: TdcConfig = TdcConfig()):
    """Floor to the nearest lower multiple of the TDC resolution."""
    return np.floor(np.asarray(t_ps, dtype=float) / cfg.resolution_ps) * cfg.resolution_ps


def apply_dead_time(times_ps: np.ndarray, dead_time_ps: float) -> np.ndarray:
    """Drop clicks closer than dead_time to the last surviving click.

    Non-paralyzable model referenced to kept clicks; idempotent.
    """
    times = np.sort(np.asarray(times_ps, dtype=float))
    if times.size == 0 or dead_time_ps <= 0:
        return times
    keep = np.zeros(times.size, dtype=bool)
    last = -math.inf
    for i, t in enumerate(times):
        if t - last >= dead_time_ps:
            keep[i] = True
            last = t
    return times[keep]


def detect(
    arrivals,
    cfg: DetectorConfig,
    duration_ps: float,
    seed: int,
    tdc: TdcConfig = TdcConfig(),
    detector_id: str = "D",
) -> list:
    """Turn photon arrivals into click records for one detector.

    ``arrivals`` is an iterable of (trial_id, time_ps, survived); photons
    that survived the channel click with the detector efficiency, dark
    counts arrive Poisson(dark_rate * duration) uniformly over the span,
    dead-time filtering runs on the merged stream, and surviving clicks
    are TDC-quantized.  Deterministic per seed.
    """
    rng = Generator(Philox(SeedSequence(seed, spawn_key=(7,))))
    rows = [(int(tr), float(t), bool(s)) for tr, t, s in arrivals]
    if any(rows[i][1] > rows[i + 1][1] for i in range(len(rows) - 1)):
        raise ValueError("arrivals must be sorted by time")

    times, trials = [], []
    for trial, t, survived in rows:
        if survived and rng.random() < cfg.efficiency:
            times.append(t)
            trials.append(trial)

    n_dark = rng.poisson(cfg.dark_rate_hz * duration_ps * 1e-12)
    dark_times = np.sort(rng.uniform(0.0, duration_ps, size=n_dark))
    times = np.concatenate([np.asarray(times, dtype=float), dark_times])
    trials = np.concatenate(
        [np.asarray(trials, dtype=int), np.full(n_dark, -1, dtype=int)]
    )
    order = np.argsort(times, kind="stable")
    times, trials = times[order], trials[order]

    if cfg.jitter_sigma_ps > 0:
        times = times + rng.normal(0.0, cfg.jitter_sigma_ps, size=times.size)
        order = np.argsort(times, kind="stable")
        times, trials = times[order], trials[order]

    kept_times = apply_dead_time(times, cfg.dead_time_ps)
    # map surviving (sorted, unique-enough) times back to their trials
    kept = []
    j = 0
    for t in kept_times:
        while times[j] != t:
            j += 1
        kept.append((t, trials[j]))
        j += 1
    return [
        ClickRecord(
            detector_id=detector_id,
            time_ps=float(tdc_quantize(t, tdc)),
            trial_id=int(tr),
        )
        for t, tr in kept
    ]


def count_coincidences(streams: dict, window: CoincidenceWindow, order: int = 2) -> dict:
    """Greedy earliest-match coincidence counting over click streams.

    ``streams`` maps detector id to a sorted array of TDC-quantized times.
    For every combination of ``order`` distinct detectors, time-sorted
    candidate tuples are accepted when all pairwise spreads match the
    window's allowed bin offsets; accepted clicks are consumed (each click
    used at most once per detector combination).  Returns
    {detector-combination: {bin_offset: count}} where the offset key is
    the largest pairwise bin separation of the tuple.
    """
    if order not in (2, 4):
        raise ValueError("coincidence order must be 2 or 4")
    from itertools import combinations

    result = {}
    dets = sorted(streams)
    for combo in combinations(dets, order):
        arrays = [np.sort(np.asarray(streams[d], dtype=float)) for d in combo]
        counts = _greedy_match(arrays, window)
        if counts:
            result[",".join(combo)] = counts
    return result


def _greedy_match(arrays, window: CoincidenceWindow) -> dict:
    idx = [0] * len(arrays)
    counts = {}
    while all(idx[i] < len(arrays[i]) for i in range(len(arrays))):
        times = [arrays[i][idx[i]] for i in range(len(arrays))]
        spread_ok = all(
            window.matches(times[i] - times[j])
            for i in range(len(times))
            for j in range(i + 1, len(times))
        )
        if spread_ok:
            max_spread = max(times) - min(times)
            offset = int(round(max_spread / window.bin_separation_ps))
            counts[offset] = counts.get(offset, 0) + 1
            for i in range(len(arrays)):
                idx[i] += 1
        else:
            # Greedy: drop the earliest candidate and move on.  Later
            # clicks only move away from it, so it rarely belongs to any
            # future tuple; pathological multi-offset overlaps may be
            # skipped, which is the accepted cost of the greedy rule.
            earliest = int(np.argmin(times))
            idx[earliest] += 1
    return counts


# ---------------------------------------------------------------------------
# Interchange formats
# ---------------------------------------------------------------------------

def write_clicks_csv(records, path, header_comment: str = "") -> None:
    """Click stream export: trial_id, detector_id, time_ps."""
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("trial_id,detector_id,time_ps\n")
        for r in records:
            fh.write(f"{r.trial_id},{r.detector_id},{r.time_ps:.0f}\n")


def read_clicks_csv(path) -> list:
    out = []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line
                continue
            trial, det, t = line.split(",")
            out.append(ClickRecord(detector_id=det, time_ps=float(t), trial_id=int(trial)))
    return out


def write_coincidence_json(table: dict, path, meta: dict | None = None) -> None:
    """Coincidence table export, JSON keyed by detector tuple."""
    payload = {"meta": meta or {}}
    payload["coincidences"] = {
        combo: {str(off): int(cnt) for off, cnt in offsets.items()}
        for combo, offsets in table.items()
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
