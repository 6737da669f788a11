"""End-to-end Monte Carlo of the entanglement-swapping experiment.

Frames of n time bins are statistically independent trials.  Pair
emission is Poissonian per bin; frames in which both sources emitted a
single pair propagate exact amplitudes through the state algebra
(timebin) and the beam-splitter/analyzer machinery (optics).  Multi-pair
frames are handled statistically: they feed an accidental-herald channel
whose idler outcomes carry no phase correlation, at a rate of
(mu_1 + mu_2) relative to the clean channel, which reproduces the
multi-pair visibility law V_d = 1/(1 + 2 mu) for equal sources.

Sampling is event-driven: per block of frames the engine draws how many
frames produced a BSM-capable coincidence (a Binomial thinning with the
click probabilities of both signal paths) and only those events are
materialized, so zero-pair and lost-photon frames cost nothing.  Every
block owns a counter-based RNG stream derived from the master seed, which
makes results bitwise independent of the worker count.

Scope notes: detector dead time acts within a frame (it is what blinds
the BSM to Psi+); inter-frame pile-up and dark-count contributions to
heralds are not modeled (both are far below the statistical resolution of
any scenario here); dark counts do enter the two-fold accidental channel.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from . import optics
from .channel import generate_drift, polarization_drift, survival_probability
from .config import ScenarioConfig, SourceConfig, sigma_theta_rad
from .errors import ConfigError
from .stabilization import (
    DelayController,
    LoopLog,
    PolarizationController,
    polarization_step,
    run_delay_loop,
)
from .timebin import BellKind, PhaseConfig, bell_decompose, build_pair_state, JointState

#: Fixed number of RNG partitions per sweep point (independent of workers).
N_BLOCKS = 64

_FOURFOLD_KEYS = ("A0,B0", "A0,B1", "A1,B0", "A1,B1")
_TWOFOLD_KEYS = ("C0,A0", "C0,A1", "C1,A0", "C1,A1")


def visibility_degradation(mu: float) -> float:
    """Multi-pair visibility bound V_d = 1/(1 + 2 mu)."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    return 1.0 / (1.0 + 2.0 * mu)


def sample_phase_noise(cfg: SourceConfig, seed: int, size: int | None = None):
    """Per-frame pump-phase offsets, Gaussian with sigma from the
    wavelength stability (unscaled; the engine applies the calibration
    scale).  Deterministic per seed."""
    sigma = sigma_theta_rad(cfg)
    rng = Generator(Philox(SeedSequence(seed, spawn_key=(5,))))
    if size is None:
        return float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0
    if sigma == 0.0:
        return np.zeros(size)
    return rng.normal(0.0, sigma, size=size)


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------

@dataclass
class PointSummary:
    control_value: float
    dial_rad: float
    duration_s: float
    frames: int
    heralds_psi_minus: int = 0
    heralds_accidental: int = 0
    would_be_psi_plus: int = 0
    unheraldable: int = 0
    fourfold_candidates: int = 0
    fourfold_cc: dict = field(default_factory=lambda: {k: 0 for k in _FOURFOLD_KEYS})
    fourfold_noncentral: int = 0
    twofold_cc: dict = field(default_factory=lambda: {k: 0 for k in _TWOFOLD_KEYS})
    twofold_noncentral: int = 0
    spool_rows: list = field(default_factory=list)   # (trial_id, detector, time_ps)

    def merge(self, other: "PointSummary") -> None:
        self.heralds_psi_minus += other.heralds_psi_minus
        self.heralds_accidental += other.heralds_accidental
        self.would_be_psi_plus += other.would_be_psi_plus
        self.unheraldable += other.unheraldable
        self.fourfold_candidates += other.fourfold_candidates
        self.fourfold_noncentral += other.fourfold_noncentral
        self.twofold_noncentral += other.twofold_noncentral
        for k, v in other.fourfold_cc.items():
            self.fourfold_cc[k] += v
        for k, v in other.twofold_cc.items():
            self.twofold_cc[k] += v


@dataclass
class RunSummary:
    scenario: str
    mode: str
    config_hash: str
    seed: int
    points: list

    @property
    def total_duration_s(self) -> float:
        return sum(p.duration_s for p in self.points)

    def rates(self) -> dict:
        t = self.total_duration_s
        heralds = sum(p.heralds_psi_minus for p in self.points)
        folds = sum(sum(p.fourfold_cc.values()) for p in self.points)
        two = sum(sum(p.twofold_cc.values()) for p in self.points)
        return {
            "herald_per_s": heralds / t if t else 0.0,
            "fourfold_cc_per_s": folds / t if t else 0.0,
            "fourfold_cc_per_h": 3600.0 * folds / t if t else 0.0,
            "twofold_cc_per_s": two / t if t else 0.0,
        }

    def to_dict(self) -> dict:
        return {
            "meta": {
                "scenario": self.scenario,
                "mode": self.mode,
                "config_hash": self.config_hash,
                "seed": self.seed,
            },
            "rates": self.rates(),
            "points": [
                {
                    "control_value": p.control_value,
                    "dial_rad": p.dial_rad,
                    "duration_s": p.duration_s,
                    "frames": p.frames,
                    "heralds_psi_minus": p.heralds_psi_minus,
                    "heralds_accidental": p.heralds_accidental,
                    "would_be_psi_plus": p.would_be_psi_plus,
                    "unheraldable": p.unheraldable,
                    "fourfold_candidates": p.fourfold_candidates,
                    "fourfold_cc": dict(p.fourfold_cc),
                    "fourfold_noncentral": p.fourfold_noncentral,
                    "twofold_cc": dict(p.twofold_cc),
                    "twofold_noncentral": p.twofold_noncentral,
                }
                for p in self.points
            ],
        }


# ---------------------------------------------------------------------------
# Shared per-run environment (drift, stabilization, polarization)
# ---------------------------------------------------------------------------

@dataclass
class _Environment:
    loop: LoopLog | None
    pol_overlap: object | None     # OverlapTrace or None
    coherence_ps: float

    def hom_at(self, t_s) -> np.ndarray:
        if self.loop is None:
            return np.ones(np.shape(np.atleast_1d(t_s)))
        res = self.loop.residual_at(t_s)
        sigma = self.coherence_ps / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return np.exp(-(res**2) / (2.0 * sigma**2))

    def pol_at(self, t_s) -> np.ndarray:
        if self.pol_overlap is None:
            return np.ones(np.shape(np.atleast_1d(t_s)))
        return self.pol_overlap.overlap_at(t_s)

    def xi_at(self, t_s) -> np.ndarray:
        return self.hom_at(t_s) * self.pol_at(t_s)


def _prepare_environment(cfg: ScenarioConfig) -> _Environment:
    duration = len(cfg.sweep.values) * cfg.sweep.seconds_per_point
    loop = None
    if cfg.mode == "swap" and cfg.weather.peak_to_peak_ps > 0:
        dt = min(10.0, max(cfg.stabilization.update_period_s / 4.0, 1.0))
        trace = generate_drift(cfg.weather, duration + dt, dt, cfg.seed)
        ctrl = DelayController(
            gain=cfg.stabilization.gain,
            update_period_s=cfg.stabilization.update_period_s,
            actuator_range_ps=cfg.stabilization.actuator_range_ps,
            actuator_resolution_ps=cfg.stabilization.actuator_resolution_ps,
        )
        loop = run_delay_loop(
            trace,
            ctrl,
            n_events_per_estimate=cfg.stabilization.events_per_estimate,
            tdc_resolution_ps=cfg.tdc.resolution_ps,
            seed=cfg.seed,
            enabled=cfg.stabilization.enabled,
        )
    pol = None
    if cfg.mode == "swap" and cfg.polarization.drift_rate > 0:
        trace = polarization_drift(duration + 10.0, cfg.polarization.drift_rate, cfg.seed)
        pol = polarization_step(
            trace,
            PolarizationController(
                gain=cfg.polarization.gain,
                update_period_s=cfg.polarization.update_period_s,
                enabled=cfg.polarization.enabled,
            ),
        )
    return _Environment(loop=loop, pol_overlap=pol, coherence_ps=cfg.coherence_time_ps)


# ---------------------------------------------------------------------------
# Click probabilities per photon path
# ---------------------------------------------------------------------------

def path_click_probability(cfg: ScenarioConfig, path: str) -> float:
    """Survival x insertion x detector efficiency for one photon path."""
    extra = float(cfg.extra_db.get(path, 0.0))
    return survival_probability(cfg.links[path], extra) * cfg.detectors.efficiency


def _decomposition_classes(cfg: ScenarioConfig):
    """Class weights and representative components from the ideal state."""
    phase = PhaseConfig.from_theta(cfg.theta_per_bin_rad, cfg.alice.tau_s)
    s1 = build_pair_state(cfg.n_bins, phase, 1.0)
    s2 = build_pair_state(cfg.n_bins, phase, 1.0)
    comps = bell_decompose(JointState(s1, s2))
    weights = {}
    rep = {}
    for c in comps:
        weights[c.kind] = weights.get(c.kind, 0.0) + c.probability()
        rep.setdefault(c.kind, c)
    return weights, rep


def _outcome_probs(component, hom: float, pol: float, dead_time_ps: float,
                   tau_ps: float) -> dict:
    """Outcome-kind probabilities of one Bell class at given overlap."""
    out = {}
    for pattern, p in optics.bsm_click_distribution(component, hom, pol, tau_ps):
        kind = optics.herald_decision(pattern, dead_time_ps).kind
        out[kind] = out.get(kind, 0.0) + p
    total = sum(out.values())
    return {k: v / total for k, v in out.items()}


# ---------------------------------------------------------------------------
# Per-point simulation
# ---------------------------------------------------------------------------

def _block_sizes(total: int, n_blocks: int) -> list:
    base = total // n_blocks
    sizes = [base] * n_blocks
    for i in range(total - base * n_blocks):
        sizes[i] += 1
    return [s for s in sizes if s > 0] or [0]


def _run_point_swap(
    cfg: ScenarioConfig, env: _Environment, point_idx: int, spool_max_rows: int = 0
) -> PointSummary:
    sweep = cfg.sweep
    control = float(sweep.values[point_idx])
    dial = sweep.dial_values()[point_idx]
    if sweep.parameter == "alice":
        dial_a, dial_b = dial, sweep.fixed_phase_rad
    else:
        dial_a, dial_b = sweep.fixed_phase_rad, dial

    frames_total = int(round(sweep.seconds_per_point * cfg.frame_rate_hz))
    point = PointSummary(
        control_value=control, dial_rad=dial,
        duration_s=sweep.seconds_per_point, frames=frames_total,
    )
    t0 = point_idx * sweep.seconds_per_point

    p1 = cfg.alice.p_single_pair_frame() * cfg.bob.p_single_pair_frame()
    eta_sig = path_click_probability(cfg, "alice_signal") * path_click_probability(
        cfg, "bob_signal"
    )
    eta_idl = path_click_probability(cfg, "alice_idler") * path_click_probability(
        cfg, "bob_idler"
    )
    p_cand = p1 * eta_sig
    mu_sum = cfg.alice.mu + cfg.bob.mu
    p_acc = mu_sum * p_cand if (
        cfg.channels.multi_pair and cfg.alice.emission == "poisson"
    ) else 0.0

    weights, rep = _decomposition_classes(cfg)
    kinds = sorted(weights, key=lambda k: k.value)
    class_p = np.array([weights[k] for k in kinds])
    # guard against rounding: multinomial needs an exact simplex
    class_p = class_p / class_p.sum()

    v_product = cfg.alice.visibility * cfg.bob.visibility
    phase_noise_on = cfg.channels.phase_noise
    scale = cfg.channels.phase_noise_scale
    sig_a = sigma_theta_rad(cfg.alice)
    sig_b = sigma_theta_rad(cfg.bob)
    dead = cfg.detectors.dead_time_ps
    tau_ps = cfg.tau_ps

    block_frames = _block_sizes(frames_total, N_BLOCKS)
    frame_cursor = 0
    for block_idx, bsize in enumerate(block_frames):
        if bsize == 0:
            continue
        rng = Generator(
            Philox(SeedSequence(cfg.seed, spawn_key=(16 + point_idx, block_idx)))
        )
        t_mid = t0 + (frame_cursor + bsize / 2.0) / cfg.frame_rate_hz
        frame_cursor += bsize
        hom = float(env.hom_at(t_mid)[0])
        pol = float(env.pol_at(t_mid)[0])

        n_clean = int(rng.binomial(bsize, p_cand)) if p_cand > 0 else 0
        n_acc = int(rng.binomial(bsize, p_acc)) if p_acc > 0 else 0

        herald_anti = herald_sym = 0
        acc_heralds = 0
        for label, n_events in (("clean", n_clean), ("acc", n_acc)):
            if n_events == 0:
                continue
            split = rng.multinomial(n_events, class_p)
            for kind, count in zip(kinds, split):
                if count == 0:
                    continue
                probs = _outcome_probs(rep[kind], hom, pol, dead, tau_ps)
                outs = list(probs)
                draw = rng.multinomial(count, np.array([probs[o] for o in outs]))
                for out_kind, c in zip(outs, draw):
                    c = int(c)
                    if out_kind is optics.OutcomeKind.HERALD_PSI_MINUS:
                        if label == "acc":
                            acc_heralds += c
                        elif kind is BellKind.PSI_MINUS:
                            herald_anti += c
                        else:
                            herald_sym += c
                    elif out_kind is optics.OutcomeKind.WOULD_BE_PSI_PLUS:
                        point.would_be_psi_plus += c
                    elif out_kind is optics.OutcomeKind.UNHERALDABLE:
                        point.unheraldable += c

        point.heralds_psi_minus += herald_anti + herald_sym + acc_heralds
        point.heralds_accidental += acc_heralds

        # only heralds whose idlers both click are materialized
        n4_anti = int(rng.binomial(herald_anti, eta_idl)) if herald_anti else 0
        n4_sym = int(rng.binomial(herald_sym, eta_idl)) if herald_sym else 0
        n4_acc = int(rng.binomial(acc_heralds, eta_idl)) if acc_heralds else 0
        m = n4_anti + n4_sym + n4_acc
        if m == 0:
            continue
        point.fourfold_candidates += m

        antisym = np.concatenate([
            np.ones(n4_anti, dtype=bool),
            np.zeros(n4_sym, dtype=bool),
            np.ones(n4_acc, dtype=bool),
        ])
        dphi = np.zeros(m)
        n_clean4 = n4_anti + n4_sym
        if n_clean4:
            coherent = rng.random(n_clean4) < v_product
            if phase_noise_on:
                dphi[:n_clean4] = 2.0 * scale * (
                    rng.normal(0.0, sig_b, n_clean4) - rng.normal(0.0, sig_a, n_clean4)
                )
            dphi[:n_clean4] = np.where(
                coherent, dphi[:n_clean4], rng.uniform(0.0, 2.0 * math.pi, n_clean4)
            )
        if n4_acc:
            dphi[n_clean4:] = rng.uniform(0.0, 2.0 * math.pi, n4_acc)

        arg = dial_a + dial_b + dphi
        probs = optics.heralded_port_pair_probs(arg, antisym)   # (m, 4)
        cum = np.cumsum(probs, axis=1)
        u = rng.random(m)
        cell = np.sum(u[:, None] > cum, axis=1)                 # 0..3 cc, 4 other
        for idx, key in enumerate(_FOURFOLD_KEYS):
            point.fourfold_cc[key] += int(np.sum(cell == idx))
        point.fourfold_noncentral += int(np.sum(cell == 4))

        # Optional raw-click spool of the materialized events.  Drawn after
        # every count draw of the block, so enabling it never changes the
        # count tables for a given seed.
        if spool_max_rows and len(point.spool_rows) < spool_max_rows:
            take = min(m, spool_max_rows - len(point.spool_rows))
            res = cfg.tdc.resolution_ps
            frames_in_pt = rng.integers(0, max(bsize, 1), size=take) + (
                frame_cursor - bsize
            )
            ks = rng.integers(0, max(cfg.n_bins - 1, 1), size=take)
            flip = rng.random(take) < 0.5
            base_ps = (
                point_idx * frames_total + frames_in_pt
            ).astype(float) * (1e12 / cfg.frame_rate_hz)
            for i in range(take):
                trial = int(point_idx * frames_total + frames_in_pt[i])
                t_early = math.floor((base_ps[i] + ks[i] * tau_ps) / res) * res
                t_late = math.floor((base_ps[i] + (ks[i] + 1) * tau_ps) / res) * res
                d_early, d_late = ("D1", "D2") if flip[i] else ("D2", "D1")
                point.spool_rows.append((trial, d_early, t_early))
                point.spool_rows.append((trial, d_late, t_late))
                if cell[i] < 4:
                    p1, p2 = divmod(int(cell[i]), 2)
                    point.spool_rows.append((trial, f"A{p1}", t_late))
                    point.spool_rows.append((trial, f"B{p2}", t_late))
    return point


def _run_point_source(cfg: ScenarioConfig, env: _Environment, point_idx: int) -> PointSummary:
    sweep = cfg.sweep
    src = cfg.alice if cfg.which_source == "alice" else cfg.bob
    sig_path, idl_path = (
        ("alice_signal", "alice_idler")
        if cfg.which_source == "alice"
        else ("bob_signal", "bob_idler")
    )
    control = float(sweep.values[point_idx])
    dial = sweep.dial_values()[point_idx]
    dial_i, dial_s = dial, sweep.fixed_phase_rad   # idler analyzer is swept

    frames_total = int(round(sweep.seconds_per_point * cfg.frame_rate_hz))
    point = PointSummary(
        control_value=control, dial_rad=dial,
        duration_s=sweep.seconds_per_point, frames=frames_total,
    )

    p_ev = (
        src.p_single_pair_frame()
        * path_click_probability(cfg, sig_path)
        * path_click_probability(cfg, idl_path)
    )
    p_acc = (
        2.0 * src.mu * p_ev
        if (cfg.channels.multi_pair and src.emission == "poisson")
        else 0.0
    )

    # Harmonic decomposition of the central-slot class table in the summed
    # analyzer phase, taken from the full interferometer machinery.
    phase = PhaseConfig.from_theta(cfg.theta_per_bin_rad, src.tau_s)
    state = build_pair_state(cfg.n_bins, phase, 1.0)
    tables = [
        optics.central_slot_table(state, dial_s + u, dial_i)
        for u in (0.0, math.pi / 2.0, math.pi)
    ]
    class_keys = [(0, 0), (0, 1), (1, 0), (1, 1), "other"]
    g0 = np.array([tables[0][k] for k in class_keys])
    g1 = np.array([tables[1][k] for k in class_keys])
    g2 = np.array([tables[2][k] for k in class_keys])
    alpha = (g0 + g2) / 2.0
    ccos = (g0 - g2) / 2.0
    csin = alpha - g1

    def class_probs(u: np.ndarray) -> np.ndarray:
        return (
            alpha[None, :]
            + ccos[None, :] * np.cos(u)[:, None]
            - csin[None, :] * np.sin(u)[:, None]
        )

    scale = cfg.channels.phase_noise_scale
    sigma = sigma_theta_rad(src)
    phase_noise_on = cfg.channels.phase_noise and sigma > 0

    counts = np.zeros(len(class_keys), dtype=np.int64)
    block_frames = _block_sizes(frames_total, N_BLOCKS)
    for block_idx, bsize in enumerate(block_frames):
        if bsize == 0:
            continue
        rng = Generator(
            Philox(SeedSequence(cfg.seed, spawn_key=(16 + point_idx, block_idx)))
        )
        n_ev = int(rng.binomial(bsize, p_ev)) if p_ev > 0 else 0
        n_acc = int(rng.binomial(bsize, p_acc)) if p_acc > 0 else 0
        if n_ev == 0 and n_acc == 0:
            continue
        n_coh = int(rng.binomial(n_ev, src.visibility)) if n_ev else 0
        n_flat = (n_ev - n_coh) + n_acc

        if n_coh:
            if phase_noise_on:
                u = -2.0 * scale * rng.normal(0.0, sigma, n_coh)
                probs = class_probs(u)
                cum = np.cumsum(probs, axis=1)
                r = rng.random(n_coh)
                cls = np.sum(r[:, None] > cum, axis=1)
                cls = np.minimum(cls, len(class_keys) - 1)
                counts += np.bincount(cls, minlength=len(class_keys))
            else:
                counts += rng.multinomial(n_coh, g0 / g0.sum())
        if n_flat:
            counts += rng.multinomial(n_flat, alpha / alpha.sum())

    for idx, key in enumerate(_TWOFOLD_KEYS):
        counts_idx = class_keys.index((int(key[1]), int(key[4])))
        point.twofold_cc[key] += int(counts[counts_idx])
    point.twofold_noncentral += int(counts[-1])

    # dark-count accidental coincidences, flat across the sweep
    dark = cfg.detectors.dark_rate_hz
    if dark > 0:
        rngd = Generator(Philox(SeedSequence(cfg.seed, spawn_key=(8, point_idx))))
        r_sig = src.clock_rate_hz * src.mu * path_click_probability(cfg, sig_path) / 2.0
        r_idl = src.clock_rate_hz * src.mu * path_click_probability(cfg, idl_path) / 2.0
        window_s = cfg.coincidence_window_ps * 1e-12
        mean = (r_sig * dark + r_idl * dark + dark * dark) * window_s * sweep.seconds_per_point
        for key in _TWOFOLD_KEYS:
            point.twofold_cc[key] += int(rngd.poisson(mean))
    return point


def _point_task(args):
    cfg, env, point_idx, spool_max_rows = args
    if cfg.mode == "swap":
        return _run_point_swap(cfg, env, point_idx, spool_max_rows)
    return _run_point_source(cfg, env, point_idx)


def run_scenario(
    cfg: ScenarioConfig, workers: int = 1, spool_max_rows: int = 0
) -> RunSummary:
    """Run a scenario and accumulate per-sweep-point count tables.

    Deterministic for a fixed (config, seed): every (point, block)
    partition derives its own Philox stream from the master seed, and
    results are integer sums, so the summary is bitwise identical for any
    worker count.  ``spool_max_rows`` > 0 additionally materializes raw
    click rows (capped per point) for the detection CSV format.
    """
    if len(cfg.sweep.values) == 0:
        raise ConfigError("sweep has no points", "sweep.values")
    env = _prepare_environment(cfg)
    tasks = [(cfg, env, i, spool_max_rows) for i in range(len(cfg.sweep.values))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_point_task, tasks))
    else:
        points = [_point_task(t) for t in tasks]
    return RunSummary(
        scenario=cfg.name,
        mode=cfg.mode,
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
        points=points,
    )


def spooled_click_records(summary: RunSummary) -> list:
    """Flatten spooled rows into detection ClickRecord objects."""
    from .detection import ClickRecord

    records = []
    for p in summary.points:
        for trial, det, t in p.spool_rows:
            records.append(ClickRecord(detector_id=det, time_ps=float(t), trial_id=trial))
    records.sort(key=lambda r: (r.time_ps, r.detector_id))
    return records


# ---------------------------------------------------------------------------
# Analytic rate budget
# ---------------------------------------------------------------------------

@dataclass
class RateBudget:
    items: list                    # [(name, value, note)] multiplicative chain
    pairs_per_s: dict
    herald_per_s: float
    fourfold_cc_per_s: float
    fourfold_cc_per_h: float
    twofold_cc_per_s: float | None = None

    def product(self) -> float:
        out = 1.0
        for _, value, _ in self.items:
            out *= value
        return out

    def to_dict(self) -> dict:
        return {
            "line_items": [
                {"name": n, "value": v, "note": note} for n, v, note in self.items
            ],
            "pairs_per_s": self.pairs_per_s,
            "herald_per_s": self.herald_per_s,
            "fourfold_cc_per_s": self.fourfold_cc_per_s,
            "fourfold_cc_per_h": self.fourfold_cc_per_h,
            "twofold_cc_per_s": self.twofold_cc_per_s,
        }


def rate_budget(cfg: ScenarioConfig) -> RateBudget:
    """Closed-form expected rates with a per-stage breakdown.

    The four-fold line items form an exact product: frame rate, the
    probability that both sources emit exactly one pair, the Psi- herald
    law (n-1)/n^2, the four photon-path click probabilities, the
    energy-basis post-selection of the monitored analyzer port pair, and
    the multi-pair accidental multiplier.
    """
    n = cfg.n_bins
    p1a = cfg.alice.p_single_pair_frame()
    p1b = cfg.bob.p_single_pair_frame()
    herald_law = (n - 1) / n**2
    eta = {p: path_click_probability(cfg, p) for p in cfg.links}
    acc_mult = (
        1.0 + cfg.alice.mu + cfg.bob.mu
        if (cfg.channels.multi_pair and cfg.alice.emission == "poisson")
        else 1.0
    )

    items = [
        ("frame_rate_hz", cfg.frame_rate_hz, f"clock / n_bins (n={n})"),
        ("p_clean_frame", p1a * p1b, "both sources emit exactly one pair"),
        ("herald_law", herald_law, "(n-1)/n^2 Psi- weight of the ideal state"),
        ("alice_signal_click", eta["alice_signal"], "survival x insertion x detector"),
        ("bob_signal_click", eta["bob_signal"], "survival x insertion x detector"),
        ("alice_idler_click", eta["alice_idler"], "survival x insertion x detector"),
        ("bob_idler_click", eta["bob_idler"], "survival x insertion x detector"),
        ("energy_basis_postselection", 1.0 / 16.0,
         "both idlers in the central slot of the monitored port pair"),
        ("multipair_accidental_multiplier", acc_mult, "1 + mu_a + mu_b"),
    ]
    fourfold = 1.0
    for _, v, _ in items:
        fourfold *= v

    herald = (
        cfg.frame_rate_hz * p1a * p1b * herald_law
        * eta["alice_signal"] * eta["bob_signal"] * acc_mult
    )
    twofold = None
    if cfg.mode == "source":
        src = cfg.alice if cfg.which_source == "alice" else cfg.bob
        sig, idl = (
            ("alice_signal", "alice_idler")
            if cfg.which_source == "alice"
            else ("bob_signal", "bob_idler")
        )
        twofold = (
            cfg.frame_rate_hz
            * src.p_single_pair_frame()
            * eta[sig] * eta[idl]
            * (n - 1) / (8.0 * n)
        )

    return RateBudget(
        items=items,
        pairs_per_s={
            "alice": cfg.alice.clock_rate_hz * cfg.alice.mu,
            "bob": cfg.bob.clock_rate_hz * cfg.bob.mu,
        },
        herald_per_s=herald,
        fourfold_cc_per_s=fourfold,
        fourfold_cc_per_h=fourfold * 3600.0,
        twofold_cc_per_s=twofold,
    )


def write_summary_json(summary: RunSummary, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")
