"""Reduced-statistics invariant suite behind the ``selftest`` verb.

Each check re-derives its expectation independently of the code path it
exercises (small brute-force expansions, literal formulas, closed-loop
reruns) so that an injected defect in any module trips at least one line.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from . import engine, optics, timebin
from .analysis import FringeData, FringeFit, entanglement_verdict, fit_fringe
from .channel import PRESETS, WeatherPreset, generate_drift
from .config import ScenarioConfig, SourceConfig, scenario_from_dict
from .detection import TdcConfig, apply_dead_time, tdc_quantize
from .stabilization import DelayController, ErrorEstimate, control_step, run_delay_loop


def _brute_psi_minus_total(n: int, theta: float = 0.41) -> float:
    """Independent expansion of the two-source product state."""
    amp = {}
    for k in range(n):
        for l in range(n):
            amp[(k, l)] = np.exp(2j * (k + l) * theta) / n
    total = 0.0
    for k in range(n - 1):
        acc = {}
        for (ks, ls), a in amp.items():
            if (ks, ls) == (k, k + 1):
                acc[(ks, ls)] = acc.get((ks, ls), 0) + a / math.sqrt(2)
            elif (ks, ls) == (k + 1, k):
                acc[(ks, ls)] = acc.get((ks, ls), 0) - a / math.sqrt(2)
        total += sum(abs(v) ** 2 for v in acc.values())
    return total


def _tiny_scenario(seed: int = 7) -> ScenarioConfig:
    return scenario_from_dict(
        {
            "mode": "swap",
            "sources": {
                "alice": {"n_bins": 2, "emission": "single", "mu": 0.0},
                "bob": {"n_bins": 2, "emission": "single", "mu": 0.0},
            },
            "links": {
                p: {} for p in ("alice_signal", "bob_signal", "alice_idler", "bob_idler")
            },
            "detectors": {"efficiency": 1.0, "dark_rate_hz": 0.0},
            "weather": "calm",
            "polarization": {"enabled": False, "drift_rate": 0.0},
            "sweep": {
                "kind": "phase",
                "parameter": "alice",
                "values": [0.8],
                "fixed_phase_rad": 0.2,
                "seconds_per_point": 2e4 * 2 / 1e9,
            },
            "seed": seed,
        },
        name_hint="selftest-tiny",
    )


def run_selftest(verbose_print=print) -> list:
    """Run every check; returns [(name, ok, detail)]."""
    checks = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok), detail))
        verbose_print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))

    # herald law against the brute-force expansion
    for n in (2, 3, 8):
        phase = timebin.PhaseConfig.from_theta(0.41)
        joint = timebin.JointState(
            timebin.build_pair_state(n, phase), timebin.build_pair_state(n, phase)
        )
        comps = timebin.bell_decompose(joint)
        analytic = sum(
            c.probability() for c in comps if c.kind is timebin.BellKind.PSI_MINUS
        )
        brute = _brute_psi_minus_total(n)
        check(
            f"herald law n={n}",
            abs(analytic - brute) < 1e-12 and abs(analytic - (n - 1) / n**2) < 1e-12,
            f"analytic={analytic:.6f} brute={brute:.6f}",
        )

    # multi-pair visibility law against the literal formula
    mu = 0.023
    got = engine.visibility_degradation(mu)
    check("multi-pair visibility law", abs(got - 1.0 / (1.0 + 2.0 * mu)) < 1e-12,
          f"V_d({mu})={got:.6f}")

    # temporal overlap endpoints
    check(
        "overlap endpoints",
        optics.hom_overlap(0.0, 110.0) == 1.0
        and abs(optics.hom_overlap(110.0, 110.0) - 0.0625) < 1e-12,
        "hom(0)=1, hom(FWHM)=1/16",
    )

    # fringe depends on the analyzer-phase sum only
    state = timebin.build_pair_state(4, timebin.PhaseConfig.from_theta(0.7), 0.9)
    a = [timebin.franson_coincidence_prob(state, x, 0.3) for x in np.linspace(0, 6, 13)]
    b = [timebin.franson_coincidence_prob(state, 0.3, x) for x in np.linspace(0, 6, 13)]
    check("fringe symmetry", np.allclose(a, b, atol=1e-12), "sweep either analyzer")

    # four-fold visibility equals the product of source factors
    phase = timebin.PhaseConfig.from_theta(0.5)
    joint = timebin.JointState(
        timebin.build_pair_state(4, phase, 0.898), timebin.build_pair_state(4, phase, 0.829)
    )
    comp = next(
        c for c in timebin.bell_decompose(joint) if c.kind is timebin.BellKind.PSI_MINUS
    )
    sw = timebin.swapped_state(comp)
    p0 = timebin.fourfold_fringe_prob(sw, 0.0, 0.0)
    pq = timebin.fourfold_fringe_prob(sw, math.pi / 2.0, 0.0)
    pp = timebin.fourfold_fringe_prob(sw, math.pi, 0.0)
    mid = (p0 + pp) / 2.0
    vis = math.hypot(p0 - mid, pq - mid) / mid
    check("four-fold visibility product", abs(vis - 0.898 * 0.829) < 1e-9,
          f"V={vis:.6f}")

    # click distributions are normalized and hit the classical limit
    dist = optics.bsm_click_distribution(comp, 0.0, 1.0)
    total = sum(p for _, p in dist)
    diff = sum(
        p for pat, p in dist if len({c.detector for c in pat.clicks}) == 2
    )
    check("distinguishable BSM limit", abs(total - 1) < 1e-12 and abs(diff - 0.5) < 1e-12,
          "random routing at xi=0")

    # herald decision rules
    from .optics import Click, ClickPattern, OutcomeKind, herald_decision

    pat = lambda spec: ClickPattern(tuple(Click(d, b, b * 1000.0) for d, b in spec))
    ok = (
        herald_decision(pat([(1, 0), (2, 1)]), 40000.0).kind is OutcomeKind.HERALD_PSI_MINUS
        and herald_decision(pat([(1, 0), (1, 1)]), 40000.0).kind is OutcomeKind.NO_HERALD
        and herald_decision(pat([(1, 0), (1, 1)]), 500.0).kind is OutcomeKind.WOULD_BE_PSI_PLUS
    )
    check("herald decision rules", ok, "dead-time discrimination")

    # dead-time filtering is idempotent
    rng = np.random.default_rng(3)
    times = np.sort(rng.uniform(0, 1e6, 500))
    once = apply_dead_time(times, 4000.0)
    twice = apply_dead_time(once, 4000.0)
    check("dead-time idempotence", np.array_equal(once, twice), f"{len(once)} clicks")

    # TDC floor rule
    q = tdc_quantize([1003.0, 1000.0], TdcConfig(resolution_ps=4.0))
    check("tdc floor", list(q) == [1000.0, 1000.0], "floor to 4 ps grid")

    # drift determinism and preset ordering
    t1 = generate_drift(PRESETS["sunny"], 86400.0, 60.0, seed=11)
    t2 = generate_drift(PRESETS["sunny"], 86400.0, 60.0, seed=11)
    spans = {
        label: float(np.ptp(generate_drift(PRESETS[label], 86400.0, 60.0, 11).delays_ps))
        for label in ("rainy", "cloudy", "sunny")
    }
    check(
        "drift determinism + ordering",
        np.array_equal(t1.delays_ps, t2.delays_ps)
        and spans["sunny"] > spans["cloudy"] > spans["rainy"],
        f"ptp={spans}",
    )

    # controller fixed point and a quick closed loop
    ctrl = DelayController()
    same = control_step(ctrl, ErrorEstimate(0.0, 1.0, 100))
    trace = generate_drift(PRESETS["sunny"], 6 * 3600.0, 10.0, seed=5)
    log = run_delay_loop(trace, ctrl, seed=5)
    sigma = float(np.std(log.residual_ps[60:], ddof=1))
    check(
        "delay loop",
        same.current_compensation_ps == 0.0 and sigma <= 7.0,
        f"6h sunny residual sigma={sigma:.2f} ps",
    )

    # fringe fit recovers a noiseless sinusoid
    xs = np.linspace(0.0, 1.0, 16)
    ys = 400.0 * (1.0 + 0.9 * np.sin(2 * math.pi * (xs - 0.1) / 0.5))
    fit = fit_fringe(FringeData.from_arrays(xs, ys, np.ones_like(xs)), period_hint=0.5)
    check("fringe fit recovery", abs(fit.v - 0.9) < 1e-6, f"V={fit.v:.7f}")

    # verdict rule at the boundary
    v1 = entanglement_verdict(FringeFit(0.732, 0.056, 1, 0, 1, 1.0))
    v2 = entanglement_verdict(FringeFit(1 / 3, 0.0, 1, 0, 1, 1.0))
    check("entanglement verdict", v1.entangled and not v2.entangled, "3-sigma rule")

    # rate budget product identity
    cfg = _tiny_scenario()
    budget = engine.rate_budget(cfg)
    check(
        "budget product identity",
        abs(budget.product() - budget.fourfold_cc_per_s) < 1e-12 * max(budget.product(), 1),
        f"fourfold={budget.fourfold_cc_per_h:.3f}/h",
    )

    # quick Monte Carlo herald fraction at n=2
    summary = engine.run_scenario(cfg)
    frames = summary.points[0].frames
    heralds = summary.points[0].heralds_psi_minus
    p = 0.25
    sigma3 = 4.0 * math.sqrt(p * (1 - p) / frames)
    check(
        "mc herald fraction n=2",
        abs(heralds / frames - p) < sigma3,
        f"{heralds}/{frames}",
    )

    # determinism of a scenario rerun
    again = engine.run_scenario(_tiny_scenario())
    check(
        "scenario determinism",
        again.points[0].fourfold_cc == summary.points[0].fourfold_cc
        and again.points[0].heralds_psi_minus == summary.points[0].heralds_psi_minus,
        "same seed, same tables",
    )
    return checks
