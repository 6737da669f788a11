import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from swapsim import engine
from swapsim.analysis import FringeData, fit_fringe
from swapsim.config import (
    ScenarioConfig,
    SourceConfig,
    load_bundled_scenario,
    scenario_from_dict,
    sigma_theta_rad,
)
from swapsim.engine import (
    rate_budget,
    run_scenario,
    sample_phase_noise,
    visibility_degradation,
)


def make_scenario(**overrides):
    """Ideal lossless swap scenario, single forced pair per source."""
    base = {
        "mode": "swap",
        "sources": {
            "alice": {"n_bins": 2, "emission": "single", "mu": 0.0},
            "bob": {"n_bins": 2, "emission": "single", "mu": 0.0},
        },
        "links": {
            p: {} for p in ("alice_signal", "bob_signal", "alice_idler", "bob_idler")
        },
        "detectors": {"efficiency": 1.0, "dark_rate_hz": 0.0, "dead_time_ps": 40000.0},
        "weather": "calm",
        "stabilization": {"enabled": False},
        "polarization": {"enabled": False, "drift_rate": 0.0},
        "channels": {"multi_pair": False, "phase_noise": False},
        "sweep": {
            "kind": "phase",
            "parameter": "alice",
            "values": [0.8],
            "fixed_phase_rad": 0.2,
            "seconds_per_point": 1e5 * 2 / 1e9,
        },
        "seed": 101,
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            merged = dict(base[key])
            merged.update(value)
            base[key] = merged
        else:
            base[key] = value
    return scenario_from_dict(base, name_hint="test-scenario")


def frames_for(n_frames, n_bins, clock=1e9):
    return n_frames * n_bins / clock


class TestVisibilityDegradation:
    def test_zero_mu(self):
        assert visibility_degradation(0.0) == 1.0

    def test_paper_value(self):
        assert visibility_degradation(0.023) == pytest.approx(
            1.0 / (1.0 + 2.0 * 0.023), abs=1e-9
        )
        assert visibility_degradation(0.023) == pytest.approx(0.9560, abs=1e-4)

    def test_half(self):
        assert visibility_degradation(0.5) == pytest.approx(0.5, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            visibility_degradation(-0.1)


class TestSamplePhaseNoise:
    def test_zero_stability(self):
        src = SourceConfig(wavelength_stability_pm=0.0)
        assert sample_phase_noise(src, seed=1) == 0.0

    def test_sigma_matches_arithmetic(self):
        # sigma = 2 pi c dlambda tau / lambda^2 = 0.141 rad at field values
        src = SourceConfig()
        sigma = sigma_theta_rad(src)
        assert sigma == pytest.approx(0.141, abs=5e-4)
        draws = sample_phase_noise(src, seed=2, size=200_000)
        assert float(np.std(draws)) == pytest.approx(sigma, rel=0.02)

    def test_deterministic(self):
        src = SourceConfig()
        a = sample_phase_noise(src, seed=3, size=10)
        b = sample_phase_noise(src, seed=3, size=10)
        assert np.array_equal(a, b)


class TestHeraldLawMonteCarlo:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 8])
    def test_matches_law(self, n):
        cfg = make_scenario(
            sources={
                "alice": {"n_bins": n, "emission": "single", "mu": 0.0},
                "bob": {"n_bins": n, "emission": "single", "mu": 0.0},
            },
            sweep={
                "kind": "phase",
                "parameter": "alice",
                "values": [0.5],
                "fixed_phase_rad": 0.1,
                "seconds_per_point": frames_for(100_000, n),
            },
        )
        summary = run_scenario(cfg)
        point = summary.points[0]
        assert point.frames == 100_000
        p = (n - 1) / n**2
        if n == 1:
            assert point.heralds_psi_minus == 0
        else:
            sigma = math.sqrt(p * (1 - p) * point.frames)
            assert abs(point.heralds_psi_minus - p * point.frames) <= 3.0 * sigma


class TestOracleEquivalence:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_chi2_against_analytic(self, n):
        dial_a, dial_b = 0.9, 0.3
        cfg = make_scenario(
            sources={
                "alice": {"n_bins": n, "emission": "single", "mu": 0.0},
                "bob": {"n_bins": n, "emission": "single", "mu": 0.0},
            },
            sweep={
                "kind": "phase",
                "parameter": "alice",
                "values": [dial_a],
                "fixed_phase_rad": dial_b,
                "seconds_per_point": frames_for(100_000, n),
            },
            seed=37,
        )
        point = run_scenario(cfg).points[0]
        frames = point.frames
        p_herald = (n - 1) / n**2
        if n == 1:
            assert point.heralds_psi_minus == 0
            assert sum(point.fourfold_cc.values()) == 0
            return
        # herald count against the binomial law
        heralds = point.heralds_psi_minus
        sigma = math.sqrt(frames * p_herald * (1 - p_herald))
        assert abs(heralds - frames * p_herald) <= 4.0 * sigma
        # idler outcome cells, conditioned on the heralds, against the
        # analytic central-slot probabilities (4x (1 -+ cos)/16, rest 3/4)
        arg = dial_a + dial_b
        cells = {
            "A0,B0": (1 - math.cos(arg)) / 16.0,
            "A0,B1": (1 + math.cos(arg)) / 16.0,
            "A1,B0": (1 + math.cos(arg)) / 16.0,
            "A1,B1": (1 - math.cos(arg)) / 16.0,
        }
        observed = [point.fourfold_cc[k] for k in cells]
        observed.append(heralds - sum(observed))
        expected = [heralds * p for p in cells.values()]
        expected.append(heralds * 0.75)
        chi2, pval = stats.chisquare(observed, expected)
        assert pval > 0.01

    def test_franson_mode_against_analytic(self):
        # source-mode fringe frequencies vs the closed-form coincidence
        from swapsim.timebin import PhaseConfig, build_pair_state, franson_coincidence_prob

        n = 3
        cfg = make_scenario(
            mode="source",
            which_source="alice",
            sources={
                "alice": {"n_bins": n, "emission": "single", "mu": 0.0, "visibility": 1.0},
                "bob": {"n_bins": n, "emission": "single", "mu": 0.0},
            },
            sweep={
                "kind": "phase",
                "parameter": "alice",
                "values": [1.1],
                "fixed_phase_rad": 0.4,
                "seconds_per_point": frames_for(100_000, n),
            },
            seed=11,
        )
        point = run_scenario(cfg).points[0]
        state = build_pair_state(n, PhaseConfig.from_theta(cfg.theta_per_bin_rad))
        want = franson_coincidence_prob(state, 0.4, 1.1)
        got = point.twofold_cc["C0,A0"] / point.frames
        sigma = math.sqrt(want * (1 - want) / point.frames)
        assert abs(got - want) <= 3.0 * sigma


class TestDeterminism:
    def test_same_seed_bitwise(self):
        cfg = make_scenario(seed=55)
        a = run_scenario(cfg)
        b = run_scenario(cfg)
        assert a.to_dict() == b.to_dict()

    def test_worker_count_invariance(self):
        cfg = load_bundled_scenario("fig4_reduced")
        cfg = dataclasses.replace(
            cfg,
            sweep=dataclasses.replace(cfg.sweep, seconds_per_point=1.0),
        )
        one = run_scenario(cfg, workers=1)
        two = run_scenario(cfg, workers=2)
        three = run_scenario(cfg, workers=3)
        assert one.to_dict() == two.to_dict() == three.to_dict()

    def test_different_seed_differs(self):
        a = run_scenario(make_scenario(seed=1))
        b = run_scenario(make_scenario(seed=2))
        assert a.points[0].fourfold_cc != b.points[0].fourfold_cc


def fringe_visibility(summary, key="A0,B0"):
    data = FringeData.from_arrays(
        [p.control_value for p in summary.points],
        [p.fourfold_cc[key] for p in summary.points],
        [p.duration_s for p in summary.points],
    )
    fit = fit_fringe(data, period_hint=2 * math.pi)
    return fit


def phase_sweep(n_points=12, seconds=2.0):
    return {
        "kind": "phase",
        "parameter": "alice",
        "values": [2 * math.pi * i / n_points for i in range(n_points)],
        "fixed_phase_rad": 0.4,
        "seconds_per_point": seconds,
    }


def loss_scenario(**over):
    base = dict(
        sources={
            "alice": {"n_bins": 8, "mu": 0.023, "visibility": 1.0},
            "bob": {"n_bins": 8, "mu": 0.023, "visibility": 1.0},
        },
        links={
            "alice_signal": {"underground_db": 2.0},
            "bob_signal": {"underground_db": 2.0},
            "alice_idler": {"coiled_db": 2.0},
            "bob_idler": {"coiled_db": 2.0},
        },
        detectors={"efficiency": 0.55, "dark_rate_hz": 0.0, "dead_time_ps": 40000.0},
        sweep=phase_sweep(),
    )
    base.update(over)
    return make_scenario(**base)


class TestNoiseChannels:
    def test_accidental_channel_reproduces_vd(self):
        mu = 0.023
        cfg = loss_scenario(
            channels={"multi_pair": True, "phase_noise": False},
            sweep=phase_sweep(seconds=6.0),
            seed=5,
        )
        fit = fringe_visibility(run_scenario(cfg))
        expect = visibility_degradation(mu)
        assert abs(fit.v - expect) < 0.02

    def test_visibility_monotone_in_mu(self):
        vs = []
        for mu in (0.01, 0.05, 0.15):
            cfg = loss_scenario(
                sources={
                    "alice": {"n_bins": 8, "mu": mu, "visibility": 1.0},
                    "bob": {"n_bins": 8, "mu": mu, "visibility": 1.0},
                },
                channels={"multi_pair": True, "phase_noise": False},
                sweep=phase_sweep(seconds=4.0),
                seed=6,
            )
            vs.append(fringe_visibility(run_scenario(cfg)).v)
        assert vs[0] > vs[1] > vs[2]

    def test_phase_noise_penalty(self):
        cfg = loss_scenario(
            channels={"multi_pair": False, "phase_noise": True},
            sweep=phase_sweep(seconds=8.0),
            seed=7,
        )
        fit = fringe_visibility(run_scenario(cfg))
        scale = cfg.channels.phase_noise_scale
        sig = sigma_theta_rad(cfg.alice)
        expect = math.exp(-4.0 * (scale * sig) ** 2)
        assert abs(fit.v - expect) < 0.02

    def test_open_loop_drift_kills_visibility(self):
        cfg = loss_scenario(
            weather="sunny",
            stabilization={"enabled": False},
            sweep=phase_sweep(seconds=4.0),
            seed=8,
        )
        fit = fringe_visibility(run_scenario(cfg))
        assert fit.v < 0.15

    def test_closed_loop_restores_visibility(self):
        cfg = loss_scenario(
            weather="sunny",
            stabilization={"enabled": True},
            sweep=phase_sweep(seconds=4.0),
            seed=9,
        )
        fit = fringe_visibility(run_scenario(cfg))
        assert fit.v > 0.97

    def test_visibility_monotone_in_polarization(self):
        vs = []
        for rate in (0.0, 2e-4, 2e-3):
            cfg = loss_scenario(
                polarization={"enabled": False, "drift_rate": rate},
                sweep=phase_sweep(seconds=4.0),
                seed=10,
            )
            vs.append(fringe_visibility(run_scenario(cfg)).v)
        assert vs[0] > vs[1] > vs[2]


class TestSourceMode:
    @pytest.mark.parametrize("which,vis", [("alice", 0.898), ("bob", 0.829)])
    def test_fitted_visibility_matches_source(self, which, vis):
        cfg = load_bundled_scenario(f"fig3_{which}")
        summary = run_scenario(cfg)
        data = FringeData.from_arrays(
            [p.control_value for p in summary.points],
            [p.twofold_cc["C0,A0"] for p in summary.points],
            [p.duration_s for p in summary.points],
        )
        fit = fit_fringe(data, period_hint=0.5)
        assert abs(fit.v - vis) < 0.02


class TestRateBudget:
    def test_lossless_equals_analytic_ideal(self):
        cfg = make_scenario(
            sources={
                "alice": {"n_bins": 8, "mu": 0.023},
                "bob": {"n_bins": 8, "mu": 0.023},
            }
        )
        budget = rate_budget(cfg)
        n, mu = 8, 0.023
        p1 = n * mu * math.exp(-n * mu)
        expect = (1e9 / n) * p1**2 * (n - 1) / n**2 / 16.0
        assert budget.fourfold_cc_per_s == pytest.approx(expect, rel=1e-12)

    def test_product_identity(self):
        budget = rate_budget(load_bundled_scenario("rates_paper"))
        assert budget.product() == pytest.approx(budget.fourfold_cc_per_s, rel=1e-12)

    def test_db_scaling(self):
        cfg = load_bundled_scenario("rates_paper")
        reduced = dataclasses.replace(
            cfg,
            links={
                name: dataclasses.replace(
                    budget, underground_db=max(budget.underground_db - 3.0, 0.0)
                )
                for name, budget in cfg.links.items()
            },
        )
        # 3 dB off each of two signal paths only
        reduced = dataclasses.replace(
            reduced,
            links={
                **cfg.links,
                "alice_signal": dataclasses.replace(
                    cfg.links["alice_signal"],
                    underground_db=cfg.links["alice_signal"].underground_db - 3.0,
                ),
                "bob_signal": dataclasses.replace(
                    cfg.links["bob_signal"],
                    underground_db=cfg.links["bob_signal"].underground_db - 3.0,
                ),
            },
        )
        full = rate_budget(cfg).fourfold_cc_per_s
        assert rate_budget(reduced).fourfold_cc_per_s == pytest.approx(
            full * 10 ** 0.6, rel=1e-9
        )

    def test_paper_configuration_lands_near_three_per_hour(self):
        budget = rate_budget(load_bundled_scenario("rates_paper"))
        assert 1.0 <= budget.fourfold_cc_per_h <= 9.0


class TestSpool:
    def test_spooled_clicks_format(self, tmp_path):
        cfg = make_scenario(seed=77)
        summary = run_scenario(cfg, spool_max_rows=200)
        records = engine.spooled_click_records(summary)
        assert records
        assert all(r.time_ps % 4.0 == 0.0 for r in records)
        dets = {r.detector_id for r in records}
        assert {"D1", "D2"} <= dets
