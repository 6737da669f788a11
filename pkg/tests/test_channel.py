import math

import numpy as np
import pytest

from swapsim.channel import (
    CLOUDY,
    PRESETS,
    RAINY,
    SUNNY,
    DriftTrace,
    LinkBudget,
    WeatherPreset,
    generate_drift,
    polarization_drift,
    read_trace_csv,
    survival_probability,
    write_trace_csv,
)

DAY = 86400.0


class TestSurvivalProbability:
    def test_ten_db(self):
        assert survival_probability(LinkBudget(underground_db=10.0)) == pytest.approx(0.1)

    def test_alice_path(self):
        # 16 dB coiled + 6 dB deployed
        budget = LinkBudget(coiled_db=16.0, underground_db=6.0)
        assert survival_probability(budget) == pytest.approx(10 ** -2.2, rel=1e-12)
        assert survival_probability(budget) == pytest.approx(6.31e-3, rel=1e-3)

    def test_full_link(self):
        budget = LinkBudget(coiled_db=16.0, underground_db=12.0, aerial_db=1.0)
        assert survival_probability(budget) == pytest.approx(10 ** -2.9, rel=1e-12)
        assert survival_probability(budget) == pytest.approx(1.26e-3, rel=1e-2)

    def test_multiplicative_over_segments(self):
        a = LinkBudget(coiled_db=7.0)
        b = LinkBudget(underground_db=5.0, aerial_db=2.0)
        combined = LinkBudget(coiled_db=7.0, underground_db=5.0, aerial_db=2.0)
        assert survival_probability(combined) == pytest.approx(
            survival_probability(a) * survival_probability(b), rel=1e-12
        )

    def test_extra_insertion(self):
        assert survival_probability(LinkBudget(), 3.0) == pytest.approx(10 ** -0.3)

    def test_bounds(self):
        assert 0.0 < survival_probability(LinkBudget(coiled_db=60.0)) <= 1.0
        with pytest.raises(ValueError):
            LinkBudget(coiled_db=-1.0)
        with pytest.raises(ValueError):
            survival_probability(LinkBudget(), -2.0)


class TestGenerateDrift:
    def test_deterministic_per_seed(self):
        a = generate_drift(SUNNY, DAY, 30.0, seed=9)
        b = generate_drift(SUNNY, DAY, 30.0, seed=9)
        assert np.array_equal(a.delays_ps, b.delays_ps)
        c = generate_drift(SUNNY, DAY, 30.0, seed=10)
        assert not np.array_equal(a.delays_ps, c.delays_ps)

    @pytest.mark.parametrize("preset,lo,hi", [
        (RAINY, 160.0, 240.0),
        (CLOUDY, 400.0, 600.0),
        (SUNNY, 800.0, 1200.0),
    ])
    def test_daily_peak_to_peak(self, preset, lo, hi):
        for seed in range(12):
            trace = generate_drift(preset, DAY, 30.0, seed=seed)
            assert lo <= np.ptp(trace.delays_ps) <= hi

    def test_preset_ordering(self):
        for seed in (0, 5, 17):
            spans = [
                np.ptp(generate_drift(p, DAY, 60.0, seed).delays_ps)
                for p in (RAINY, CLOUDY, SUNNY)
            ]
            assert spans[0] < spans[1] < spans[2]

    def test_continuity(self):
        # no step larger than 5 sigma of the per-step increments
        trace = generate_drift(SUNNY, DAY, 60.0, seed=3)
        steps = np.diff(trace.delays_ps)
        spread = np.std(steps)
        assert np.max(np.abs(steps - steps.mean())) <= 5.0 * spread

    def test_excursion_invariant(self):
        for seed in range(8):
            trace = generate_drift(CLOUDY, DAY, 60.0, seed=seed)
            assert np.ptp(trace.delays_ps) <= 1.2 * CLOUDY.peak_to_peak_ps

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_drift(SUNNY, 0.0, 1.0, 1)
        with pytest.raises(ValueError):
            generate_drift(SUNNY, 10.0, 0.0, 1)

    def test_lookup(self):
        trace = generate_drift(RAINY, 1000.0, 10.0, seed=2)
        assert trace.delay_at(55.0)[0] == trace.delays_ps[5]


class TestPolarizationDrift:
    def test_zero_rate_constant(self):
        trace = polarization_drift(600.0, 0.0, seed=1)
        assert np.allclose(trace.overlap, 1.0)

    def test_deterministic(self):
        a = polarization_drift(600.0, 1e-3, seed=4)
        b = polarization_drift(600.0, 1e-3, seed=4)
        assert np.array_equal(a.overlap, b.overlap)

    def test_long_time_average_half(self):
        # uniform-measure average of |<a|b>|^2 over the sphere is 1/2;
        # Monte Carlo oracle over several long unconstrained walks
        means = []
        for seed in range(6):
            trace = polarization_drift(40000.0, 5e-3, seed=seed, dt_s=5.0)
            means.append(float(np.mean(trace.overlap[200:])))
        assert np.mean(means) == pytest.approx(0.5, abs=0.08)

    def test_range(self):
        trace = polarization_drift(5000.0, 2e-3, seed=8)
        assert np.all(trace.overlap >= 0.0) and np.all(trace.overlap <= 1.0)

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            polarization_drift(10.0, -1e-3, seed=0)


class TestPresets:
    def test_spec_values(self):
        assert PRESETS["rainy"].peak_to_peak_ps == 200.0
        assert PRESETS["cloudy"].peak_to_peak_ps == 500.0
        assert PRESETS["sunny"].peak_to_peak_ps == 1000.0

    def test_custom_allowed(self):
        p = WeatherPreset("typhoon", 3000.0, 600.0)
        assert p.peak_to_peak_ps == 3000.0

    def test_trace_validates_excursion(self):
        with pytest.raises(ValueError):
            DriftTrace(
                times_s=np.array([0.0, 1.0]),
                delays_ps=np.array([0.0, 500.0]),
                preset=RAINY,
                seed=0,
            )


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        trace = generate_drift(CLOUDY, 3600.0, 30.0, seed=6)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path, header_comment="swapsim test")
        back = read_trace_csv(path, preset=CLOUDY)
        assert np.allclose(back.times_s, trace.times_s)
        assert np.allclose(back.delays_ps, trace.delays_ps, atol=1e-6)
        first = path.read_text().splitlines()
        assert first[0].startswith("#")
        assert first[1] == "time_s,delay_ps"

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n")
        with pytest.raises(ValueError):
            read_trace_csv(path)
