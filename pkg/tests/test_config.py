import json

import pytest

from swapsim.config import (
    ScenarioConfig,
    SourceConfig,
    bundled_scenario_names,
    load_bundled_scenario,
    load_scenario,
    scenario_from_dict,
)
from swapsim.errors import ConfigError


MINIMAL = {
    "mode": "swap",
    "links": {
        p: {} for p in ("alice_signal", "bob_signal", "alice_idler", "bob_idler")
    },
    "sweep": {"kind": "phase", "values": [0.0], "seconds_per_point": 1.0},
}


class TestSchema:
    def test_minimal_loads_with_defaults(self):
        cfg = scenario_from_dict(dict(MINIMAL))
        assert cfg.alice.mu == 0.023
        assert cfg.n_bins == 8
        assert cfg.detectors.dead_time_ps == 40000.0
        assert cfg.tdc.resolution_ps == 4.0

    def test_unknown_top_key(self):
        bad = dict(MINIMAL, typo_key=1)
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(bad)
        assert "typo_key" in str(err.value)

    def test_missing_link(self):
        bad = dict(MINIMAL, links={"alice_signal": {}})
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(bad)
        assert "bob_signal" in str(err.value)

    def test_bad_source_field(self):
        bad = dict(MINIMAL, sources={"alice": {"mu": -1.0}, "bob": {}})
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(bad)
        assert "sources.alice" in str(err.value)

    def test_bad_sweep_kind(self):
        bad = dict(MINIMAL, sweep={"kind": "voltage", "values": [1.0]})
        with pytest.raises(ConfigError):
            scenario_from_dict(bad)

    def test_unknown_weather(self):
        bad = dict(MINIMAL, weather="hail")
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(bad)
        assert "hail" in str(err.value)

    def test_mismatched_clock_rates(self):
        bad = dict(
            MINIMAL,
            sources={"alice": {"clock_rate_hz": 1e9}, "bob": {"clock_rate_hz": 5e8}},
        )
        with pytest.raises(ConfigError):
            scenario_from_dict(bad)

    def test_hash_stable_and_sensitive(self):
        a = scenario_from_dict(dict(MINIMAL))
        b = scenario_from_dict(dict(MINIMAL))
        assert a.config_hash() == b.config_hash()
        c = scenario_from_dict(dict(MINIMAL, seed=99))
        assert c.config_hash() != a.config_hash()


class TestLoadScenarioFile:
    def test_json_error_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "mode": "swap",\n  bad\n}\n')
        with pytest.raises(ConfigError) as err:
            load_scenario(path)
        assert ":3:" in str(err.value)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "ok.json"
        path.write_text(json.dumps(MINIMAL))
        cfg = load_scenario(path)
        assert cfg.mode == "swap"


class TestBundled:
    def test_names(self):
        names = bundled_scenario_names()
        for expected in ("fig3_alice", "fig3_bob", "fig4", "fig4_reduced",
                         "fig4_noisy_reduced", "rates_paper"):
            assert expected in names

    def test_all_load(self):
        for name in bundled_scenario_names():
            cfg = load_bundled_scenario(name)
            assert isinstance(cfg, ScenarioConfig)

    def test_paper_parameters_encoded(self):
        cfg = load_bundled_scenario("rates_paper")
        assert cfg.alice.mu == 0.023
        assert cfg.detectors.dead_time_ps == 40000.0
        assert cfg.tdc.resolution_ps == 4.0
        total = sum(b.total_db for b in cfg.links.values())
        assert total == pytest.approx(29.0)
        assert cfg.calibrated  # unpublished values are flagged

    def test_fig3_sources(self):
        assert load_bundled_scenario("fig3_alice").alice.visibility == 0.898
        assert load_bundled_scenario("fig3_bob").bob.visibility == 0.829
