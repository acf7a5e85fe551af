import json

import pytest

from bsnassure.config import (ConfigError, Confirmation, Policy, ScenarioConfig, config_from_dict,
                              load_config)
from bsnassure.selftest import scenario_path


def test_defaults_valid():
    cfg = ScenarioConfig().validate()
    assert cfg.confirmation is Confirmation.REPLICATION
    assert cfg.policy is Policy.NONE
    assert cfg.scheduler_period_ms == 100.0


def test_round_trip_keeps_digest():
    cfg = ScenarioConfig(num_sensor_nodes=7, seed=42, policy=Policy.DYNAMIC,
                         dwell_stats_ms={"low": 1000.0})
    again = config_from_dict(json.loads(cfg.to_json()))
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_digest_changes_with_seed():
    assert ScenarioConfig(seed=1).digest() != ScenarioConfig(seed=2).digest()


@pytest.mark.parametrize("doc,needle", [
    ({"bogus": 1}, "bogus"),
    ({"timing": {"speed": 2}}, "timing.speed"),
    ({"patient": {"mood": "ok"}}, "patient.mood"),
    ({"confirmation": "TwoOfThree"}, "confirmation"),
    ({"num_sensor_nodes": 0}, "num_sensor_nodes"),
    ({"seed": -1}, "seed"),
    ({"timing": {"jitter_fraction": 0.5}}, "jitter_fraction"),
    ({"patient": {"transition": [[1, 0, 0], [0, 1, 0], [0.5, 0.4, 0.0]]}}, "sum to 1"),
    ({"patient": {"dwell_min_ms": [10, 10, 10], "dwell_max_ms": [5, 20, 20]}}, "dwell"),
    ({"dwell_stats_ms": {"extreme": 3}}, "extreme"),
    ({"sim_duration_ms": 50}, "sim_duration_ms"),
])
def test_validation_errors_name_the_field(doc, needle):
    with pytest.raises(ConfigError, match=needle):
        config_from_dict(doc)


def test_load_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)


@pytest.mark.parametrize("name", ["nominal_5", "nodes_20", "refine_default"])
def test_bundled_scenarios_load(name):
    cfg = load_config(scenario_path(name))
    assert cfg.num_sensor_nodes >= 1


def test_realtime_removes_jitter():
    assert ScenarioConfig(realtime_on=True).effective_jitter == 0.0
    assert ScenarioConfig().effective_jitter == 0.05
