import json
import math

import pytest

import optirl


def test_discounting_helpers():
    assert optirl.discounted_return([1.0, 1.0, 1.0], 0.5) == pytest.approx(1.75)
    assert optirl.horizon_for_epsilon(0.1, 0.5) == 5
    assert optirl.truncation_error_bound(5, 0.5) == pytest.approx(0.0625)


def test_class_round_trip():
    cls = optirl.load_class("builtin:bernoulli3")
    assert len(cls) == 3
    assert cls.names() == ["bern_08_02", "bern_05_05", "bern_02_08"]
    assert cls.deterministic() == [False, False, False]
    again = optirl.parse_class_json(optirl.class_to_json(cls))
    assert again.names() == cls.names()


def test_optimal_value_two_arm():
    cls = optirl.load_class("builtin:two_arm")
    h = optirl.History()
    v, action = optirl.optimal_value(cls, 1, h, 5, 0.5)
    # Arm 1 pays 1 every step: 2 * (1 - 0.5^5).
    assert v == pytest.approx(1.9375)
    assert action == 1


def test_tv_distance():
    cls = optirl.load_class("builtin:bernoulli3")
    h = optirl.History()
    d = optirl.tv_distance_horizon(cls, 0, 1, h, 0, 1)
    assert d == pytest.approx(0.3)


def test_build_cover():
    cover = optirl.build_cover("builtin:bernoulli_family", 0.1, 0.5, 1)
    assert len(cover) == 11


def test_run_episode_trace():
    config = {
        "class": {"source": "builtin:two_arm", "true_env": 1},
        "agent": {"kind": "conservative"},
        "gamma": 0.5,
        "t_max": 6,
    }
    result = optirl.run_episode(json.dumps(config), 0)
    assert result["t_opt"] == 2
    assert result["K"] == 1
    records = [json.loads(line) for line in result["trace_jsonl"]]
    assert [r["t"] for r in records] == [1, 2, 3, 4, 5, 6]
    assert records[0]["gap"] == pytest.approx(1.0)
    assert all(math.isfinite(r["v_opt"]) for r in records)


def test_bad_config_raises():
    with pytest.raises(optirl.ConfigError):
        optirl.run_episode(json.dumps({"gamma": 1.5}), 0)
