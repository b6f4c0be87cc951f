import json
import math
import warnings

import numpy as np
import pytest

from hapsnoma.scenario import (PowerProfile, ScenarioError, generate_users_ppp, load_power_profile,
                               load_scenario, save_scenario, scenario_from_dict, scenario_to_dict,
                               synthetic_day_profile, write_power_profile)
from hapsnoma.scenario import default_scenario_path


def default_doc():
    return json.loads(default_scenario_path().read_text())


def test_default_loads(default_scenario):
    s = default_scenario
    assert s.n_users == 100
    assert s.coverage_radius_km == 60
    assert s.link.rician_omega == pytest.approx(8.0)
    assert s.transmit_power() == 10_000.0


def test_round_trip(tmp_path, default_scenario):
    p = tmp_path / "s.json"
    save_scenario(default_scenario, p)
    again = load_scenario(p)
    assert again == default_scenario
    q = tmp_path / "t.json"
    save_scenario(again, q)
    assert p.read_bytes() == q.read_bytes()


def test_missing_field_is_named():
    doc = default_doc()
    del doc["link"]["bandwidth_hz"]
    with pytest.raises(ScenarioError, match="link.bandwidth_hz"):
        scenario_from_dict(doc)


def test_wrong_type_is_named():
    doc = default_doc()
    doc["qos"]["rate_bps"] = "fast"
    with pytest.raises(ScenarioError, match="qos.rate_bps"):
        scenario_from_dict(doc)


def test_unknown_field_warns():
    doc = default_doc()
    doc["colour"] = "blue"
    with pytest.warns(UserWarning, match="colour"):
        scenario_from_dict(doc)


def test_user_outside_disk_rejected():
    doc = default_doc()
    doc.pop("ppp", None)
    doc["users"] = [[0.0, 0.0], [61.0, 0.0]]
    with pytest.raises(ScenarioError, match="user 2"):
        scenario_from_dict(doc)


def test_coverage_beyond_min_elevation_rejected():
    doc = default_doc()
    doc["coverage"]["radius_km"] = 120.0
    with pytest.raises(ScenarioError, match="coverage.radius_km"):
        scenario_from_dict(doc)


def test_ppp_fixed_count_deterministic():
    a = generate_users_ppp(50, 60, 3)
    b = generate_users_ppp(50, 60, 3)
    assert a == b and len(a) == 50
    assert all(math.hypot(*u.position) <= 60 for u in a)


def test_ppp_uniform_on_disk():
    users = generate_users_ppp(100_000, 60, 9)
    xy = np.array([u.position for u in users])
    r2 = (xy ** 2).sum(axis=1)
    assert r2.mean() == pytest.approx(60 ** 2 / 2, rel=0.01)
    assert abs(xy.mean(axis=0)).max() < 0.5


def test_ppp_empty_warns():
    with pytest.warns(UserWarning, match="empty"):
        assert generate_users_ppp(0, 60, 1) == []


def test_profile_lookup():
    p = PowerProfile((600.0, 615.0, 630.0), (100.0, 200.0, 300.0))
    assert p.at("10:00") == 100.0
    assert p.at("10:14") == 100.0
    assert p.at("10:15") == 200.0
    assert p.at("10:44") == 300.0
    with pytest.raises(ValueError, match="outside"):
        p.at("10:45")
    with pytest.raises(ValueError):
        p.at("09:59")


def test_constant_profile_spans_day():
    p = PowerProfile.constant(5.0)
    assert p.at("00:00") == p.at("23:59") == 5.0


def test_profile_csv_round_trip(tmp_path):
    prof = synthetic_day_profile(peak_w=1000, night_w=100)
    path = tmp_path / "p.csv"
    write_power_profile(prof, path)
    back = load_power_profile(path)
    assert back.minutes == prof.minutes and back.watts == prof.watts


def test_shipped_profile_is_labelled_synthetic():
    from importlib import resources
    text = (resources.files("hapsnoma") / "data" / "synthetic_day_profile.csv").read_text()
    assert text.startswith("# SYNTHETIC")


def test_to_dict_is_json_serialisable(default_scenario):
    json.dumps(scenario_to_dict(default_scenario))
