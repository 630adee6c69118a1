import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coshf.scenario import (Scenario, ScenarioError, db_to_linear,
                            dbm_to_watt, default_scenario, load_scenario,
                            random_scenario, save_scenario,
                            serialize_scenario)


def benchmark_doc(**overrides):
    doc = {
        "K": 4,
        "N": 1,
        "T_s": 150.0,
        "V_mps": 10.0,
        "d_min_m": 3.0,
        "alt_m": 100.0,
        "P_S_mW": 10.0,
        "P_J_mW": 1.0,
        "beta0_dB": -30.0,
        "noise_dBm": -80.0,
        "gu_pos_m": [[100, 100], [400, 120], [250, 380], [60, 300]],
        "eve_pos_m": [250, 250],
        "start_S_m": [450, 450],
        "end_S_m": [450, 50],
        "start_J_m": [50, 450],
        "end_J_m": [50, 50],
    }
    doc.update(overrides)
    return doc


def test_load_benchmark_units():
    sc = load_scenario(benchmark_doc())
    assert sc.beta0 == pytest.approx(1e-3, rel=1e-12)
    assert sc.sigma2_gu == pytest.approx(1e-11, rel=1e-12)
    assert sc.sigma2_eve == pytest.approx(1e-11, rel=1e-12)
    assert sc.P_S == pytest.approx(0.01, rel=1e-12)
    assert sc.P_J == pytest.approx(0.001, rel=1e-12)
    assert sc.T == 150.0 and sc.V == 10.0 and sc.d_min == 3.0


def test_zero_db_is_identity():
    doc = benchmark_doc(beta0_dB=0.0)
    assert load_scenario(doc).beta0 == 1.0


def test_initial_separation_below_dmin_rejected():
    doc = benchmark_doc(start_S_m=[450, 450], start_J_m=[450, 449])
    with pytest.raises(ScenarioError, match="initial separation below d_min"):
        load_scenario(doc)


def test_final_separation_below_dmin_rejected():
    doc = benchmark_doc(end_S_m=[450, 50], end_J_m=[449, 50])
    with pytest.raises(ScenarioError, match="final separation below d_min"):
        load_scenario(doc)


def test_missing_key_named():
    doc = benchmark_doc()
    del doc["eve_pos_m"]
    with pytest.raises(ScenarioError, match="missing key.*eve_pos"):
        load_scenario(doc)


def test_non_finite_rejected():
    doc = benchmark_doc(T_s=float("nan"))
    with pytest.raises(ScenarioError, match="non-finite"):
        load_scenario(doc)


def test_reachability_invariant():
    doc = benchmark_doc(T_s=10.0)  # end points 400 m away at 10 m/s
    with pytest.raises(ScenarioError, match="T >="):
        load_scenario(doc)


def test_key_value_document():
    doc = benchmark_doc()
    text = "\n".join(
        f"{key} = {json.dumps(value)}  # comment" for key, value in doc.items())
    sc = load_scenario(text)
    assert sc == load_scenario(doc)


def test_random_scenario_deterministic():
    a = random_scenario(seed=1, K=4, area=500.0)
    b = random_scenario(seed=1, K=4, area=500.0)
    assert a == b


def test_random_scenario_seed_sensitivity():
    a = random_scenario(seed=1, K=4, area=500.0)
    b = random_scenario(seed=2, K=4, area=500.0)
    assert not np.array_equal(a.gu_pos, b.gu_pos)


def test_random_scenario_in_area():
    sc = random_scenario(seed=7, K=4, area=500.0)
    assert np.all(sc.gu_pos >= 0.0) and np.all(sc.gu_pos <= 500.0)
    assert np.all(sc.eve_pos >= 0.0) and np.all(sc.eve_pos <= 500.0)


def test_random_scenario_corner_endpoints():
    sc = random_scenario(seed=0, K=4, area=500.0)
    assert np.array_equal(sc.start_S, [450.0, 450.0])
    assert np.array_equal(sc.end_S, [450.0, 50.0])
    assert np.array_equal(sc.start_J, [50.0, 450.0])
    assert np.array_equal(sc.end_J, [50.0, 50.0])


def test_round_trip_exact(tmp_path):
    sc = default_scenario()
    path = tmp_path / "scenario.json"
    save_scenario(sc, path)
    again = load_scenario(path)
    assert again == sc
    assert serialize_scenario(again) == serialize_scenario(sc)


@given(st.floats(min_value=-120.0, max_value=60.0))
def test_db_conversions_match_definition(x):
    assert db_to_linear(x) == pytest.approx(10.0 ** (x / 10.0), rel=1e-12)
    assert dbm_to_watt(x) == pytest.approx(10.0 ** (x / 10.0) * 1e-3, rel=1e-12)


def test_immutable_positions():
    sc = default_scenario()
    with pytest.raises(ValueError):
        sc.gu_pos[0, 0] = 1.0


def test_with_revalidates():
    sc = default_scenario()
    with pytest.raises(ScenarioError):
        sc.with_(T=-1.0)
    assert sc.with_(P_J=0.0).P_J == 0.0
