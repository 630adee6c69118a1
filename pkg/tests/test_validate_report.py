import json
import os
from pathlib import Path

import numpy as np
import pytest

from coshf import channel, cli, report, trajectory, validate
from coshf.sca import ScaConfig, run
from coshf.scenario import random_scenario, save_scenario, serialize_scenario
from coshf.trajectory import CoShfTrajectory, DiscretePath
from conftest import perturbed_reference


def hover_only_traj(sc):
    traj = CoShfTrajectory(
        hover_S=np.tile([[120.0, 150.0]], (sc.K, 1)),
        hover_J=np.tile([[260.0, 150.0]], (sc.K, 1)),
        turn_S=np.tile([120.0, 150.0], (sc.K + 1, sc.N, 1)),
        turn_J=np.tile([260.0, 150.0], (sc.K + 1, sc.N, 1)),
        hover_dur=np.full(sc.K, 10.0),
        sched_hover=np.eye(sc.K),
        sched_fly=np.tile(np.eye(sc.K)[0], (sc.K + 1, sc.N + 1, 1)))
    return traj


@pytest.fixture(scope="module")
def static_sc():
    return random_scenario(
        seed=4, K=2, area=300.0, T=60.0,
        start_S=np.array([120.0, 150.0]), end_S=np.array([120.0, 150.0]),
        start_J=np.array([260.0, 150.0]), end_J=np.array([260.0, 150.0]))


def test_audit_hover_only_zero_speed(static_sc):
    traj = hover_only_traj(static_sc)
    aud = validate.audit(traj, static_sc)
    assert aud.max_speed_violation == 0.0
    assert aud.time_budget_slack == pytest.approx(40.0)
    assert aud.scheduling_binary
    assert aud.min_pair_distance == pytest.approx(140.0)


def test_audit_throughput_matches_quadrature(default_sc):
    traj = perturbed_reference(default_sc, 11)
    reported = trajectory.throughput(traj, default_sc)
    aud = validate.audit(traj, default_sc, reported_throughput=reported)
    assert aud.max_rel_throughput_gap <= 1e-3
    assert not aud.scheduling_binary


def test_audit_discrete_left_rule(static_sc):
    t = np.arange(5) * 1.0
    pos_s = np.tile([120.0, 150.0], (5, 1))
    pos_j = np.tile([260.0, 150.0], (5, 1))
    sched = np.tile([1.0, 0.0], (5, 1))
    path = DiscretePath(dt=1.0, t=t, pos_S=pos_s, pos_J=pos_j, sched=sched)
    aud = validate.audit(path, static_sc)
    r = float(channel.secrecy_rate(pos_s[0], pos_j[0], 0, static_sc))
    assert aud.throughput_recomputed[0] == pytest.approx(4.0 * r)
    assert aud.throughput_recomputed[1] == 0.0


# -- export ---------------------------------------------------------------------


def test_export_files_and_round_trip(tmp_path, default_sc):
    traj = perturbed_reference(default_sc, 12)
    reported = trajectory.throughput(traj, default_sc)
    aud = validate.audit(traj, default_sc, reported_throughput=reported)
    rep = {"mode": "coshf", "objective": float(np.min(reported)),
           "per_user": reported.tolist(), "audit": aud.to_dict(),
           "objective_trace": [1.0, 2.0]}
    written = report.export(tmp_path, default_sc, rep, traj,
                            config={"eps": 1e-3})
    assert set(written) == {"trajectory.json", "trajectory.csv",
                            "schedule.csv", "results.json"}

    # byte-identical round trips
    doc = report.parse_results(written["results.json"])
    report.reexport_results(doc, tmp_path / "results2.json")
    assert (tmp_path / "results2.json").read_bytes() \
        == written["results.json"].read_bytes()
    for name in ("trajectory.csv", "schedule.csv"):
        header, rows = report.parse_csv(written[name])
        report.reexport_csv(header, rows, tmp_path / f"re_{name}")
        assert (tmp_path / f"re_{name}").read_bytes() \
            == written[name].read_bytes()

    # the trajectory document reloads to the same decision object
    again = trajectory.load_trajectory(written["trajectory.json"])
    assert np.array_equal(again.hover_S, traj.hover_S)

    # schedule.csv has one row per flight segment plus one per hover
    header, rows = report.parse_csv(written["schedule.csv"])
    assert header[:4] == ["phase", "i", "j", "duration_s"]
    assert len(rows) == traj.n_segments + default_sc.K


def test_export_schema_fields(tmp_path, default_sc):
    traj = perturbed_reference(default_sc, 13)
    rep = {"mode": "coshf", "objective": 1.0}
    written = report.export(tmp_path, default_sc, rep, traj)
    doc = report.parse_results(written["results.json"])
    assert doc["schema"] == "coshf-results-v1"
    assert doc["scenario_hash"] == report.scenario_hash(default_sc)
    assert doc["scenario"] == json.loads(serialize_scenario(default_sc))


def test_sweep_tables(tmp_path):
    empty = report.write_sweep(tmp_path, "pj", [])
    assert empty.read_text().strip() == \
        "param,value,objective_bits_per_hz,iters,wallclock_s,status,feasible"
    rows = [("P_J_mW", v, 1.0 + v, 5, 2.5, "converged", 1)
            for v in (0.1, 1.0, 10.0, 100.0)]
    four = report.write_sweep(tmp_path, "pj", rows)
    header, parsed = report.parse_csv(four)
    assert len(parsed) == 4
    report.reexport_csv(header, parsed, tmp_path / "re.csv")
    assert (tmp_path / "re.csv").read_bytes() == four.read_bytes()


def test_export_deterministic_for_fixed_seed(tmp_path, small_sc):
    outs = []
    for run_dir in ("a", "b"):
        traj, rep = run(small_sc, ScaConfig(eps=0.1, max_outer=5))
        d = tmp_path / run_dir
        report.export(d, small_sc, rep.to_dict(), traj, config={"seed": 3})
        outs.append(d)
    for name in ("trajectory.csv", "schedule.csv", "trajectory.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    # results.json matches except wallclock timings
    docs = [report.parse_results(d / "results.json") for d in outs]
    for doc in docs:
        doc["report"].pop("wallclock")
    assert docs[0] == docs[1]


# -- command line -----------------------------------------------------------------


def small_config_file(tmp_path):
    sc = random_scenario(seed=3, K=2, area=300.0, T=120.0, N=1)
    path = tmp_path / "scenario.json"
    save_scenario(sc, path)
    return path


def test_cli_end_to_end(tmp_path):
    cfg = small_config_file(tmp_path)
    out = tmp_path / "out"
    rc = cli.main(["--scenario", str(cfg), "--mode", "coshf",
                   "--eps", "1e-2", "--out", str(out)])
    assert rc == cli.EXIT_OK
    doc = report.parse_results(out / "results.json")
    assert doc["report"]["status"] == "converged"
    assert (out / "trajectory.csv").exists()


def test_cli_unknown_flag_usage_error(capsys):
    assert cli.main(["--frobnicate"]) == cli.EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_cli_td_n0_invariant(capsys):
    assert cli.main(["--mode", "td", "--td-n0", "1"]) == cli.EXIT_USAGE
    assert "N0" in capsys.readouterr().err


def test_cli_missing_scenario_file():
    assert cli.main(["--scenario", "/nonexistent/path.json"]) \
        == cli.EXIT_USAGE


def test_cli_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("COSHF_OUT_DIR", str(tmp_path / "envout"))
    assert report.default_out_dir() == tmp_path / "envout"


def test_cli_max_iter_exit_code(tmp_path):
    cfg = small_config_file(tmp_path)
    rc = cli.main(["--scenario", str(cfg), "--mode", "coshf",
                   "--eps", "1e-9", "--max-iter", "2",
                   "--out", str(tmp_path / "o2")])
    assert rc == cli.EXIT_MAX_ITER
