"""Result files: results.json, trajectory.csv, schedule.csv and sweep tables.

Schemas (stable):
  results.json   {"schema": "coshf-results-v1", "mode", "scenario_hash",
                  "scenario": {...}, "config": {...}, "report": {...}}
  trajectory.csv t,xS,yS,xJ,yJ,active_user        ('.' decimal, no locale)
  schedule.csv   phase,i,j,duration_s,a_0..a_{K-1}
  sweep .csv     param,value,objective_bits_per_hz,iters,wallclock_s,status,feasible

All numbers are written with shortest round-trip formatting, so
parse -> re-export reproduces files byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from . import trajectory as trajmod
from .scenario import Scenario, serialize_scenario
from .trajectory import CoShfTrajectory, DiscretePath

__all__ = [
    "scenario_hash", "default_out_dir", "export", "write_sweep",
    "parse_results", "parse_csv", "reexport_csv",
]

TRAJECTORY_CSV_SAMPLES = 2000


def scenario_hash(scenario: Scenario) -> str:
    return hashlib.sha256(
        serialize_scenario(scenario).encode("utf-8")).hexdigest()[:16]


def default_out_dir() -> Path:
    return Path(os.environ.get("COSHF_OUT_DIR", "./coshf_out"))


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: list, rows: list) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) if not isinstance(x, str) else x
                              for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _path_rows(path: DiscretePath) -> list:
    active = path.active_user()
    return [(t, xs, ys, xj, yj, int(u))
            for t, (xs, ys), (xj, yj), u
            in zip(path.t, path.pos_S, path.pos_J, active)]


def _schedule_rows(traj: CoShfTrajectory, scenario: Scenario) -> list:
    rows = []
    dt_seg = trajmod.segment_times(traj, scenario)
    N = traj.N
    for i in range(traj.K + 1):
        for j in range(N + 1):
            s = i * (N + 1) + j
            rows.append(["fly", i, j, dt_seg[s]]
                        + list(traj.sched_fly_flat()[s]))
        if i < traj.K:
            rows.append(["hover", i + 1, -1, traj.hover_dur[i]]
                        + list(traj.sched_hover[i]))
    return rows


def _schedule_rows_discrete(path: DiscretePath) -> list:
    rows = []
    for n in range(len(path.t) - 1):
        rows.append(["slot", n, -1, path.t[n + 1] - path.t[n]]
                    + list(path.sched[n]))
    return rows


def export(out_dir, scenario: Scenario, report_dict: dict, solution,
           config: dict | None = None) -> dict:
    """Write the result bundle; returns {name: Path} of the written files.

    ``solution`` is a CoShfTrajectory or a DiscretePath; both produce the
    same trajectory.csv schema. Hover-and-fly solutions additionally export
    their decision document as trajectory.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    K = scenario.K
    if isinstance(solution, CoShfTrajectory):
        total = trajmod.total_time(solution, scenario)
        dt = max(total, 1e-9) / TRAJECTORY_CSV_SAMPLES
        path = trajmod.to_discrete(solution, scenario, dt)
        sched_rows = _schedule_rows(solution, scenario)
        traj_file = out / "trajectory.json"
        trajmod.save_trajectory(solution, traj_file)
        written["trajectory.json"] = traj_file
    elif isinstance(solution, DiscretePath):
        path = solution
        sched_rows = _schedule_rows_discrete(path)
    else:
        raise TypeError(f"cannot export {type(solution).__name__}")

    csv_file = out / "trajectory.csv"
    _write_csv(csv_file, ["t", "xS", "yS", "xJ", "yJ", "active_user"],
               _path_rows(path))
    written["trajectory.csv"] = csv_file

    sched_file = out / "schedule.csv"
    _write_csv(sched_file,
               ["phase", "i", "j", "duration_s"] + [f"a_{k}" for k in range(K)],
               sched_rows)
    written["schedule.csv"] = sched_file

    results = {
        "schema": "coshf-results-v1",
        "mode": report_dict.get("mode"),
        "scenario_hash": scenario_hash(scenario),
        "scenario": json.loads(serialize_scenario(scenario)),
        "config": config or {},
        "report": report_dict,
    }
    results_file = out / "results.json"
    results_file.write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written["results.json"] = results_file
    return written


def write_sweep(out_dir, name: str, rows: list) -> Path:
    """Sweep table; ``rows`` are (param, value, objective, iters, wall, status,
    feasible) tuples. An empty sweep writes the header only."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{name}.csv"
    _write_csv(path, ["param", "value", "objective_bits_per_hz", "iters",
                      "wallclock_s", "status", "feasible"], rows)
    return path


# -- round-trip parsing -------------------------------------------------------


def parse_results(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def reexport_results(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def parse_csv(path) -> tuple[list, list]:
    """(header, rows) with numeric cells parsed to int/float."""
    text = Path(path).read_text(encoding="utf-8").rstrip("\n")
    lines = text.split("\n")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        cells = []
        for cell in line.split(","):
            try:
                cells.append(int(cell))
            except ValueError:
                try:
                    cells.append(float(cell))
                except ValueError:
                    cells.append(cell)
        rows.append(cells)
    return header, rows


def reexport_csv(header: list, rows: list, path) -> None:
    _write_csv(Path(path), header, rows)
