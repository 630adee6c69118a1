"""Dense-time feasibility auditor, independent of the optimizer's code paths.

The audit recomputes everything from sampled positions and the channel
formulas only: finite-difference speeds against V, the sampled minimum
inter-UAV distance, the time budget, scheduling binariness, and per-user
throughput by Riemann summation (per flight phase for hover-and-fly
trajectories, per slot for discrete paths). Violations are reported as
data, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel, trajectory
from .scenario import Scenario
from .trajectory import CoShfTrajectory, DiscretePath

__all__ = ["Audit", "audit", "riemann_throughput"]

DEFAULT_SAMPLES = 10_000
SEGMENT_SAMPLES = 2_000     # midpoint cells per flight segment


@dataclass
class Audit:
    max_speed_violation: float      # m/s above V (0 when compliant)
    min_pair_distance: float        # m over all samples
    worst_distance_time: float      # s, where the minimum occurred
    time_budget_slack: float        # s, T - total time
    scheduling_binary: bool
    throughput_recomputed: list     # per-user bits/Hz
    max_rel_throughput_gap: float   # vs reference values (nan if none given)
    n_samples: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def feasible(self, scenario: Scenario, speed_tol: float = 1e-6,
                 dist_tol: float = 1e-3, time_tol: float | None = None) -> bool:
        if time_tol is None:
            time_tol = 1e-6 * scenario.T
        return (self.max_speed_violation <= speed_tol
                and self.min_pair_distance >= scenario.d_min - dist_tol
                and self.time_budget_slack >= -time_tol)


def _phase_midpoint_throughput(traj: CoShfTrajectory, scenario: Scenario,
                               cells: int = SEGMENT_SAMPLES) -> np.ndarray:
    """Per-user throughput: exact hover terms plus per-segment midpoint sums."""
    K = traj.K
    out = np.zeros(K)
    for k in range(K):
        r_h = channel.secrecy_rate(traj.hover_S, traj.hover_J, k, scenario)
        out[k] = float(np.sum(traj.sched_hover[:, k] * traj.hover_dur * r_h))
    a_s, b_s, a_j, b_j = trajectory.segment_points(traj, scenario)
    dt_seg = trajectory.segment_times(traj, scenario)
    a_fly = traj.sched_fly_flat()
    mids = (np.arange(cells) + 0.5) / cells
    for s in range(traj.n_segments):
        if dt_seg[s] <= 0.0:
            continue
        pos_s = a_s[s] + mids[:, None] * (b_s[s] - a_s[s])
        pos_j = a_j[s] + mids[:, None] * (b_j[s] - a_j[s])
        for k in range(K):
            if a_fly[s, k] == 0.0:
                continue
            r = channel.secrecy_rate(pos_s, pos_j, k, scenario)
            out[k] += a_fly[s, k] * dt_seg[s] * float(np.mean(r))
    return out


def riemann_throughput(path: DiscretePath, scenario: Scenario) -> np.ndarray:
    """Left-rule Riemann throughput of a sampled path, per user."""
    K = path.K
    dts = np.diff(path.t)
    out = np.zeros(K)
    for k in range(K):
        r = channel.secrecy_rate(path.pos_S[:-1], path.pos_J[:-1], k, scenario)
        out[k] = float(np.sum(path.sched[:-1, k] * r * dts))
    return out


def audit(solution, scenario: Scenario,
          reported_throughput=None, n_samples: int = DEFAULT_SAMPLES) -> Audit:
    """Audit a CoShfTrajectory or DiscretePath against the true constraints."""
    if isinstance(solution, CoShfTrajectory):
        total = trajectory.total_time(solution, scenario)
        dt = (total if total > 0 else scenario.T) / n_samples
        path = trajectory.to_discrete(solution, scenario, dt)
        throughput = _phase_midpoint_throughput(solution, scenario)
        binary = _is_binary(solution.sched_hover) and \
            _is_binary(solution.sched_fly_flat())
    elif isinstance(solution, DiscretePath):
        path = solution
        total = float(path.t[-1])
        throughput = riemann_throughput(path, scenario)
        binary = _is_binary(path.sched)
    else:
        raise TypeError(f"cannot audit {type(solution).__name__}")

    dts = np.diff(path.t)
    ok = dts > 0
    speed_s = np.linalg.norm(np.diff(path.pos_S, axis=0), axis=1)[ok] / dts[ok]
    speed_j = np.linalg.norm(np.diff(path.pos_J, axis=0), axis=1)[ok] / dts[ok]
    max_speed = float(max(speed_s.max(initial=0.0), speed_j.max(initial=0.0)))

    pair = np.linalg.norm(path.pos_S - path.pos_J, axis=1)
    worst = int(np.argmin(pair))

    if reported_throughput is not None:
        ref = np.asarray(reported_throughput, dtype=float)
        denom = np.maximum(np.abs(ref), 1e-12)
        gap = float(np.max(np.abs(throughput - ref) / denom))
    else:
        gap = float("nan")

    return Audit(
        max_speed_violation=max(max_speed - scenario.V, 0.0),
        min_pair_distance=float(pair[worst]),
        worst_distance_time=float(path.t[worst]),
        time_budget_slack=float(scenario.T - total),
        scheduling_binary=bool(binary),
        throughput_recomputed=[float(x) for x in throughput],
        max_rel_throughput_gap=gap,
        n_samples=len(path.t))


def _is_binary(weights: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.all((np.abs(weights) <= tol)
                       | (np.abs(weights - 1.0) <= tol)))
