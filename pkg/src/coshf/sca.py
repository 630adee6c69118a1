"""Iterative trajectory and scheduling optimization.

The driver alternates surrogate construction and convex solves from a
feasible start until the true objective stalls, then optionally rounds the
relaxed scheduling to one-hot and repolishes positions and durations with
the schedule pinned. The single-UAV benchmark reuses the same loop with the
jammer silenced and pinned to its straight chord.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass

import numpy as np

from . import convexify, subsolver, trajectory, validate
from .convexify import InfeasibleReferenceError
from .scenario import Scenario
from .trajectory import CoShfTrajectory

__all__ = ["ScaConfig", "SolveReport", "InitializationError",
           "tsp_order", "initialize", "run", "run_single_uav"]

log = logging.getLogger(__name__)


class InitializationError(RuntimeError):
    """No feasible starting trajectory could be constructed."""


@dataclass
class ScaConfig:
    eps: float = 1e-3            # bits/Hz absolute objective change
    max_outer: int = 100
    quad_order: int = 8
    eps_ref: float = convexify.EPS_REF   # floor for surrogate references
    round_schedule: bool = True
    solver: str | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if not self.eps_ref > 0:
            raise ValueError("eps_ref must be positive")


@dataclass
class SolveReport:
    mode: str
    status: str                  # converged | max_iter | infeasible | stalled
    converged: bool
    objective: float
    per_user: list
    objective_trace: list
    round_trace: list
    pre_round_objective: float | None
    iters: int
    m_var: int
    m_con: int
    n_solver_vars: int
    n_solver_cons: int
    wallclock: dict
    audit: dict | None = None

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["audit"] = dict(self.audit) if self.audit else None
        return out


# -- initialization ----------------------------------------------------------


def tsp_order(start: np.ndarray, targets: np.ndarray, end: np.ndarray) -> list:
    """Visiting order minimizing the start -> all targets -> end path length.

    Exact subset dynamic program up to 12 targets, nearest neighbor plus
    2-opt beyond.
    """
    K = len(targets)
    if K == 0:
        return []
    if K == 1:
        return [0]
    d_start = np.linalg.norm(targets - start, axis=1)
    d_end = np.linalg.norm(targets - end, axis=1)
    d = np.linalg.norm(targets[:, None, :] - targets[None, :, :], axis=2)

    if K <= 12:
        full = (1 << K) - 1
        cost = {(1 << k, k): d_start[k] for k in range(K)}
        parent = {}
        for mask in range(1, full + 1):
            for last in range(K):
                if not mask & (1 << last) or (mask, last) not in cost:
                    continue
                base = cost[(mask, last)]
                for nxt in range(K):
                    if mask & (1 << nxt):
                        continue
                    nmask = mask | (1 << nxt)
                    cand = base + d[last, nxt]
                    if cand < cost.get((nmask, nxt), np.inf):
                        cost[(nmask, nxt)] = cand
                        parent[(nmask, nxt)] = last
        best_last = min(range(K), key=lambda k: cost[(full, k)] + d_end[k])
        order = [best_last]
        mask = full
        while len(order) < K:
            last = order[-1]
            prev = parent[(mask, last)]
            mask ^= 1 << last
            order.append(prev)
        return order[::-1]

    # nearest neighbor seed
    order = []
    remaining = set(range(K))
    here = start
    while remaining:
        nxt = min(remaining,
                  key=lambda k: float(np.linalg.norm(targets[k] - here)))
        order.append(nxt)
        remaining.remove(nxt)
        here = targets[nxt]

    def tour_len(o):
        pts = [start] + [targets[k] for k in o] + [end]
        return sum(float(np.linalg.norm(pts[i + 1] - pts[i]))
                   for i in range(len(pts) - 1))

    improved = True
    while improved:
        improved = False
        for i, j in itertools.combinations(range(K), 2):
            cand = order[:i] + order[i:j + 1][::-1] + order[j + 1:]
            if tour_len(cand) < tour_len(order) - 1e-12:
                order = cand
                improved = True
    return order


def _even_points(p0: np.ndarray, p1: np.ndarray, count: int) -> np.ndarray:
    fr = np.linspace(0.0, 1.0, count + 2)[1:-1]
    return p0[None, :] + fr[:, None] * (p1 - p0)[None, :]


def _build_init(scenario: Scenario, hover_s, turn_j_shift=0.0):
    """Assemble the straight-legged initial trajectory for given hover rows."""
    K, N = scenario.K, scenario.N
    seq_s = [scenario.start_S] + list(hover_s) + [scenario.end_S]
    turn_s = np.zeros((K + 1, N, 2))
    for i in range(K + 1):
        turn_s[i] = _even_points(np.asarray(seq_s[i]), np.asarray(seq_s[i + 1]), N)

    chord = scenario.end_J - scenario.start_J
    length = float(np.linalg.norm(chord))
    normal = (np.array([-chord[1], chord[0]]) / length if length > 0
              else np.array([0.0, 1.0]))
    P = (K + 1) * (N + 1) + 1
    fr = np.linspace(0.0, 1.0, P)
    pts_j = scenario.start_J[None, :] + fr[:, None] * chord[None, :]
    pts_j = pts_j + turn_j_shift * normal[None, :]
    pts_j[0] = scenario.start_J
    pts_j[-1] = scenario.end_J
    hover_rows = [pts_j[i * (N + 1)] for i in range(1, K + 1)]
    turn_j = np.zeros((K + 1, N, 2))
    for i in range(K + 1):
        turn_j[i] = pts_j[i * (N + 1) + 1: i * (N + 1) + 1 + N]

    traj = CoShfTrajectory(
        hover_S=np.asarray(hover_s, dtype=float),
        hover_J=np.asarray(hover_rows, dtype=float),
        turn_S=turn_s, turn_J=turn_j,
        hover_dur=np.zeros(K),
        sched_hover=np.full((K, K), 1.0 / K),
        sched_fly=np.full((K + 1, N + 1, K), 1.0 / K))
    fly = float(np.sum(trajectory.segment_times(traj, scenario)))
    traj.hover_dur = np.full(K, max(scenario.T - fly, 0.0) / K)
    return traj, fly


def initialize(scenario: Scenario) -> CoShfTrajectory:
    """Feasible start: shortest-tour hovering above users, jammer on its chord.

    Hover pairs sit directly above the users in shortest-path visiting order,
    turning points spread evenly along each leg, the jammer's waypoints
    spread evenly along its start-end chord, leftover mission time split
    equally across hover durations, and uniform scheduling. Raises
    InitializationError when the time budget or safety distance cannot be met.
    """
    order = tsp_order(scenario.start_S, scenario.gu_pos, scenario.end_S)
    hover_s = scenario.gu_pos[order]

    traj, fly = _build_init(scenario, hover_s)
    if fly > scenario.T:
        raise InitializationError(
            f"time budget insufficient for the shortest tour: requires at "
            f"least {fly:.1f} s, have T={scenario.T:.1f} s")

    min_d = float(np.min(trajectory.min_pair_distance_all(traj, scenario)))
    if min_d < scenario.d_min:
        shift = scenario.d_min - min_d + 0.1
        for signed in (shift, -shift):
            cand, fly_c = _build_init(scenario, hover_s, turn_j_shift=signed)
            if fly_c > scenario.T:
                continue
            if float(np.min(trajectory.min_pair_distance_all(cand, scenario))) \
                    >= scenario.d_min:
                log.info("initial jammer chord shifted laterally by %.2f m", signed)
                return cand
        raise InitializationError(
            "collision violation persists after lateral-offset repair")
    return traj


# -- main loop ----------------------------------------------------------------


def _warm_values(traj: CoShfTrajectory, scenario: Scenario) -> dict:
    H = scenario.alt
    vals = {
        "qsh": traj.hover_S / H,
        "qjh": traj.hover_J / H,
        "t": traj.hover_dur.copy(),
        "ah": traj.sched_hover.copy(),
        "af": traj.sched_fly_flat().copy(),
    }
    if traj.N > 0:
        vals["qst"] = traj.turn_S.reshape(-1, 2) / H
        vals["qjt"] = traj.turn_J.reshape(-1, 2) / H
    d_s, d_j = trajectory.segment_lengths(traj, scenario)
    vals["m"] = np.maximum(d_s, d_j) / H
    return vals


def _true_objective(traj, scenario, quad_order) -> float:
    return float(np.min(trajectory.throughput(traj, scenario, quad_order)))


PROBE_HOVER_T = 2.0   # s; hovers shorter than this trigger a drop probe
ROUND_PROBE_TRIGGER = 1.0   # bits/Hz; increments below this allow a round probe
EXTRAPOLATION_STEPS = (1.5, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0)


def _is_near_binary(traj: CoShfTrajectory, margin: float = 0.25) -> bool:
    """Every scheduling group's top weight within ``margin`` of one."""
    top_h = np.max(traj.sched_hover, axis=1)
    top_f = np.max(traj.sched_fly_flat(), axis=1)
    return bool(np.all(top_h > 1.0 - margin) and np.all(top_f > 1.0 - margin))


def _renormalized(a: np.ndarray) -> np.ndarray | None:
    a = np.clip(a, 0.0, 1.0)
    sums = np.sum(a, axis=1, keepdims=True)
    if np.any(sums <= 0.0):
        return None
    return a / sums


def _extrapolate(ref: CoShfTrajectory, cand: CoShfTrajectory, gamma: float,
                 scenario: Scenario,
                 check_safety: bool = True) -> CoShfTrajectory | None:
    """Point at ref + gamma (cand - ref), repaired onto the feasible set.

    Hover durations are rescaled to fit the remaining time budget; returns
    None when the geometry itself is infeasible (budget or safety distance).
    """
    traj = CoShfTrajectory(
        hover_S=ref.hover_S + gamma * (cand.hover_S - ref.hover_S),
        hover_J=ref.hover_J + gamma * (cand.hover_J - ref.hover_J),
        turn_S=ref.turn_S + gamma * (cand.turn_S - ref.turn_S),
        turn_J=ref.turn_J + gamma * (cand.turn_J - ref.turn_J),
        hover_dur=np.clip(ref.hover_dur + gamma * (cand.hover_dur
                                                   - ref.hover_dur), 0, None),
        sched_hover=ref.sched_hover.copy(),
        sched_fly=ref.sched_fly.copy())
    a_h = _renormalized(ref.sched_hover + gamma * (cand.sched_hover
                                                   - ref.sched_hover))
    a_f = _renormalized(ref.sched_fly_flat() + gamma * (cand.sched_fly_flat()
                                                        - ref.sched_fly_flat()))
    if a_h is None or a_f is None:
        return None
    traj.sched_hover = a_h
    traj.sched_fly = a_f.reshape(ref.K + 1, ref.N + 1, ref.K)

    fly = float(np.sum(trajectory.segment_times(traj, scenario)))
    budget = scenario.T - fly
    if budget < 0.0:
        return None
    total_hover = float(np.sum(traj.hover_dur))
    if total_hover > budget:
        traj.hover_dur *= budget / total_hover if total_hover > 0 else 0.0
    if check_safety and float(
            np.min(trajectory.min_pair_distance_all(traj, scenario))) \
            < scenario.d_min:
        return None
    return traj


def _solve_step(ref, scenario, config, assemble_kwargs, timings, solver_cfg,
                verify):
    """One assemble/solve/decode; returns (candidate, objective, sol, counts)."""
    t0 = time.perf_counter()
    surr, prob = convexify.assemble(
        ref, scenario, quad_order=config.quad_order,
        verify_reference=verify, eps_ref=config.eps_ref, **assemble_kwargs)
    timings["build"] += time.perf_counter() - t0
    counts = dict(m_var=prob.m_var, m_con=prob.m_con,
                  n_solver_vars=prob.n_solver_vars,
                  n_solver_cons=prob.n_solver_cons)
    warm_obj = surr.objective_at(ref, scenario)
    sol = subsolver.solve(prob, warm_values=_warm_values(ref, scenario),
                          warm_objective=warm_obj, config=solver_cfg)
    timings["solve"] += sol.wallclock
    if sol.status == "infeasible" or sol.used_warm_start:
        return None, None, sol, counts
    t1 = time.perf_counter()
    candidate = prob.decode(scenario)
    obj = _true_objective(candidate, scenario, config.quad_order)
    timings["evaluate"] += time.perf_counter() - t1
    return candidate, obj, sol, counts


def _sca_loop(ref: CoShfTrajectory, scenario: Scenario, config: ScaConfig,
              assemble_kwargs: dict, timings: dict):
    """Assemble/solve/update until the true objective change drops below eps.

    Small hover durations decay only geometrically under the mean-bound
    surrogates, so when one drops below PROBE_HOVER_T an extra probe step
    re-solves from a reference with it zeroed; the probe is kept only when
    it does not lower the objective, preserving monotonicity.
    """
    trace = [_true_objective(ref, scenario, config.quad_order)]
    status = "max_iter"
    counts = {}
    solver_cfg = subsolver.SolverConfig(solver=config.solver)
    probed: set = set()
    last_round_probe = -10
    for r in range(config.max_outer):
        try:
            candidate, obj, sol, counts = _solve_step(
                ref, scenario, config, assemble_kwargs, timings, solver_cfg,
                verify=(r == 0))
        except InfeasibleReferenceError:
            status = "infeasible"
            break
        if sol.status == "infeasible":
            log.warning("subproblem infeasible at iteration %d (%s)",
                        r, sol.violated_name)
            status = "infeasible"
            break
        if sol.used_warm_start:
            # no certified progress; the reference is a fixed point when a
            # solver actually confirmed it, otherwise numerical failure
            status = "converged" if sol.solver_name else "max_iter"
            break

        check_safety = "drop_collision" not in assemble_kwargs
        t1 = time.perf_counter()
        best_ext, best_obj = None, obj
        for gamma in EXTRAPOLATION_STEPS:
            ext = _extrapolate(ref, candidate, gamma, scenario,
                               check_safety=check_safety)
            if ext is None:
                continue
            ext_obj = _true_objective(ext, scenario, config.quad_order)
            if ext_obj > best_obj:
                best_ext, best_obj = ext, ext_obj
        if best_ext is not None:
            candidate, obj = best_ext, best_obj
        timings["evaluate"] += time.perf_counter() - t1

        probe_refs = []
        small = np.flatnonzero((candidate.hover_dur > 0.0)
                               & (candidate.hover_dur < PROBE_HOVER_T))
        probe_idx = frozenset(small.tolist())
        if len(small) and probe_idx not in probed:
            probed.add(probe_idx)
            probe_ref = candidate.copy()
            probe_ref.hover_dur[small] = 0.0
            probe_refs.append(("hover drop", probe_ref))
        increment = obj - trace[-1]
        near_binary = (_is_near_binary(candidate)
                       and "pin_schedule" not in assemble_kwargs
                       and r - last_round_probe >= 3
                       and increment < ROUND_PROBE_TRIGGER)
        if near_binary:
            last_round_probe = r
            a_h, a_f = _round_schedule(candidate)
            probe_ref = candidate.copy()
            probe_ref.sched_hover = a_h
            probe_ref.sched_fly = a_f.reshape(scenario.K + 1, scenario.N + 1,
                                              scenario.K)
            probe_refs.append(("schedule round", probe_ref))
        for label, probe_ref in probe_refs:
            try:
                probe, probe_obj, probe_sol, _ = _solve_step(
                    probe_ref, scenario, config, assemble_kwargs, timings,
                    solver_cfg, verify=False)
            except InfeasibleReferenceError:
                probe = None
            if probe is not None and probe_obj >= obj:
                log.info("%s probe accepted: %.6f -> %.6f",
                         label, obj, probe_obj)
                candidate, obj = probe, probe_obj
        if obj < trace[-1] - 1e-6:
            if abs(obj - trace[-1]) < config.eps:
                # sub-eps dip at a surrogate fixed point: converged
                status = "converged"
                break
            log.warning("objective regressed from %.6f to %.6f; stopping",
                        trace[-1], obj)
            status = "stalled"
            break
        ref = candidate
        trace.append(obj)
        if abs(trace[-1] - trace[-2]) < config.eps:
            status = "converged"
            break
    return ref, trace, status, counts


def _round_schedule(traj: CoShfTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """One-hot argmax per scheduling group; ties go to the lowest user index."""
    K = traj.K
    a_h = np.zeros_like(traj.sched_hover)
    a_h[np.arange(K), np.argmax(traj.sched_hover, axis=1)] = 1.0
    flat = traj.sched_fly_flat()
    a_f = np.zeros_like(flat)
    a_f[np.arange(flat.shape[0]), np.argmax(flat, axis=1)] = 1.0
    return a_h, a_f


def _run_pipeline(scenario: Scenario, config: ScaConfig, mode: str,
                  assemble_kwargs: dict, init: CoShfTrajectory):
    timings = {"initialize": 0.0, "build": 0.0, "solve": 0.0,
               "evaluate": 0.0, "round": 0.0, "total": 0.0}
    t_start = time.perf_counter()

    traj, trace, status, counts = _sca_loop(
        init, scenario, config, assemble_kwargs, timings)

    pre_round_obj = trace[-1]
    round_trace: list = []
    if config.round_schedule and "pin_schedule" not in assemble_kwargs:
        t0 = time.perf_counter()
        a_h, a_f = _round_schedule(traj)
        rounded = traj.copy()
        rounded.sched_hover = a_h
        rounded.sched_fly = a_f.reshape(scenario.K + 1, scenario.N + 1,
                                        scenario.K)
        polish_kwargs = dict(assemble_kwargs)
        polish_kwargs["pin_schedule"] = (a_h, a_f)
        rounded, round_trace, r_status, _ = _sca_loop(
            rounded, scenario, config, polish_kwargs, timings)
        traj = rounded
        if r_status == "infeasible":
            status = "infeasible"
        timings["round"] += time.perf_counter() - t0

    per_user = trajectory.throughput(traj, scenario, config.quad_order)
    timings["total"] = time.perf_counter() - t_start

    audit = validate.audit(traj, scenario,
                           reported_throughput=per_user).to_dict()
    report = SolveReport(
        mode=mode, status=status, converged=(status == "converged"),
        objective=float(np.min(per_user)), per_user=per_user.tolist(),
        objective_trace=[float(x) for x in trace],
        round_trace=[float(x) for x in round_trace],
        pre_round_objective=float(pre_round_obj),
        iters=len(trace) - 1, m_var=counts.get("m_var", 0),
        m_con=counts.get("m_con", 0),
        n_solver_vars=counts.get("n_solver_vars", 0),
        n_solver_cons=counts.get("n_solver_cons", 0),
        wallclock=timings, audit=audit)
    return traj, report


def run(scenario: Scenario, config: ScaConfig | None = None):
    """Joint dual-UAV trajectory and scheduling optimization."""
    config = config or ScaConfig()
    t0 = time.perf_counter()
    init = initialize(scenario)
    init_wall = time.perf_counter() - t0
    traj, report = _run_pipeline(scenario, config, "coshf", {}, init)
    report.wallclock["initialize"] = init_wall
    report.wallclock["total"] += init_wall
    return traj, report


def run_single_uav(scenario: Scenario, config: ScaConfig | None = None):
    """Benchmark without the jammer: P_J = 0, jammer pinned to its chord."""
    config = config or ScaConfig()
    sc = scenario.with_(P_J=0.0)
    t0 = time.perf_counter()
    init = initialize(sc)
    init_wall = time.perf_counter() - t0
    kwargs = dict(pin_jammer=(init.hover_J.copy(), init.turn_J.copy()),
                  drop_collision=True)
    traj, report = _run_pipeline(sc, config, "single", kwargs, init)
    report.wallclock["initialize"] = init_wall
    report.wallclock["total"] += init_wall
    return traj, report
