"""Time-discretized benchmark: slotwise positions and scheduling by SCA.

The mission time is cut into N0 equal slots; each slot holds both UAVs at a
fixed position (left endpoints of the slot grid) and carries relaxed
scheduling weights. Slot rate terms reuse the hovering-pair rate bounds
with the slot length as a fixed duration; collision is enforced at slot
points only (inter-slot safety is audited, not guaranteed, which is the
usual fidelity gap of time discretization).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from . import channel, convexify, subsolver, trajectory, validate
from .convexify import _rate_coeffs, _h_at_reference
from .sca import SolveReport, initialize
from .scenario import Scenario
from .trajectory import DiscretePath

__all__ = ["TdConfig", "run_td"]

log = logging.getLogger(__name__)


@dataclass
class TdConfig:
    n0: int = 20
    eps: float = 1e-3
    max_outer: int = 100
    round_schedule: bool = True
    solver: str | None = None

    def __post_init__(self):
        if self.n0 < 2:
            raise ValueError("N0 must be at least 2")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")

    def slot_length(self, scenario: Scenario) -> float:
        return scenario.T / self.n0


def _initial_path(scenario: Scenario, n0: int) -> DiscretePath:
    """Slot-sample the hover-and-fly starting trajectory."""
    delta = scenario.T / n0
    for start, end in ((scenario.start_S, scenario.end_S),
                       (scenario.start_J, scenario.end_J)):
        if np.linalg.norm(end - start) > scenario.V * delta * n0 + 1e-9:
            raise ValueError("infeasible endpoints for given N0")
    init = initialize(scenario)
    path = trajectory.to_discrete(init, scenario, delta)
    # snap to an exact N0+1 grid (total time may be marginally below T)
    t = np.arange(n0 + 1) * delta
    m = min(len(path.t), n0 + 1)
    pos_s = np.vstack([path.pos_S[:m], np.repeat(path.pos_S[-1:], n0 + 1 - m, axis=0)])
    pos_j = np.vstack([path.pos_J[:m], np.repeat(path.pos_J[-1:], n0 + 1 - m, axis=0)])
    pos_s[-1], pos_j[-1] = scenario.end_S, scenario.end_J
    sched = np.full((n0 + 1, scenario.K), 1.0 / scenario.K)
    return DiscretePath(dt=delta, t=t, pos_S=pos_s, pos_J=pos_j, sched=sched)


def _true_objective(path: DiscretePath, scenario: Scenario) -> float:
    return float(np.min(validate.riemann_throughput(path, scenario)))


def _build_td_problem(path: DiscretePath, scenario: Scenario, n0: int,
                      pin_schedule: np.ndarray | None):
    """One TD subproblem around the reference path (scaled coordinates)."""
    sc = scenario
    H = sc.alt
    K = sc.K
    delta = sc.T / n0
    ref_s = path.pos_S
    ref_j = path.pos_J
    ref_a = path.sched[:n0]

    qs_var = cp.Variable((n0 - 1, 2), name="qs")
    qj_var = cp.Variable((n0 - 1, 2), name="qj")
    variables = {"qs": qs_var, "qj": qj_var}
    seq_s = cp.vstack([cp.Constant(sc.start_S.reshape(1, 2) / H), qs_var,
                       cp.Constant(sc.end_S.reshape(1, 2) / H)])
    seq_j = cp.vstack([cp.Constant(sc.start_J.reshape(1, 2) / H), qj_var,
                       cp.Constant(sc.end_J.reshape(1, 2) / H)])
    if pin_schedule is not None:
        a = cp.Constant(pin_schedule)
    else:
        a = cp.Variable((n0, K), nonneg=True, name="a")
        variables["a"] = a
    U = cp.Variable(name="U")
    variables["U"] = U

    tagged = []

    def add(name, tag, con):
        tagged.append((name, tag, con))

    # tiny margins keep the decoded point feasible despite solver tolerance
    step = seq_s[1:] - seq_s[:-1]
    step_cap = sc.V * delta * (1.0 - 1e-8) / H
    add("speed_S", "soc", cp.norm(step, 2, axis=1) <= step_cap)
    step_j = seq_j[1:] - seq_j[:-1]
    add("speed_J", "soc", cp.norm(step_j, 2, axis=1) <= step_cap)
    if pin_schedule is None:
        add("sched_sum", "affine-eq", cp.sum(a, axis=1) == 1.0)
        add("sched_box", "affine-ineq", a <= 1.0)

    # collision linearized at interior slot points
    rel_ref = (ref_s[1:n0] - ref_j[1:n0]) / H
    rel = qs_var - qj_var
    add("collision", "affine-ineq",
        -np.sum(rel_ref * rel_ref, axis=1)
        + 2.0 * cp.sum(cp.multiply(rel_ref, rel), axis=1)
        >= (sc.d_min / H) ** 2 + 1e-8)

    # slot rate bounds (hover-pair machinery with the slot as fixed duration)
    pos_s = seq_s[:n0]
    pos_j = seq_j[:n0]
    we_t = sc.eve_pos / H
    coeff_rows = [[_rate_coeffs(ref_s[n], ref_j[n], k, sc) for k in range(K)]
                  for n in range(n0)]
    mSe_g = np.stack([coeff_rows[n][0].gSe for n in range(n0)])
    mSe_c = np.array([coeff_rows[n][0].cSe for n in range(n0)])
    mSe = cp.sum(cp.multiply(mSe_g, pos_s), axis=1) + mSe_c
    add("minorant_Se", "affine-ineq", mSe >= 0.0)
    sJe = np.array([coeff_rows[n][0].sJe for n in range(n0)])
    d2_je = cp.multiply(
        1.0 / sJe, cp.sum(cp.square(pos_j - we_t[None, :]), axis=1) + 1.0)

    for k in range(K):
        co = [coeff_rows[n][k] for n in range(n0)]
        wk_t = sc.gu_pos[k] / H
        d2_s = cp.multiply(
            1.0 / np.array([c.sS for c in co]),
            cp.sum(cp.square(pos_s - wk_t[None, :]), axis=1) + 1.0)
        h_k = (cp.multiply(np.array([c.c_dS2 for c in co]), d2_s)
               + cp.multiply(np.array([c.c_dS4 for c in co]), cp.square(d2_s))
               + cp.multiply(np.array([c.c_mSe2 for c in co]), cp.power(mSe, -2))
               + cp.multiply(np.array([c.c_dJ4 for c in co]), cp.square(d2_je))
               + cp.multiply(np.array([c.c_mSe1 for c in co]), cp.power(mSe, -1)))
        if sc.P_J > 0:
            gJk = np.stack([c.gJk for c in co])
            cJk = np.array([c.cJk for c in co])
            mJk = cp.sum(cp.multiply(gJk, pos_j), axis=1) + cJk
            add(f"minorant_Jk_{k}", "affine-ineq", mJk >= 0.0)
            h_k = h_k + cp.multiply(np.array([c.c_mJ2 for c in co]),
                                    cp.power(mJk, -2))
        J = np.array([c.J for c in co], dtype=float)
        B1 = np.array([c.B1 for c in co])
        h_ref = np.array([_h_at_reference(c) for c in co])
        a_ref = ref_a[:, k].astype(float)
        gate = J * (a_ref >= convexify.EPS_REF)
        a_f = np.maximum(a_ref, convexify.EPS_REF)
        h_f = np.maximum(h_ref, convexify.EPS_REF)
        # hover-pair cubic bound with the slot length as fixed duration;
        # the B1 a t piece is exactly linear since t is the constant delta
        mean = (cp.multiply(1.0 / (3.0 * a_f), a[:, k]) + 1.0 / 3.0
                + cp.multiply(1.0 / (3.0 * h_f), h_k))
        v_k = (-cp.multiply(gate * a_f * delta * h_f, cp.power(mean, 3))
               + cp.multiply(gate * B1 * delta, a[:, k]))
        add(f"throughput_epigraph_{k}", "concave-ge", U <= cp.sum(v_k))

    problem = cp.Problem(cp.Maximize(U), [c for _, _, c in tagged])
    n_vars = sum(int(np.prod(v.shape)) if v.shape else 1
                 for v in problem.variables())
    n_cons = sum(int(np.prod(c.shape)) if c.shape else 1 for _, _, c in tagged)
    return convexify.ConvexProblem(
        problem=problem, variables=variables, tagged=tagged,
        pinned_schedule=None if pin_schedule is None else (pin_schedule,),
        pinned_jammer=None, n_solver_vars=n_vars, n_solver_cons=n_cons,
        m_var=n_vars, m_con=n_cons, scale=H)


def _surrogate_objective(path: DiscretePath, scenario: Scenario,
                         n0: int) -> float:
    """Slotwise surrogate value at its own reference.

    Tight up to the gating of sub-floor scheduling weights, which mirror the
    assembled problem (their slot terms contribute zero).
    """
    delta = scenario.T / n0
    K = scenario.K
    per_user = np.zeros(K)
    for k in range(K):
        r_user, r_eve = channel.rate_pair(path.pos_S[:n0], path.pos_J[:n0],
                                          k, scenario)
        gap = np.maximum(np.asarray(r_user - r_eve), 0.0)
        a_ref = path.sched[:n0, k]
        gap = np.where(a_ref >= convexify.EPS_REF, gap, 0.0)
        per_user[k] = delta * float(np.sum(a_ref * gap))
    return float(np.min(per_user))


def _decode_td(conv, path_ref: DiscretePath, scenario: Scenario, n0: int,
               pin_schedule: np.ndarray | None) -> DiscretePath:
    H = scenario.alt
    delta = scenario.T / n0
    qs = np.asarray(conv.variables["qs"].value, dtype=float) * H
    qj = np.asarray(conv.variables["qj"].value, dtype=float) * H
    pos_s = np.vstack([scenario.start_S, qs, scenario.end_S])
    pos_j = np.vstack([scenario.start_J, qj, scenario.end_J])
    if pin_schedule is not None:
        a = pin_schedule
    else:
        a = convexify._snap_weights(
            np.asarray(conv.variables["a"].value, dtype=float))
    sched = np.vstack([a, a[-1:]])
    return DiscretePath(dt=delta, t=np.arange(n0 + 1) * delta,
                        pos_S=pos_s, pos_J=pos_j, sched=sched)


def _extrapolate_td(ref: DiscretePath, cand: DiscretePath, gamma: float,
                    scenario: Scenario, n0: int) -> DiscretePath | None:
    """Extrapolated slot path, or None when speed or safety break."""
    delta = scenario.T / n0
    pos_s = ref.pos_S + gamma * (cand.pos_S - ref.pos_S)
    pos_j = ref.pos_J + gamma * (cand.pos_J - ref.pos_J)
    vmax = scenario.V * delta + 1e-9
    if (np.any(np.linalg.norm(np.diff(pos_s, axis=0), axis=1) > vmax)
            or np.any(np.linalg.norm(np.diff(pos_j, axis=0), axis=1) > vmax)):
        return None
    if np.any(np.linalg.norm(pos_s - pos_j, axis=1) < scenario.d_min):
        return None
    a = np.clip(ref.sched + gamma * (cand.sched - ref.sched), 0.0, 1.0)
    sums = np.sum(a, axis=1, keepdims=True)
    if np.any(sums <= 0):
        return None
    return DiscretePath(dt=ref.dt, t=ref.t.copy(), pos_S=pos_s, pos_J=pos_j,
                        sched=a / sums)


def _round_sched_td(path: DiscretePath, n0: int) -> np.ndarray:
    a = np.zeros_like(path.sched[:n0])
    a[np.arange(n0), np.argmax(path.sched[:n0], axis=1)] = 1.0
    return a


def _td_loop(path: DiscretePath, scenario: Scenario, cfg: TdConfig,
             pin_schedule, timings: dict):
    trace = [_true_objective(path, scenario)]
    status = "max_iter"
    counts = {}
    solver_cfg = subsolver.SolverConfig(solver=cfg.solver)
    last_round_probe = -10

    def step(ref_path, verify_unused):
        t0 = time.perf_counter()
        conv = _build_td_problem(ref_path, scenario, cfg.n0, pin_schedule)
        timings["build"] += time.perf_counter() - t0
        warm = {"qs": ref_path.pos_S[1:cfg.n0] / scenario.alt,
                "qj": ref_path.pos_J[1:cfg.n0] / scenario.alt}
        if pin_schedule is None:
            warm["a"] = ref_path.sched[:cfg.n0]
        warm_obj = _surrogate_objective(ref_path, scenario, cfg.n0)
        sol = subsolver.solve(conv, warm_values=warm, warm_objective=warm_obj,
                              config=solver_cfg)
        timings["solve"] += sol.wallclock
        if sol.status == "infeasible" or sol.used_warm_start:
            return None, None, sol, conv
        t1 = time.perf_counter()
        cand = _decode_td(conv, ref_path, scenario, cfg.n0, pin_schedule)
        obj = _true_objective(cand, scenario)
        timings["evaluate"] += time.perf_counter() - t1
        return cand, obj, sol, conv

    for r in range(cfg.max_outer):
        candidate, obj, sol, conv = step(path, r == 0)
        counts = dict(n_solver_vars=conv.n_solver_vars,
                      n_solver_cons=conv.n_solver_cons)
        if candidate is None:
            if sol.status == "infeasible":
                status = "infeasible"
            else:
                status = "converged" if sol.solver_name else "max_iter"
            break

        t1 = time.perf_counter()
        best_ext, best_obj = None, obj
        for gamma in (1.5, 2.0, 3.0, 5.0, 8.0, 13.0):
            ext = _extrapolate_td(path, candidate, gamma, scenario, cfg.n0)
            if ext is None:
                continue
            ext_obj = _true_objective(ext, scenario)
            if ext_obj > best_obj:
                best_ext, best_obj = ext, ext_obj
        if best_ext is not None:
            candidate, obj = best_ext, best_obj
        timings["evaluate"] += time.perf_counter() - t1

        increment = obj - trace[-1]
        top = np.min(np.max(candidate.sched[:cfg.n0], axis=1))
        if (pin_schedule is None and top > 0.75 and increment < 1.0
                and r - last_round_probe >= 3):
            last_round_probe = r
            a_round = _round_sched_td(candidate, cfg.n0)
            probe_ref = DiscretePath(dt=candidate.dt, t=candidate.t.copy(),
                                     pos_S=candidate.pos_S.copy(),
                                     pos_J=candidate.pos_J.copy(),
                                     sched=np.vstack([a_round, a_round[-1:]]))
            probe, probe_obj, probe_sol, _ = step(probe_ref, False)
            if probe is not None and probe_obj >= obj:
                log.info("td schedule round probe accepted: %.6f -> %.6f",
                         obj, probe_obj)
                candidate, obj = probe, probe_obj

        if obj < trace[-1] - 1e-6:
            if abs(obj - trace[-1]) < cfg.eps:
                status = "converged"
                break
            status = "stalled"
            break
        path = candidate
        trace.append(obj)
        if abs(trace[-1] - trace[-2]) < cfg.eps:
            status = "converged"
            break
    return path, trace, status, counts


def run_td(scenario: Scenario, cfg: TdConfig | None = None):
    """Optimize the slotted benchmark; returns (DiscretePath, SolveReport)."""
    cfg = cfg or TdConfig()
    timings = {"initialize": 0.0, "build": 0.0, "solve": 0.0,
               "evaluate": 0.0, "round": 0.0, "total": 0.0}
    t_start = time.perf_counter()
    path = _initial_path(scenario, cfg.n0)
    timings["initialize"] = time.perf_counter() - t_start

    path, trace, status, counts = _td_loop(path, scenario, cfg, None, timings)
    pre_round = trace[-1]
    round_trace: list = []
    if cfg.round_schedule:
        t0 = time.perf_counter()
        a = np.zeros_like(path.sched[:cfg.n0])
        a[np.arange(cfg.n0), np.argmax(path.sched[:cfg.n0], axis=1)] = 1.0
        rounded = DiscretePath(dt=path.dt, t=path.t.copy(),
                               pos_S=path.pos_S.copy(), pos_J=path.pos_J.copy(),
                               sched=np.vstack([a, a[-1:]]))
        path, round_trace, r_status, _ = _td_loop(
            rounded, scenario, cfg, a, timings)
        if r_status == "infeasible":
            status = "infeasible"
        timings["round"] += time.perf_counter() - t0

    per_user = validate.riemann_throughput(path, scenario)
    timings["total"] = time.perf_counter() - t_start
    audit = validate.audit(path, scenario,
                           reported_throughput=per_user).to_dict()
    report = SolveReport(
        mode="td", status=status, converged=(status == "converged"),
        objective=float(np.min(per_user)), per_user=per_user.tolist(),
        objective_trace=[float(x) for x in trace],
        round_trace=[float(x) for x in round_trace],
        pre_round_objective=float(pre_round),
        iters=len(trace) - 1, m_var=counts.get("n_solver_vars", 0),
        m_con=counts.get("n_solver_cons", 0),
        n_solver_vars=counts.get("n_solver_vars", 0),
        n_solver_cons=counts.get("n_solver_cons", 0),
        wallclock=timings, audit=audit)
    return path, report
