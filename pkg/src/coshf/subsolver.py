"""Solve one assembled convex subproblem to interior-point tolerance.

Thin contract layer over conic solvers (Clarabel first, SCS as fallback):
deterministic for fixed inputs, never regresses below a feasible warm start,
and rejects returned points whose primal violations exceed tolerance (the
warm start is restored instead). Residuals are measured on the tagged
constraints in the problem's own scaled units.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .convexify import ConvexProblem

__all__ = ["SubproblemSolution", "SolverConfig", "solve"]

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7         # affine constraints
CONCAVE_TOL = 1e-6      # concave >= and second-order cone constraints
KKT_TOL = 1e-7
MAX_INNER_ITER = 200
ACCEPT_RATIO = 10.0     # inaccurate solves within 10x tolerance are usable


@dataclass
class SolverConfig:
    feas_tol: float = FEAS_TOL
    kkt_tol: float = KKT_TOL
    max_iter: int = MAX_INNER_ITER
    solver: str | None = None      # None picks the default chain


@dataclass
class SubproblemSolution:
    status: str                    # optimal | max_iter | infeasible
    objective: float | None
    kkt_residual: float
    wallclock: float
    max_violation: float
    violated_name: str | None = None
    solver_name: str | None = None
    num_iters: int | None = None
    used_warm_start: bool = False


def _violations(tagged) -> tuple[float, str | None, float]:
    """(worst violation, its constraint name, worst violation/tolerance).

    Tolerances are per tag (affine vs concave/soc) and scale with the
    magnitude of the constraint sides; conic reformulations of cubic terms
    cannot do better than relative accuracy.
    """
    worst, name, ratio = 0.0, None, 0.0
    for cname, tag, con in tagged:
        try:
            v = float(np.max(con.violation()))
        except Exception:
            continue
        scale = 1.0
        for arg in con.args:
            val = arg.value
            if val is not None:
                scale = max(scale, float(np.max(np.abs(val))))
        tol = (CONCAVE_TOL if tag in ("concave-ge", "soc") else FEAS_TOL) * scale
        if v / tol > ratio:
            ratio = v / tol
        if v > worst:
            worst, name = v, cname
    return worst, name, ratio


def _solver_chain(preferred: str | None):
    chain = []
    if preferred:
        chain.append(preferred.upper())
    for s in ("CLARABEL", "SCS"):
        if s not in chain and s in cp.installed_solvers():
            chain.append(s)
    return chain


def _solve_kwargs(solver: str, config: SolverConfig) -> dict:
    if solver == "CLARABEL":
        return dict(max_iter=config.max_iter,
                    tol_feas=min(1e-9, config.feas_tol),
                    tol_gap_abs=min(1e-9, config.kkt_tol),
                    tol_gap_rel=min(1e-9, config.kkt_tol))
    if solver == "SCS":
        return dict(max_iters=100_000, eps=1e-9)
    return {}


def _restore_warm(conv: ConvexProblem, warm_values: dict | None) -> None:
    if warm_values is None:
        return
    for name, arr in warm_values.items():
        if name in conv.variables:
            conv.variables[name].value = np.asarray(arr, dtype=float)


def solve(conv: ConvexProblem, warm_values: dict | None = None,
          warm_objective: float | None = None,
          config: SolverConfig | None = None) -> SubproblemSolution:
    """Solve an assembled subproblem; fall back to the warm start on failure.

    ``warm_values`` maps variable names to arrays of a feasible point (the
    SCA reference). If every solver in the chain fails, returns a point
    violating tolerances badly, or lands below ``warm_objective``, the warm
    point is restored into the problem variables and flagged.
    """
    config = config or SolverConfig()
    conv.audit_convexity()
    problem = conv.problem

    t0 = time.perf_counter()
    accepted = None          # (status, value, solver, iters, viol, name, ratio)
    saw_infeasible = False
    for solver in _solver_chain(config.solver):
        try:
            problem.solve(solver=solver, **_solve_kwargs(solver, config))
        except (cp.error.SolverError, ValueError) as exc:
            log.debug("solver %s failed: %s", solver, exc)
            continue
        iters = getattr(problem.solver_stats, "num_iters", None)
        if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            saw_infeasible = True
            continue
        if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            log.debug("solver %s returned status %s", solver, problem.status)
            continue
        viol, vname, ratio = _violations(conv.tagged)
        if ratio > ACCEPT_RATIO:
            log.debug("solver %s point violates %s by %.3g; rejected",
                      solver, vname, viol)
            continue
        status = "optimal" if (problem.status == cp.OPTIMAL
                               and ratio <= 1.0) else "max_iter"
        accepted = (status, float(problem.value), solver, iters, viol, vname,
                    ratio)
        break
    wall = time.perf_counter() - t0

    if accepted is None:
        _restore_warm(conv, warm_values)
        viol, vname, _ = _violations(conv.tagged)
        status = "infeasible" if saw_infeasible else "max_iter"
        if status == "max_iter" and warm_objective is None:
            status = "infeasible"
        return SubproblemSolution(
            status=status, objective=warm_objective,
            kkt_residual=float("inf"), wallclock=wall, max_violation=viol,
            violated_name=vname, solver_name=None, num_iters=None,
            used_warm_start=warm_values is not None)

    status, value, solver_used, iters, viol, vname, _ = accepted
    if warm_objective is not None and value < warm_objective - 1e-9:
        # a feasible warm start must never be regressed from
        log.debug("solver objective %.9g below warm start %.9g; keeping warm",
                  value, warm_objective)
        _restore_warm(conv, warm_values)
        return SubproblemSolution(
            status="max_iter", objective=warm_objective, kkt_residual=viol,
            wallclock=wall, max_violation=viol, violated_name=vname,
            solver_name=solver_used, num_iters=iters, used_warm_start=True)

    return SubproblemSolution(
        status=status, objective=value, kkt_residual=viol, wallclock=wall,
        max_violation=viol, violated_name=vname, solver_name=solver_used,
        num_iters=iters)
