"""Hover-and-fly trajectories for the UAV pair.

A trajectory is a finite list of synchronized waypoints per UAV:

    start, leg-0 turning points, hover 1, leg-1 turning points, ..., hover K,
    leg-K turning points, end

(K hover point pairs, N turning points on each of the K+1 legs). Segment
(i, j) runs from point (i, j) to the next point in sequence; both UAVs
traverse it simultaneously, the one with the longer chord at maximum speed V
and the other proportionally slower. Scheduling weights attach one row per
hover phase and per flight segment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from . import channel
from .scenario import Scenario

__all__ = [
    "CoShfTrajectory", "SegmentIndex", "DiscretePath", "gauss_legendre_01",
    "point_sequence", "segment_points", "segment_lengths", "segment_length",
    "segment_times", "segment_time", "segment_speeds", "position_at",
    "total_time", "min_pair_distance", "min_pair_distance_all",
    "hover_rates", "throughput", "to_discrete",
    "traj_to_dict", "traj_from_dict", "save_trajectory", "load_trajectory",
    "check_invariants",
]

ZERO_CHORD = 1e-6  # m; below this a segment is treated as degenerate


class SegmentIndex(NamedTuple):
    """Flight segment (leg i, sub-segment j), i in 0..K, j in 0..N."""
    i: int
    j: int

    def flat(self, N: int) -> int:
        return self.i * (N + 1) + self.j


def iter_segments(K: int, N: int) -> Iterator[SegmentIndex]:
    for i in range(K + 1):
        for j in range(N + 1):
            yield SegmentIndex(i, j)


def gauss_legendre_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass
class CoShfTrajectory:
    """Decision object: hover pairs, turning points, durations, scheduling.

    Shapes (K users, N turning points per leg, S = (K+1)(N+1) segments):
      hover_S, hover_J   (K, 2) m
      turn_S, turn_J     (K+1, N, 2) m
      hover_dur          (K,) s, nonnegative
      sched_hover        (K, K), row i = weights over users while hovering at i
      sched_fly          (K+1, N+1, K), row (i, j) = weights on segment (i, j)

    Endpoints are implicit: the scenario's start/end points pin the sequence.
    """

    hover_S: np.ndarray
    hover_J: np.ndarray
    turn_S: np.ndarray
    turn_J: np.ndarray
    hover_dur: np.ndarray
    sched_hover: np.ndarray
    sched_fly: np.ndarray

    def __post_init__(self):
        self.hover_S = np.asarray(self.hover_S, dtype=float)
        self.hover_J = np.asarray(self.hover_J, dtype=float)
        K = self.hover_S.shape[0]
        self.turn_S = np.asarray(self.turn_S, dtype=float).reshape(K + 1, -1, 2)
        self.turn_J = np.asarray(self.turn_J, dtype=float).reshape(K + 1, -1, 2)
        self.hover_dur = np.asarray(self.hover_dur, dtype=float)
        self.sched_hover = np.asarray(self.sched_hover, dtype=float)
        self.sched_fly = np.asarray(self.sched_fly, dtype=float).reshape(
            K + 1, -1, K)

    @property
    def K(self) -> int:
        return self.hover_S.shape[0]

    @property
    def N(self) -> int:
        return self.turn_S.shape[1]

    @property
    def n_segments(self) -> int:
        return (self.K + 1) * (self.N + 1)

    def copy(self) -> "CoShfTrajectory":
        return CoShfTrajectory(
            hover_S=self.hover_S.copy(), hover_J=self.hover_J.copy(),
            turn_S=self.turn_S.copy(), turn_J=self.turn_J.copy(),
            hover_dur=self.hover_dur.copy(),
            sched_hover=self.sched_hover.copy(),
            sched_fly=self.sched_fly.copy())

    def sched_fly_flat(self) -> np.ndarray:
        """Flight scheduling as (S, K), rows ordered by flat segment index."""
        return self.sched_fly.reshape(self.n_segments, self.K)


@dataclass
class DiscretePath:
    """Uniformly sampled pair trajectory with per-sample scheduling weights."""

    dt: float
    t: np.ndarray        # (M,) sample times, last sample at the total time
    pos_S: np.ndarray    # (M, 2)
    pos_J: np.ndarray    # (M, 2)
    sched: np.ndarray    # (M, K) weights

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        m = len(self.t)
        if not (len(self.pos_S) == len(self.pos_J) == len(self.sched) == m):
            raise ValueError("sample arrays must have equal length")

    @property
    def K(self) -> int:
        return self.sched.shape[1]

    def active_user(self) -> np.ndarray:
        """Argmax user per sample (ties resolve to the lowest index)."""
        return np.argmax(self.sched, axis=1)


# -- geometry ----------------------------------------------------------------


def point_sequence(traj: CoShfTrajectory, u: str, scenario: Scenario) -> np.ndarray:
    """Ordered waypoints of UAV ``u`` ('S' or 'J'), shape ((K+1)(N+1)+1, 2)."""
    if u == "S":
        hover, turn = traj.hover_S, traj.turn_S
        start, end = scenario.start_S, scenario.end_S
    elif u == "J":
        hover, turn = traj.hover_J, traj.turn_J
        start, end = scenario.start_J, scenario.end_J
    else:
        raise ValueError(f"unknown UAV {u!r}")
    K, N = traj.K, traj.N
    pts = np.empty(((K + 1) * (N + 1) + 1, 2), dtype=float)
    pts[0] = start
    for i in range(K + 1):
        base = i * (N + 1)
        if i > 0:
            pts[base] = hover[i - 1]
        pts[base + 1: base + 1 + N] = turn[i]
    pts[-1] = end
    return pts


def segment_points(traj, scenario):
    """(starts_S, ends_S, starts_J, ends_J), each (S, 2)."""
    ps = point_sequence(traj, "S", scenario)
    pj = point_sequence(traj, "J", scenario)
    return ps[:-1], ps[1:], pj[:-1], pj[1:]


def segment_lengths(traj, scenario):
    """Chord lengths per segment, (d_S, d_J) each of shape (S,)."""
    a_s, b_s, a_j, b_j = segment_points(traj, scenario)
    return (np.linalg.norm(b_s - a_s, axis=1),
            np.linalg.norm(b_j - a_j, axis=1))


def segment_length(traj, u: str, seg: SegmentIndex, scenario) -> float:
    pts = point_sequence(traj, u, scenario)
    s = seg.flat(traj.N)
    return float(np.linalg.norm(pts[s + 1] - pts[s]))


def segment_times(traj, scenario) -> np.ndarray:
    """Flight duration per segment: max chord length over the pair, over V."""
    d_s, d_j = segment_lengths(traj, scenario)
    return np.maximum(d_s, d_j) / scenario.V


def segment_time(traj, seg: SegmentIndex, scenario) -> float:
    return float(segment_times(traj, scenario)[seg.flat(traj.N)])


def segment_speeds(traj, seg: SegmentIndex, scenario) -> tuple[float, float]:
    """Per-UAV speeds on a segment; the longer chord moves at exactly V."""
    d_s, d_j = segment_lengths(traj, scenario)
    s = seg.flat(traj.N)
    ds, dj = float(d_s[s]), float(d_j[s])
    dmax = max(ds, dj)
    if dmax == 0.0:
        return 0.0, 0.0
    v = scenario.V
    return (v if ds == dmax else v * ds / dmax,
            v if dj == dmax else v * dj / dmax)


def position_at(traj, u: str, seg: SegmentIndex, z: float, scenario) -> np.ndarray:
    """Affine interpolation q(z) = q_start + z (q_end - q_start), z in [0, 1]."""
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z out of range: {z}")
    pts = point_sequence(traj, u, scenario)
    s = seg.flat(traj.N)
    return pts[s] + z * (pts[s + 1] - pts[s])


def total_time(traj, scenario) -> float:
    """Hover durations plus flight durations; constrained to be <= T."""
    return float(np.sum(traj.hover_dur) + np.sum(segment_times(traj, scenario)))


def _pair_min_dist2(a_rel: np.ndarray, g_rel: np.ndarray) -> np.ndarray:
    """Exact min over z in [0,1] of |a + z g|^2, vectorized over rows."""
    aa = np.sum(a_rel * a_rel, axis=-1)
    ag = np.sum(a_rel * g_rel, axis=-1)
    gg = np.sum(g_rel * g_rel, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_v = np.where(gg > 0.0, -ag / np.where(gg > 0.0, gg, 1.0), 0.0)
    z_v = np.clip(z_v, 0.0, 1.0)
    return aa + 2.0 * z_v * ag + z_v * z_v * gg


def min_pair_distance_all(traj, scenario) -> np.ndarray:
    """Per-segment exact minimum inter-UAV distance, shape (S,)."""
    a_s, b_s, a_j, b_j = segment_points(traj, scenario)
    rel0 = a_s - a_j
    rel1 = b_s - b_j
    return np.sqrt(_pair_min_dist2(rel0, rel1 - rel0))


def min_pair_distance(traj, seg: SegmentIndex, scenario) -> float:
    """Closed-form minimum over z of |q_S(z) - q_J(z)| on a segment."""
    return float(min_pair_distance_all(traj, scenario)[seg.flat(traj.N)])


# -- throughput ---------------------------------------------------------------


def hover_rates(traj, scenario) -> np.ndarray:
    """Clamped secrecy rate of each user at each hover pair, (K_hover, K_user)."""
    K = traj.K
    out = np.empty((K, K))
    for k in range(K):
        out[:, k] = channel.secrecy_rate(traj.hover_S, traj.hover_J, k, scenario)
    return out


def _bisect_root(g, lo: float, hi: float, iters: int = 60) -> float:
    """Sign-change root of a scalar continuous function on [lo, hi]."""
    f_lo = g(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (g(mid) >= 0.0) == (f_lo >= 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _clamped_segment_integral(p0s, p1s, p0j, p1j, k, scenario,
                              nodes, weights) -> float:
    """z-integral of the clamped secrecy rate over one crossing segment.

    The unclamped rate difference changes sign inside the segment; the
    integration interval is split at the bisected roots so the quadrature
    only ever sees smooth pieces.
    """
    def gap(z):
        z = np.asarray(z)
        qs = p0s + z[..., None] * (p1s - p0s)
        qj = p0j + z[..., None] * (p1j - p0j)
        r_user, r_eve = channel.rate_pair(qs, qj, k, scenario)
        return r_user - r_eve

    probes = np.linspace(0.0, 1.0, 33)
    vals = gap(probes)
    cuts = [0.0]
    for i in range(len(probes) - 1):
        if (vals[i] >= 0.0) != (vals[i + 1] >= 0.0):
            cuts.append(_bisect_root(lambda z: float(gap(np.array(z))),
                                     probes[i], probes[i + 1]))
    cuts.append(1.0)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        z = a + nodes * (b - a)
        total += (b - a) * float(np.sum(weights * np.maximum(gap(z), 0.0)))
    return total


def throughput(traj, scenario, quad_order: int = 8) -> np.ndarray:
    """Per-user secrecy throughput in bits/Hz.

    Hover phases contribute a_{i,k} t_i R_k exactly; each flight segment
    contributes a_{i,j,k} dt_{i,j} times the z-integral of the pointwise
    clamped secrecy rate, by fixed-order Gauss-Legendre quadrature.
    Segments where the clamp changes sign are split at the crossing so every
    quadrature panel sees a smooth integrand; zero-length segments are
    skipped.
    """
    K = traj.K
    rates_h = hover_rates(traj, scenario)
    out = np.sum(traj.sched_hover * traj.hover_dur[:, None] * rates_h, axis=0)

    dt_seg = segment_times(traj, scenario)
    live = dt_seg > 0.0
    if not np.any(live):
        return out
    a_s, b_s, a_j, b_j = segment_points(traj, scenario)
    nodes, weights = gauss_legendre_01(quad_order)
    a_fly = traj.sched_fly_flat()
    # positions at quadrature nodes and endpoints: (S, Q+2, 2)
    zs = np.concatenate(([0.0], nodes, [1.0]))
    pos_s = a_s[:, None, :] + zs[None, :, None] * (b_s - a_s)[:, None, :]
    pos_j = a_j[:, None, :] + zs[None, :, None] * (b_j - a_j)[:, None, :]
    for k in range(K):
        r_user, r_eve = channel.rate_pair(pos_s, pos_j, k, scenario)
        gap = r_user - r_eve                                   # (S, Q+2)
        integral = np.maximum(gap[:, 1:-1], 0.0) @ weights
        crossing = np.flatnonzero(live & (np.min(gap, axis=1) < 0.0)
                                  & (np.max(gap, axis=1) > 0.0)
                                  & (a_fly[:, k] > 0.0))
        for s in crossing:
            integral[s] = _clamped_segment_integral(
                a_s[s], b_s[s], a_j[s], b_j[s], k, scenario, nodes, weights)
        out[k] += np.sum(a_fly[live, k] * dt_seg[live] * integral[live])
    return out


# -- time parametrization ------------------------------------------------------


def _phase_table(traj, scenario):
    """Temporal phases as (duration, type, payload) in flight order.

    type 'seg': payload (s_flat,), positions interpolate the segment;
    type 'hov': payload (i,), positions are the hover pair.
    """
    K, N = traj.K, traj.N
    dt_seg = segment_times(traj, scenario)
    phases = []
    for i in range(K + 1):
        for j in range(N + 1):
            s = i * (N + 1) + j
            phases.append((float(dt_seg[s]), "seg", s))
        if i < K:
            phases.append((float(traj.hover_dur[i]), "hov", i))
    return phases


def to_discrete(traj, scenario, dt: float, quad_order: int = 8) -> DiscretePath:
    """Sample both UAV positions and scheduling at multiples of ``dt``.

    Honors per-segment speeds (simultaneous arrival; the longer chord moves
    at V) and hover intervals; the final sample lands exactly at the total
    mission time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    phases = _phase_table(traj, scenario)
    durations = np.array([p[0] for p in phases])
    ends = np.cumsum(durations)
    total = float(ends[-1]) if len(ends) else 0.0
    times = np.arange(0.0, total, dt)
    if len(times) == 0 or times[-1] < total:
        times = np.append(times, total)

    a_s, b_s, a_j, b_j = segment_points(traj, scenario)
    M = len(times)
    pos_s = np.empty((M, 2))
    pos_j = np.empty((M, 2))
    sched = np.empty((M, traj.K))
    starts = ends - durations
    idx = np.minimum(np.searchsorted(ends, times, side="right"),
                     len(phases) - 1)
    for m, (t, p) in enumerate(zip(times, idx)):
        dur, kind, payload = phases[p]
        frac = 0.0 if dur == 0.0 else (t - starts[p]) / dur
        frac = min(max(frac, 0.0), 1.0)
        if kind == "seg":
            s = payload
            pos_s[m] = a_s[s] + frac * (b_s[s] - a_s[s])
            pos_j[m] = a_j[s] + frac * (b_j[s] - a_j[s])
            sched[m] = traj.sched_fly_flat()[s]
        else:
            i = payload
            pos_s[m] = traj.hover_S[i]
            pos_j[m] = traj.hover_J[i]
            sched[m] = traj.sched_hover[i]
    return DiscretePath(dt=dt, t=times, pos_S=pos_s, pos_J=pos_j, sched=sched)


# -- invariants and serialization ----------------------------------------------


def check_invariants(traj, scenario, tol: float = 1e-6) -> None:
    """Raise ValueError if scheduling sums, durations or shapes are off."""
    if traj.K != scenario.K:
        raise ValueError("trajectory K does not match scenario")
    if traj.N != scenario.N:
        raise ValueError("trajectory N does not match scenario")
    if np.any(traj.hover_dur < -tol):
        raise ValueError("negative hover duration")
    row_h = np.sum(traj.sched_hover, axis=1)
    row_f = np.sum(traj.sched_fly_flat(), axis=1)
    if np.max(np.abs(row_h - 1.0)) > tol or np.max(np.abs(row_f - 1.0)) > tol:
        raise ValueError("scheduling group does not sum to 1")
    if np.any(traj.sched_hover < -tol) or np.any(traj.sched_fly < -tol):
        raise ValueError("negative scheduling weight")
    if total_time(traj, scenario) > scenario.T * (1.0 + tol) + tol:
        raise ValueError("total time exceeds mission budget")


def traj_to_dict(traj: CoShfTrajectory) -> dict:
    return {
        "hover_S_m": traj.hover_S.tolist(),
        "hover_J_m": traj.hover_J.tolist(),
        "turn_S_m": traj.turn_S.tolist(),
        "turn_J_m": traj.turn_J.tolist(),
        "hover_dur_s": traj.hover_dur.tolist(),
        "sched_hover": traj.sched_hover.tolist(),
        "sched_fly": traj.sched_fly.tolist(),
    }


def traj_from_dict(doc: dict) -> CoShfTrajectory:
    return CoShfTrajectory(
        hover_S=np.asarray(doc["hover_S_m"], dtype=float),
        hover_J=np.asarray(doc["hover_J_m"], dtype=float),
        turn_S=np.asarray(doc["turn_S_m"], dtype=float),
        turn_J=np.asarray(doc["turn_J_m"], dtype=float),
        hover_dur=np.asarray(doc["hover_dur_s"], dtype=float),
        sched_hover=np.asarray(doc["sched_hover"], dtype=float),
        sched_fly=np.asarray(doc["sched_fly"], dtype=float),
    )


def save_trajectory(traj, path) -> None:
    Path(path).write_text(
        json.dumps(traj_to_dict(traj), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_trajectory(path) -> CoShfTrajectory:
    return traj_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
