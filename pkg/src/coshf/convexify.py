"""Convex surrogate construction for one SCA iteration.

Given a reference trajectory, every nonconvex piece of the max-min secrecy
throughput problem is replaced by a tight concave lower bound or an affine
inner constraint, frozen at the reference:

  * judgment matrices J freeze the secrecy-rate clamp sign,
  * tangent bounds on -log2(1+x) and log2(1+1/x) give rate bounds in terms
    of the two SNRs,
  * the arithmetic-geometric mean inequality decouples distance products,
  * reciprocal squared distances are convexified through affine minorants
    of the squared distance (kept nonnegative by kappa constraints),
  * products a*t*h collapse through a cubic three-term mean bound,
  * the flight-time max picks one UAV per segment via a frozen indicator,
  * the inter-UAV squared distance along a segment is linearized and its
    segment minimum enforced at {0, 1, reference vertex}.

All geometry inside the subproblem is nondimensionalized by the altitude H
(solver conditioning); the public API stays in meters. Every bound record
carries plain-numpy evaluators so tightness and domination can be checked
independently of the assembled cvxpy problem.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from . import channel, trajectory
from .scenario import Scenario
from .trajectory import CoShfTrajectory, SegmentIndex, gauss_legendre_01

__all__ = [
    "EPS_REF", "InfeasibleReferenceError",
    "RateBoundCoeffs", "HoverRateBound", "HoverTermBound", "FlyTermBound",
    "CollisionBound", "Surrogate", "ConvexProblem",
    "judgment_hover", "judgment_fly", "hover_rate_bound", "hover_term_bound",
    "fly_term_bound", "collision_bound", "assemble",
    "variable_count", "constraint_count",
]

log = logging.getLogger(__name__)

EPS_REF = 1e-4     # floor for reference values entering mean-bound constants
PEN_SWITCH = 0.05  # below this (1 - a) reference, penalties use the tangent form
_LN2 = math.log(2.0)


class InfeasibleReferenceError(RuntimeError):
    """The reference point violates the true constraints beyond tolerance."""


def variable_count(K: int, N: int) -> int:
    """Subproblem variable count of the complexity model, as configured."""
    return 2 * N * K * K + 3 * K * K + 6 * N * K + 6 * K + 2 * N


def constraint_count(K: int, N: int) -> int:
    """Subproblem constraint count of the complexity model, as configured."""
    return 6 * N * K * K + 8 * K * K + 12 * N * K + 13 * K + 6 * N + 3


def _floor_ref(value: float, name: str, where: str,
               eps_ref: float = EPS_REF) -> float:
    if value < eps_ref:
        log.debug("reference %s=%.3g below floor at %s; using %.0e",
                  name, value, where, eps_ref)
        return eps_ref
    return value


# ---------------------------------------------------------------------------
# rate bound coefficients (shared by hover, fly nodes and TD slots)
# ---------------------------------------------------------------------------


@dataclass
class RateBoundCoeffs:
    """Frozen constants bounding the secrecy rate near one reference pair.

    Valid on the region where both affine minorants are positive; there the
    bound  J * (B1 - h(q_S, q_J))  is concave and lower-bounds the clamped
    secrecy rate, with equality at the reference.
    """

    J: int
    gamma_k: float
    gamma_e: float
    A1: float
    A2: float
    B1: float
    E1: float
    E2t: float          # E2 / H^2
    F1t: float          # F1 / H^4
    F2t: float          # F2 / H^4
    rate_gap_ref: float  # unclamped R_user - R_eve at the reference
    # coefficients of h over reference-normalized quantities (J folded in):
    # each squared distance and each affine minorant is divided by its own
    # reference value, keeping every cone argument near one
    c_dS2: float
    c_dS4: float
    c_mJ2: float
    c_mSe2: float
    c_dJ4: float
    c_mSe1: float
    # normalized affine minorants: m = g . q/H + c, equal to one at the ref
    gJk: np.ndarray
    cJk: float
    gSe: np.ndarray
    cSe: float
    # reference scales of the directly-used squared distances (in H^2 units)
    sS: float           # d_k^2(q_S_ref) / H^2
    sJe: float          # d_e^2(q_J_ref) / H^2
    # geometry context
    H: float
    wk: np.ndarray
    we: np.ndarray

    def minorants(self, q_S, q_J):
        """Normalized minorants of d_k^2(q_J) and d_e^2(q_S); one at the ref."""
        qs = np.asarray(q_S, dtype=float) / self.H
        qj = np.asarray(q_J, dtype=float) / self.H
        m_jk = np.sum(self.gJk * qj, axis=-1) + self.cJk
        m_se = np.sum(self.gSe * qs, axis=-1) + self.cSe
        return m_jk, m_se

    def in_domain(self, q_S, q_J, margin: float = 0.0) -> bool:
        m_jk, m_se = self.minorants(q_S, q_J)
        ok_se = np.all(m_se > margin)
        ok_jk = True if self.c_mJ2 == 0.0 else np.all(m_jk > margin)
        return bool(ok_se and ok_jk)

    def h(self, q_S, q_J):
        """Convex trajectory-dependent part of the rate bound (J folded in)."""
        qs = np.asarray(q_S, dtype=float) / self.H
        qj = np.asarray(q_J, dtype=float) / self.H
        wk = self.wk / self.H
        we = self.we / self.H
        d2_s = (np.sum((qs - wk) ** 2, axis=-1) + 1.0) / self.sS
        d2_je = (np.sum((qj - we) ** 2, axis=-1) + 1.0) / self.sJe
        m_jk, m_se = self.minorants(q_S, q_J)
        out = (self.c_dS2 * d2_s + self.c_dS4 * d2_s ** 2
               + self.c_mSe2 / m_se ** 2 + self.c_dJ4 * d2_je ** 2
               + self.c_mSe1 / m_se)
        if self.c_mJ2 != 0.0:
            out = out + self.c_mJ2 / m_jk ** 2
        return out

    def rate_bound(self, q_S, q_J):
        """Concave lower bound on the clamped secrecy rate."""
        if self.J == 0:
            return 0.0 * np.sum(np.asarray(q_S, dtype=float), axis=-1)
        return self.B1 - self.h(q_S, q_J)


def _rate_coeffs(q_S_ref, q_J_ref, k: int, scenario: Scenario) -> RateBoundCoeffs:
    """Freeze rate-bound constants for user k at one reference pair."""
    sc = scenario
    H = sc.alt
    wk = sc.gu_pos[k]
    we = sc.eve_pos
    q_s = np.asarray(q_S_ref, dtype=float)
    q_j = np.asarray(q_J_ref, dtype=float)

    gamma_k = float(channel.snr_hover(q_s, q_j, k, sc))
    gamma_e = float(channel.snr_hover(q_s, q_j, "e", sc))
    rate_gap = math.log2(1.0 + gamma_k) - math.log2(1.0 + gamma_e)
    J = 1 if rate_gap >= 0.0 else 0

    a1_over_gk = gamma_k / (_LN2 * (1.0 + gamma_k))   # A1 / gamma_k
    A1 = a1_over_gk * gamma_k
    A2 = 1.0 / (_LN2 * (1.0 + gamma_e))
    B1 = a1_over_gk + A2 * gamma_e + rate_gap

    d2 = lambda q, w: float(np.sum((q - w) ** 2)) + sc.alt2
    d2_sk, d2_jk = d2(q_s, wk), d2(q_j, wk)
    d2_se, d2_je = d2(q_s, we), d2(q_j, we)
    H2, H4 = sc.alt2, sc.alt2 ** 2
    F1t = (d2_sk / H2) * (d2_jk / H2)
    F2t = (d2_se / H2) * (d2_je / H2)

    den = sc.beta0 * sc.P_J + sc.sigma2_eve * d2_je
    E1 = sc.beta0 ** 2 * sc.P_S * sc.P_J / den ** 2
    E2 = -E1 * d2_je + sc.beta0 * sc.P_S * d2_je / den
    E2t = E2 / H2

    pj_ratio = (sc.P_J * A1 / sc.P_S) if sc.P_S > 0 else 0.0
    c_dS2 = A1 * sc.sigma2_gu * H2 / (sc.beta0 * sc.P_S) if sc.P_S > 0 else 0.0
    c_dS4 = pj_ratio / (2.0 * F1t)
    c_mJ2 = pj_ratio * F1t / 2.0
    c_mSe2 = A2 * E1 * F2t / 2.0
    c_dJ4 = A2 * E1 / (2.0 * F2t)
    c_mSe1 = A2 * E2t

    # normalize every directly-used quantity by its reference value
    sS = d2_sk / H2
    sJe = d2_je / H2
    sJk = d2_jk / H2
    sSe = d2_se / H2
    c_dS2 *= sS
    c_dS4 *= sS * sS
    c_dJ4 *= sJe * sJe
    c_mJ2 /= sJk * sJk
    c_mSe2 /= sSe * sSe
    c_mSe1 /= sSe

    wk_t, we_t = wk / H, we / H
    gJk = 2.0 * (q_j / H - wk_t)
    cJk = float(-gJk @ wk_t - np.sum((q_j / H - wk_t) ** 2) + 1.0)
    gSe = 2.0 * (q_s / H - we_t)
    cSe = float(-gSe @ we_t - np.sum((q_s / H - we_t) ** 2) + 1.0)
    gJk, cJk = gJk / sJk, cJk / sJk
    gSe, cSe = gSe / sSe, cSe / sSe

    return RateBoundCoeffs(
        J=J, gamma_k=gamma_k, gamma_e=gamma_e, A1=A1, A2=A2, B1=B1,
        E1=E1, E2t=E2t, F1t=F1t, F2t=F2t, rate_gap_ref=rate_gap,
        c_dS2=J * c_dS2, c_dS4=J * c_dS4, c_mJ2=J * c_mJ2,
        c_mSe2=J * c_mSe2, c_dJ4=J * c_dJ4, c_mSe1=J * c_mSe1,
        gJk=gJk, cJk=cJk, gSe=gSe, cSe=cSe, sS=sS, sJe=sJe,
        H=H, wk=wk.copy(), we=we.copy())


def _h_at_reference(coeffs: RateBoundCoeffs) -> float:
    """Exact value of h at its own reference (zero when J = 0)."""
    if coeffs.J == 0:
        return 0.0
    a1_over_gk = coeffs.gamma_k / (_LN2 * (1.0 + coeffs.gamma_k))
    return a1_over_gk + coeffs.A2 * coeffs.gamma_e


# ---------------------------------------------------------------------------
# spec operation records
# ---------------------------------------------------------------------------


def judgment_hover(ref: CoShfTrajectory, i: int, k: int,
                   scenario: Scenario) -> int:
    """1 iff the unclamped secrecy rate at reference hover pair i is >= 0."""
    r_user, r_eve = channel.rate_pair(ref.hover_S[i], ref.hover_J[i], k, scenario)
    return 1 if float(r_user - r_eve) >= 0.0 else 0


def judgment_fly(ref: CoShfTrajectory, seg: SegmentIndex, k: int,
                 scenario: Scenario, nodes: np.ndarray) -> np.ndarray:
    """Per-quadrature-node clamp sign along reference segment ``seg``."""
    a_s, b_s, a_j, b_j = trajectory.segment_points(ref, scenario)
    s = seg.flat(ref.N)
    pos_s = a_s[s] + nodes[:, None] * (b_s[s] - a_s[s])
    pos_j = a_j[s] + nodes[:, None] * (b_j[s] - a_j[s])
    r_user, r_eve = channel.rate_pair(pos_s, pos_j, k, scenario)
    return (r_user - r_eve >= 0.0).astype(int)


@dataclass
class HoverRateBound:
    """Concave lower bound on R_k at hover pair i (the -h + B1*J form)."""

    i: int
    k: int
    coeffs: RateBoundCoeffs

    def value(self, q_S, q_J):
        return self.coeffs.rate_bound(q_S, q_J)

    def in_domain(self, q_S, q_J) -> bool:
        return self.coeffs.in_domain(q_S, q_J)


def _pen_pair(delta_r: float, y_r: float):
    """Constants of the convex upper bound on the bilinear product x*y,
    where x stands for (1 - a) near delta_r and y for the paired nonnegative
    quantity (a hover duration or a chord epigraph) near y_r.

    In the regular regime (both references above the floor) this is the
    mean-pair form x^2/(2 F3) + F3 y^2 / 2 with F3 = delta_r / y_r. Near the
    boundary that form needs floored references, whose curvature 1/F3 and
    reference gap destroy solver conditioning and bound tightness; there the
    tangent form  x y_r + y delta_r - delta_r y_r + (c(x-delta_r)+(y-y_r)/c)^2/4
    is used instead: globally valid for any (x, y), exactly tight at the
    reference, with curvature bounded by the balance constant c.
    """
    if (delta_r >= PEN_SWITCH and y_r >= EPS_REF
            and max(delta_r / y_r, y_r / delta_r) <= 1e3):
        return ("amgm", delta_r / y_r, 0.0)
    c = math.sqrt(max(y_r, 1.0))
    return ("tangent", delta_r / max(y_r, EPS_REF), c)


def _pen_value(mode: str, c_bal: float, delta_r: float, y_r: float,
               F3: float, x: float, y: float) -> float:
    if mode == "amgm":
        return x * x / (2.0 * F3) + F3 * y * y / 2.0
    return (x * y_r + y * delta_r - delta_r * y_r
            + 0.25 * (c_bal * (x - delta_r) + (y - y_r) / c_bal) ** 2)


@dataclass
class HoverTermBound:
    """Concave lower bound s_{i,k} on the product a_{i,k} t_i R_k.

    The cubic mean bound is evaluated in its scale-balanced form
    -a_r t_f h_f ((a/a_r + t/t_f + h/h_f)/3)^3, algebraically identical to
    -(a + C1 t + C2 h)^3 / (27 C1 C2). Terms whose reference weight sits
    below the floor are gated off (their reference value is negligible and
    the cubic constants would be ill-conditioned); penalty terms drop only
    when the weight is pinned to one, where the product is exactly linear.
    """

    i: int
    k: int
    coeffs: RateBoundCoeffs
    C1: float
    C2: float
    F3: float
    a_f: float
    t_f: float
    h_f: float
    delta_r: float
    t_r: float
    pen_mode: str
    c_bal: float
    gate: int
    pin_a: float | None
    floored: bool

    def value(self, a: float, t: float, q_S, q_J) -> float:
        c = self.coeffs
        if self.gate == 0:
            return 0.0
        h = float(c.h(q_S, q_J))
        mean = (a / self.a_f + t / self.t_f + h / self.h_f) / 3.0
        out = -self.a_f * self.t_f * self.h_f * mean ** 3 + c.B1 * t
        if self.pin_a != 1.0:
            # bounds B1 (1-a) t; exactly zero when a is pinned to one
            out -= c.B1 * _pen_value(self.pen_mode, self.c_bal, self.delta_r,
                                     self.t_r, self.F3, 1.0 - a, t)
        return out

    def in_domain(self, q_S, q_J) -> bool:
        return self.coeffs.in_domain(q_S, q_J)


def hover_rate_bound(ref: CoShfTrajectory, i: int, k: int,
                     scenario: Scenario) -> HoverRateBound:
    coeffs = _rate_coeffs(ref.hover_S[i], ref.hover_J[i], k, scenario)
    return HoverRateBound(i=i, k=k, coeffs=coeffs)


def hover_term_bound(ref: CoShfTrajectory, i: int, k: int, scenario: Scenario,
                     pin_a: float | None = None,
                     eps_ref: float = EPS_REF) -> HoverTermBound:
    coeffs = _rate_coeffs(ref.hover_S[i], ref.hover_J[i], k, scenario)
    a_ref = float(ref.sched_hover[i, k])
    t_ref = float(ref.hover_dur[i])
    h_ref = _h_at_reference(coeffs)
    where = f"hover ({i},{k})"
    floored = (t_ref < eps_ref or h_ref < eps_ref)
    a_f = max(a_ref, eps_ref)
    t_f = _floor_ref(t_ref, "t", where, eps_ref)
    h_f = _floor_ref(h_ref, "h", where, eps_ref)
    delta_r = 1.0 - a_ref
    pen_mode, F3, c_bal = _pen_pair(delta_r, t_ref)
    gate = coeffs.J if a_ref >= eps_ref else 0
    if coeffs.J and 0.0 < a_ref < EPS_REF:
        log.debug("hover term %s gated off: reference weight %.2e below floor",
                  where, a_ref)
    return HoverTermBound(i=i, k=k, coeffs=coeffs,
                          C1=a_f / t_f, C2=a_f / h_f, F3=F3,
                          a_f=a_f, t_f=t_f, h_f=h_f,
                          delta_r=delta_r, t_r=t_ref,
                          pen_mode=pen_mode, c_bal=c_bal, gate=gate,
                          pin_a=pin_a, floored=floored)


@dataclass
class FlyTermBound:
    """Concave lower bound v_{i,j,k} on a_{i,j,k} dt_{i,j} int R_k dz.

    The integral runs over the fixed quadrature nodes; ``lam`` freezes which
    UAV's chord realizes the segment flight time at the reference.
    """

    seg: SegmentIndex
    k: int
    node_coeffs: list           # RateBoundCoeffs per quadrature node
    nodes: np.ndarray
    weights: np.ndarray
    lam: int
    gate: int
    B2: float                   # (H/V) * sum_n w_n B1_n J_n
    C1: float
    C2: float
    F3: float
    a_f: float
    d_f: float
    ih_f: float
    delta_r: float
    d_r: float                  # scaled reference flight chord (max side)
    pen_mode: str
    c_bal: float
    pin_a: float | None
    unit_S: np.ndarray          # reference chord directions (zero if degenerate)
    unit_J: np.ndarray
    H: float
    V: float
    floored: bool

    def _chords(self, pS0, pS1, pJ0, pJ1):
        d_s = float(np.linalg.norm(np.asarray(pS1) - np.asarray(pS0))) / self.H
        d_j = float(np.linalg.norm(np.asarray(pJ1) - np.asarray(pJ0))) / self.H
        return d_s, d_j

    def integral_h(self, pS0, pS1, pJ0, pJ1) -> float:
        pS0, pS1 = np.asarray(pS0, float), np.asarray(pS1, float)
        pJ0, pJ1 = np.asarray(pJ0, float), np.asarray(pJ1, float)
        total = 0.0
        for w, z, c in zip(self.weights, self.nodes, self.node_coeffs):
            qs = pS0 + z * (pS1 - pS0)
            qj = pJ0 + z * (pJ1 - pJ0)
            if c.J:
                total += w * float(c.h(qs, qj))
        return total

    def value(self, a: float, pS0, pS1, pJ0, pJ1) -> float:
        if self.gate == 0:
            return 0.0
        d_s, d_j = self._chords(pS0, pS1, pJ0, pJ1)
        d_lam = (1 - self.lam) * d_s + self.lam * d_j
        ih = self.integral_h(pS0, pS1, pJ0, pJ1)
        mean = (a / self.a_f + d_lam / self.d_f + ih / self.ih_f) / 3.0
        cube = (self.H / self.V) * self.a_f * self.d_f * self.ih_f * mean ** 3
        d_lin = ((1 - self.lam) * float(self.unit_S @ (np.asarray(pS1) - np.asarray(pS0)))
                 + self.lam * float(self.unit_J @ (np.asarray(pJ1) - np.asarray(pJ0)))) / self.H
        out = -cube + self.B2 * d_lin
        if self.pin_a != 1.0:
            # amgm pairs with the frozen-indicator chord; the tangent form
            # pairs with the chord epigraph, binding at max(d_S, d_J)
            y = d_lam if self.pen_mode == "amgm" else max(d_s, d_j)
            out -= self.B2 * _pen_value(self.pen_mode, self.c_bal,
                                        self.delta_r, self.d_r, self.F3,
                                        1.0 - a, y)
        return out

    def in_domain(self, pS0, pS1, pJ0, pJ1) -> bool:
        pS0, pS1 = np.asarray(pS0, float), np.asarray(pS1, float)
        pJ0, pJ1 = np.asarray(pJ0, float), np.asarray(pJ1, float)
        for z, c in zip(self.nodes, self.node_coeffs):
            if c.J and not c.in_domain(pS0 + z * (pS1 - pS0),
                                       pJ0 + z * (pJ1 - pJ0)):
                return False
        return True


def fly_term_bound(ref: CoShfTrajectory, seg: SegmentIndex, k: int,
                   scenario: Scenario, quad_order: int = 8,
                   pin_a: float | None = None,
                   eps_ref: float = EPS_REF) -> FlyTermBound:
    nodes, weights = gauss_legendre_01(quad_order)
    a_s, b_s, a_j, b_j = trajectory.segment_points(ref, scenario)
    s = seg.flat(ref.N)
    pS0, pS1, pJ0, pJ1 = a_s[s], b_s[s], a_j[s], b_j[s]
    H, V = scenario.alt, scenario.V

    d_s = float(np.linalg.norm(pS1 - pS0))
    d_j = float(np.linalg.norm(pJ1 - pJ0))
    lam = 1 if d_j > d_s + 1e-9 else 0     # ties resolve to UAV-S
    d_max = max(d_s, d_j)

    coeffs = []
    int_h_ref = 0.0
    b2_sum = 0.0
    for w, z in zip(weights, nodes):
        c = _rate_coeffs(pS0 + z * (pS1 - pS0), pJ0 + z * (pJ1 - pJ0), k, scenario)
        coeffs.append(c)
        if c.J:
            int_h_ref += w * _h_at_reference(c)
            b2_sum += w * c.B1
    B2 = (H / V) * b2_sum

    a_ref = float(ref.sched_fly_flat()[s, k])
    gate = 1
    if (d_max < trajectory.ZERO_CHORD or a_ref < eps_ref
            or all(c.J == 0 for c in coeffs)):
        gate = 0

    unit_S = (pS1 - pS0) / d_s if d_s > trajectory.ZERO_CHORD else np.zeros(2)
    unit_J = (pJ1 - pJ0) / d_j if d_j > trajectory.ZERO_CHORD else np.zeros(2)

    d_max_t = d_max / H
    where = f"fly ({seg.i},{seg.j},{k})"
    floored = (d_max_t < eps_ref or int_h_ref < eps_ref)
    a_f = max(a_ref, eps_ref)
    d_f = _floor_ref(d_max_t, "d_max", where, eps_ref)
    ih_f = _floor_ref(int_h_ref, "int_h", where, eps_ref)
    delta_r = 1.0 - a_ref
    pen_mode, F3, c_bal = _pen_pair(delta_r, d_max_t)

    return FlyTermBound(seg=seg, k=k, node_coeffs=coeffs, nodes=nodes,
                        weights=weights, lam=lam, gate=gate, B2=B2,
                        C1=a_f / d_f, C2=a_f / ih_f, F3=F3,
                        a_f=a_f, d_f=d_f, ih_f=ih_f,
                        delta_r=delta_r, d_r=d_max_t,
                        pen_mode=pen_mode, c_bal=c_bal, pin_a=pin_a,
                        unit_S=unit_S, unit_J=unit_J, H=H, V=V,
                        floored=floored)


@dataclass
class CollisionBound:
    """Affine inner bound of the squared inter-UAV distance on a segment.

    D(z) = -|rel_ref(z)|^2 + 2 rel_ref(z) . rel(z) lower-bounds the true
    squared distance for every z; the constraint set samples z at the two
    endpoints and, when interior, the vertex of the reference quadratic.
    Units are meters squared.
    """

    seg: SegmentIndex
    rel0_ref: np.ndarray
    rel1_ref: np.ndarray
    z_star: float | None
    feasible: bool

    def candidates(self) -> list:
        zs = [0.0, 1.0]
        if self.z_star is not None:
            zs.append(self.z_star)
        return zs

    def ref_at(self, z: float) -> np.ndarray:
        return self.rel0_ref + z * (self.rel1_ref - self.rel0_ref)

    def value_at(self, z: float, rel0, rel1) -> float:
        """D(z) for decision relative endpoints rel0, rel1 (meters)."""
        ref = self.ref_at(z)
        rel = np.asarray(rel0, float) + z * (np.asarray(rel1, float)
                                             - np.asarray(rel0, float))
        return float(-ref @ ref + 2.0 * ref @ rel)

    def eta(self, rel0, rel1) -> float:
        """Minimum of D over the sampled candidate z set."""
        return min(self.value_at(z, rel0, rel1) for z in self.candidates())


def _ref_vertex(p0: np.ndarray, p1: np.ndarray, w=None) -> float | None:
    """Interior vertex of |p(z) - w|^2 along the reference segment, if any."""
    a = p0 if w is None else p0 - w
    g = (p1 - p0)
    gg = float(g @ g)
    if gg <= 0.0:
        return None
    z = -float(a @ g) / gg
    return z if 0.0 < z < 1.0 else None


def collision_bound(ref: CoShfTrajectory, seg: SegmentIndex,
                    scenario: Scenario) -> CollisionBound:
    a_s, b_s, a_j, b_j = trajectory.segment_points(ref, scenario)
    s = seg.flat(ref.N)
    rel0 = a_s[s] - a_j[s]
    rel1 = b_s[s] - b_j[s]
    feasible = max(float(rel0 @ rel0), float(rel1 @ rel1)) > 0.0
    z_star = _ref_vertex(rel0, rel1) if feasible else None
    return CollisionBound(seg=seg, rel0_ref=rel0, rel1_ref=rel1,
                          z_star=z_star, feasible=feasible)


# ---------------------------------------------------------------------------
# assembled surrogate
# ---------------------------------------------------------------------------


@dataclass
class Surrogate:
    """One iteration's frozen surrogate: records plus problem metadata."""

    ref: CoShfTrajectory
    quad_nodes: np.ndarray
    quad_weights: np.ndarray
    hover_terms: list            # [i][k] -> HoverTermBound
    fly_terms: list              # [s][k] -> FlyTermBound
    collisions: list             # [s] -> CollisionBound
    m_var: int
    m_con: int

    @property
    def J_hover(self) -> np.ndarray:
        K = self.ref.K
        return np.array([[self.hover_terms[i][k].coeffs.J for k in range(K)]
                         for i in range(K)], dtype=int)

    @property
    def J_fly(self) -> np.ndarray:
        S = len(self.fly_terms)
        K = self.ref.K
        return np.array([[[c.J for c in self.fly_terms[s][k].node_coeffs]
                          for k in range(K)] for s in range(S)], dtype=int)

    @property
    def lam(self) -> np.ndarray:
        return np.array([self.fly_terms[s][0].lam
                         for s in range(len(self.fly_terms))], dtype=int)

    @property
    def z_star(self) -> np.ndarray:
        return np.array([np.nan if c.z_star is None else c.z_star
                         for c in self.collisions])

    def per_user_at(self, traj: CoShfTrajectory, scenario: Scenario) -> np.ndarray:
        """Surrogate throughput per user at an arbitrary decision point."""
        K = traj.K
        a_s, b_s, a_j, b_j = trajectory.segment_points(traj, scenario)
        a_fly = traj.sched_fly_flat()
        out = np.zeros(K)
        for k in range(K):
            for i in range(K):
                out[k] += self.hover_terms[i][k].value(
                    traj.sched_hover[i, k], traj.hover_dur[i],
                    traj.hover_S[i], traj.hover_J[i])
            for s in range(len(self.fly_terms)):
                out[k] += self.fly_terms[s][k].value(
                    a_fly[s, k], a_s[s], b_s[s], a_j[s], b_j[s])
        return out

    def objective_at(self, traj: CoShfTrajectory, scenario: Scenario) -> float:
        return float(np.min(self.per_user_at(traj, scenario)))


@dataclass
class ConvexProblem:
    """Assembled cvxpy subproblem plus tagged constraints and layout."""

    problem: cp.Problem
    variables: dict
    tagged: list                 # (name, convexity tag, cvxpy constraint)
    pinned_schedule: tuple | None
    pinned_jammer: tuple | None
    n_solver_vars: int
    n_solver_cons: int
    m_var: int
    m_con: int
    scale: float                 # meters per solver length unit (= H)

    def audit_convexity(self) -> None:
        """Verify the problem and every tagged constraint are DCP."""
        for name, tag, con in self.tagged:
            if not con.is_dcp():
                raise ValueError(f"constraint {name} ({tag}) is not DCP")
        if not self.problem.is_dcp():
            raise ValueError("assembled problem is not DCP")

    def describe(self) -> str:
        """Debug dump: variable layout and tagged constraint list."""
        lines = [f"convex subproblem: {self.n_solver_vars} scalar variables, "
                 f"{self.n_solver_cons} scalar constraint rows "
                 f"(complexity model: {self.m_var} variables, "
                 f"{self.m_con} constraints)",
                 "variables:"]
        for name, var in self.variables.items():
            lines.append(f"  {name}: shape {tuple(var.shape)}")
        if self.pinned_jammer is not None:
            lines.append("  jammer waypoints pinned to constants")
        if self.pinned_schedule is not None:
            lines.append("  scheduling weights pinned to constants")
        lines.append("constraints:")
        for name, tag, con in self.tagged:
            size = int(np.prod(con.shape)) if con.shape else 1
            lines.append(f"  {name}: {tag}, {size} rows")
        return "\n".join(lines)

    def decode(self, scenario: Scenario) -> CoShfTrajectory:
        """Read variable values back into a trajectory (meters, normalized)."""
        v = self.variables
        H = self.scale
        K, N = scenario.K, scenario.N

        def val(name, pinned):
            if pinned is not None:
                return pinned
            return np.asarray(v[name].value, dtype=float)

        if self.pinned_jammer is not None:
            hover_j, turn_j = self.pinned_jammer
        else:
            hover_j = val("qjh", None) * H
            turn_j = (val("qjt", None) * H if "qjt" in v
                      else np.zeros((K + 1, 0, 2)))
        hover_s = val("qsh", None) * H
        turn_s = (val("qst", None) * H if "qst" in v
                  else np.zeros((K + 1, 0, 2)))
        if self.pinned_schedule is not None:
            a_h, a_f = self.pinned_schedule
        else:
            a_h = _snap_weights(np.asarray(v["ah"].value, dtype=float))
            a_f = _snap_weights(np.asarray(v["af"].value, dtype=float))
        t = np.clip(np.asarray(v["t"].value, dtype=float), 0.0, None)
        return CoShfTrajectory(
            hover_S=hover_s, hover_J=hover_j,
            turn_S=turn_s.reshape(K + 1, N, 2),
            turn_J=np.asarray(turn_j).reshape(K + 1, N, 2),
            hover_dur=t, sched_hover=a_h,
            sched_fly=a_f.reshape(K + 1, N + 1, K))


def _snap_weights(a: np.ndarray, snap: float = 1e-10) -> np.ndarray:
    """Clip a weight matrix into [0,1], snap near-binary entries exactly,
    and renormalize each row to sum to one."""
    a = np.clip(a, 0.0, 1.0)
    a[a < snap] = 0.0
    a[a > 1.0 - snap] = 1.0
    return a / np.sum(a, axis=1, keepdims=True)


def check_reference(ref: CoShfTrajectory, scenario: Scenario,
                    tol: float = 1e-6, check_collision: bool = True) -> None:
    """Raise InfeasibleReferenceError unless ref is feasible within tol."""
    try:
        trajectory.check_invariants(ref, scenario, tol=max(tol, 1e-6))
    except ValueError as exc:
        raise InfeasibleReferenceError(str(exc)) from exc
    if check_collision:
        min_d = float(np.min(trajectory.min_pair_distance_all(ref, scenario)))
        if min_d < scenario.d_min - max(tol * scenario.d_min, 1e-3):
            raise InfeasibleReferenceError(
                f"reference pair distance {min_d:.4f} m below d_min")


def assemble(ref: CoShfTrajectory, scenario: Scenario, quad_order: int = 8,
             pin_schedule: tuple | None = None,
             pin_jammer: tuple | None = None,
             drop_collision: bool = False,
             verify_reference: bool = True,
             eps_ref: float = EPS_REF) -> tuple[Surrogate, ConvexProblem]:
    """Build the convex subproblem around a feasible reference point.

    ``pin_schedule`` fixes the scheduling weights (rounded-schedule polish),
    ``pin_jammer`` fixes the jammer waypoints (single-UAV benchmark; usually
    combined with ``drop_collision``). Returns the frozen Surrogate record
    and the solver-ready problem.
    """
    sc = scenario
    K, N = sc.K, sc.N
    S = (K + 1) * (N + 1)
    H = sc.alt

    if verify_reference:
        check_reference(ref, sc, check_collision=not drop_collision)

    nodes, weights = gauss_legendre_01(quad_order)
    pin_ah = pin_af = None
    if pin_schedule is not None:
        pin_ah = np.asarray(pin_schedule[0], dtype=float)
        pin_af = np.asarray(pin_schedule[1], dtype=float).reshape(S, K)
    hover_terms = [[hover_term_bound(
        ref, i, k, sc,
        pin_a=None if pin_ah is None else float(pin_ah[i, k]),
        eps_ref=eps_ref)
        for k in range(K)] for i in range(K)]
    fly_terms = [[fly_term_bound(
        ref, SegmentIndex(s // (N + 1), s % (N + 1)), k, sc, quad_order,
        pin_a=None if pin_af is None else float(pin_af[s, k]),
        eps_ref=eps_ref)
        for k in range(K)] for s in range(S)]
    collisions = [collision_bound(ref, SegmentIndex(s // (N + 1), s % (N + 1)), sc)
                  for s in range(S)]
    if not drop_collision:
        for c in collisions:
            if not c.feasible:
                raise InfeasibleReferenceError(
                    f"segment {tuple(c.seg)}: reference relative displacement "
                    "vanishes; collision constraint cannot be linearized")

    surr = Surrogate(ref=ref.copy(), quad_nodes=nodes, quad_weights=weights,
                     hover_terms=hover_terms, fly_terms=fly_terms,
                     collisions=collisions,
                     m_var=variable_count(K, N), m_con=constraint_count(K, N))
    prob = _build_problem(surr, sc, pin_schedule, pin_jammer, drop_collision)
    return surr, prob


def _pen_exprs(recs, pen: np.ndarray, x, y_amgm, y_tan):
    """Vectorized penalty bounding B (1-a) y, mixing amgm and tangent rows.

    ``x`` is the affine vector (1 - a); ``y_amgm`` pairs with the mean-pair
    form (nonnegative convex), ``y_tan`` with the tangent form (affine).
    """
    return _pen_exprs_shaped(recs, pen, x, y_amgm, y_tan, (len(recs),))


def _pen_exprs_shaped(recs, pen, x, y_amgm, y_tan, shape):
    def arr(values):
        return np.asarray(values).reshape(shape)

    amgm = arr([1.0 if r.pen_mode == "amgm" else 0.0 for r in recs])
    tang = 1.0 - amgm
    F3 = np.where(amgm > 0, arr([max(r.F3, 1e-300) for r in recs]), 1.0)
    expr = (cp.multiply(pen * amgm / (2.0 * F3), cp.square(x))
            + cp.multiply(pen * amgm * F3 / 2.0, cp.square(y_amgm)))
    if np.any(tang * pen > 0):
        delta_r = arr([r.delta_r for r in recs])
        y_r = arr([r.t_r if isinstance(r, HoverTermBound) else r.d_r
                   for r in recs])
        c_bal = arr([r.c_bal if r.c_bal > 0 else 1.0 for r in recs])
        tan_aff = (cp.multiply(y_r, x) + cp.multiply(delta_r, y_tan)
                   - delta_r * y_r)
        tan_sq = cp.square(cp.multiply(c_bal, x - delta_r)
                           + cp.multiply(1.0 / c_bal, y_tan - y_r))
        expr = (expr + cp.multiply(pen * tang, tan_aff)
                + cp.multiply(pen * tang / 4.0, tan_sq))
    return expr


def _build_problem(surr: Surrogate, sc: Scenario, pin_schedule, pin_jammer,
                   drop_collision) -> ConvexProblem:
    K, N = sc.K, sc.N
    S = (K + 1) * (N + 1)
    H = sc.alt
    ref = surr.ref

    qsh = cp.Variable((K, 2), name="qsh")
    qst = cp.Variable(((K + 1) * N, 2), name="qst") if N > 0 else None
    variables = {"qsh": qsh}
    if qst is not None:
        variables["qst"] = qst

    if pin_jammer is not None:
        hover_j_const, turn_j_const = pin_jammer
        qjh = cp.Constant(np.asarray(hover_j_const, float) / H)
        qjt = (cp.Constant(np.asarray(turn_j_const, float).reshape(-1, 2) / H)
               if N > 0 else None)
    else:
        qjh = cp.Variable((K, 2), name="qjh")
        qjt = cp.Variable(((K + 1) * N, 2), name="qjt") if N > 0 else None
        variables["qjh"] = qjh
        if qjt is not None:
            variables["qjt"] = qjt

    t = cp.Variable(K, nonneg=True, name="t")
    variables["t"] = t
    if pin_schedule is not None:
        a_h_const, a_f_const = pin_schedule
        ah = cp.Constant(np.asarray(a_h_const, float))
        af = cp.Constant(np.asarray(a_f_const, float).reshape(S, K))
    else:
        ah = cp.Variable((K, K), nonneg=True, name="ah")
        af = cp.Variable((S, K), nonneg=True, name="af")
        variables["ah"] = ah
        variables["af"] = af
    m_aux = cp.Variable(S, nonneg=True, name="m")
    U = cp.Variable(name="U")
    variables["m"] = m_aux
    variables["U"] = U

    # waypoint sequences in H units: start, leg turns / hover rows, end
    def seq(hover_expr, turn_expr, start, end):
        rows = [cp.Constant(np.asarray(start, float).reshape(1, 2) / H)]
        for i in range(K + 1):
            if i > 0:
                rows.append(cp.reshape(hover_expr[i - 1], (1, 2), order="C"))
            if N > 0:
                rows.append(turn_expr[i * N:(i + 1) * N])
        rows.append(cp.Constant(np.asarray(end, float).reshape(1, 2) / H))
        return cp.vstack(rows)

    seq_s = seq(qsh, qst, sc.start_S, sc.end_S)
    seq_j = seq(qjh, qjt, sc.start_J, sc.end_J)
    A_s, B_s = seq_s[:-1], seq_s[1:]
    A_j, B_j = seq_j[:-1], seq_j[1:]
    chord_s = B_s - A_s
    chord_j = B_j - A_j
    d_s_norm = cp.norm(chord_s, 2, axis=1)
    d_j_norm = cp.norm(chord_j, 2, axis=1)

    tagged = []

    def add(name, tag, con):
        tagged.append((name, tag, con))

    # flight time epigraph and mission time budget
    add("seg_time_S", "soc", d_s_norm <= m_aux)
    add("seg_time_J", "soc", d_j_norm <= m_aux)
    add("time_budget", "affine-ineq",
        cp.sum(t) + (H / sc.V) * cp.sum(m_aux) <= sc.T)

    if pin_schedule is None:
        add("sched_hover_sum", "affine-eq", cp.sum(ah, axis=1) == 1.0)
        add("sched_fly_sum", "affine-eq", cp.sum(af, axis=1) == 1.0)
        add("sched_hover_box", "affine-ineq", ah <= 1.0)
        add("sched_fly_box", "affine-ineq", af <= 1.0)

    # hover bounds -----------------------------------------------------------
    we_t = sc.eve_pos / H
    sJe_h = np.array([surr.hover_terms[i][0].coeffs.sJe for i in range(K)])
    d2_je_h = cp.multiply(1.0 / sJe_h,
                          cp.sum(cp.square(qjh - we_t[None, :]), axis=1) + 1.0)
    gSe_h = np.stack([surr.hover_terms[i][0].coeffs.gSe for i in range(K)])
    cSe_h = np.array([surr.hover_terms[i][0].coeffs.cSe for i in range(K)])
    mSe_h = cp.sum(cp.multiply(gSe_h, qsh), axis=1) + cSe_h
    add("hover_minorant_Se", "affine-ineq", mSe_h >= 0.0)

    u_exprs = []
    for k in range(K):
        recs = [surr.hover_terms[i][k] for i in range(K)]
        co = [r.coeffs for r in recs]
        wk_t = sc.gu_pos[k] / H
        sS_k = np.array([c.sS for c in co])
        d2_s = cp.multiply(1.0 / sS_k,
                           cp.sum(cp.square(qsh - wk_t[None, :]), axis=1) + 1.0)
        h_k = (cp.multiply(np.array([c.c_dS2 for c in co]), d2_s)
               + cp.multiply(np.array([c.c_dS4 for c in co]), cp.square(d2_s))
               + cp.multiply(np.array([c.c_mSe2 for c in co]), cp.power(mSe_h, -2))
               + cp.multiply(np.array([c.c_dJ4 for c in co]), cp.square(d2_je_h))
               + cp.multiply(np.array([c.c_mSe1 for c in co]), cp.power(mSe_h, -1)))
        if sc.P_J > 0:
            gJk = np.stack([c.gJk for c in co])
            cJk = np.array([c.cJk for c in co])
            mJk = cp.sum(cp.multiply(gJk, qjh), axis=1) + cJk
            add(f"hover_minorant_Jk_{k}", "affine-ineq", mJk >= 0.0)
            h_k = h_k + cp.multiply(np.array([c.c_mJ2 for c in co]),
                                    cp.power(mJk, -2))
        gate = np.array([r.gate for r in recs], dtype=float)
        a_f = np.array([r.a_f for r in recs])
        t_f = np.array([r.t_f for r in recs])
        h_f = np.array([r.h_f for r in recs])
        B1 = np.array([c.B1 for c in co])
        pinned_one = np.array([1.0 if r.pin_a == 1.0 else 0.0 for r in recs])
        mean = (cp.multiply(1.0 / (3.0 * a_f), ah[:, k])
                + cp.multiply(1.0 / (3.0 * t_f), t)
                + cp.multiply(1.0 / (3.0 * h_f), h_k))
        pen = gate * (1.0 - pinned_one) * B1
        pen_expr = _pen_exprs(recs, pen, 1.0 - ah[:, k], t, t)
        s_k = (-cp.multiply(gate * a_f * t_f * h_f, cp.power(mean, 3))
               - pen_expr + cp.multiply(gate * B1, t))
        u_exprs.append(cp.sum(s_k))

    # fly bounds --------------------------------------------------------------
    lam = surr.lam.astype(float)
    d_lam = cp.multiply(1.0 - lam, d_s_norm) + cp.multiply(lam, d_j_norm)
    w_dir_s = np.stack([(1.0 - surr.fly_terms[s][0].lam)
                        * surr.fly_terms[s][0].unit_S for s in range(S)])
    w_dir_j = np.stack([surr.fly_terms[s][0].lam
                        * surr.fly_terms[s][0].unit_J for s in range(S)])
    d_lin = (cp.sum(cp.multiply(w_dir_s, chord_s), axis=1)
             + cp.sum(cp.multiply(w_dir_j, chord_j), axis=1))

    # positions at all quadrature nodes, rows ordered node-major (n*S + s);
    # bound to leaf variables so downstream atoms stay shallow
    Q = len(surr.quad_nodes)
    pos_s_nodes = cp.Variable((Q * S, 2), name="pos_s_nodes")
    pos_j_nodes = cp.Variable((Q * S, 2), name="pos_j_nodes")
    add("node_positions_S", "affine-eq",
        pos_s_nodes == cp.vstack([A_s + z * chord_s for z in surr.quad_nodes]))
    add("node_positions_J", "affine-eq",
        pos_j_nodes == cp.vstack([A_j + z * chord_j for z in surr.quad_nodes]))

    def _gather(attr, k):
        return np.array([getattr(surr.fly_terms[s][k].node_coeffs[n], attr)
                         for n in range(Q) for s in range(S)])

    def _gather_vec(attr, k):
        return np.stack([getattr(surr.fly_terms[s][k].node_coeffs[n], attr)
                         for n in range(Q) for s in range(S)])

    gSe_f = _gather_vec("gSe", 0)
    cSe_f = _gather("cSe", 0)
    mSe_f = cp.sum(cp.multiply(gSe_f, pos_s_nodes), axis=1) + cSe_f
    d2_je_f = cp.multiply(
        1.0 / _gather("sJe", 0),
        cp.sum(cp.square(pos_j_nodes - we_t[None, :]), axis=1) + 1.0)
    w_rep = np.repeat(surr.quad_weights, S)

    for k in range(K):
        recs = [surr.fly_terms[s][k] for s in range(S)]
        wk_t = sc.gu_pos[k] / H
        d2_s = cp.multiply(
            1.0 / _gather("sS", k),
            cp.sum(cp.square(pos_s_nodes - wk_t[None, :]), axis=1) + 1.0)
        h_all = (cp.multiply(_gather("c_dS2", k), d2_s)
                 + cp.multiply(_gather("c_dS4", k), cp.square(d2_s))
                 + cp.multiply(_gather("c_mSe2", k), cp.power(mSe_f, -2))
                 + cp.multiply(_gather("c_dJ4", k), cp.square(d2_je_f))
                 + cp.multiply(_gather("c_mSe1", k), cp.power(mSe_f, -1)))
        if sc.P_J > 0:
            mJk = (cp.sum(cp.multiply(_gather_vec("gJk", k), pos_j_nodes),
                          axis=1) + _gather("cJk", k))
            h_all = h_all + cp.multiply(_gather("c_mJ2", k),
                                        cp.power(mJk, -2))
        # integral over z per segment: weighted sum across the node blocks
        h_w = cp.multiply(w_rep, h_all)
        int_h = cp.sum(cp.reshape(h_w, (Q, S), order="C"), axis=0)
        recs_f = recs
        gate = np.array([r.gate for r in recs_f], dtype=float)
        a_f = np.array([r.a_f for r in recs_f])
        d_f = np.array([r.d_f for r in recs_f])
        ih_f = np.array([r.ih_f for r in recs_f])
        B2 = np.array([r.B2 for r in recs_f])
        pinned_one = np.array([1.0 if r.pin_a == 1.0 else 0.0
                               for r in recs_f])
        mean = (cp.multiply(1.0 / (3.0 * a_f), af[:, k])
                + cp.multiply(1.0 / (3.0 * d_f), d_lam)
                + cp.multiply(1.0 / (3.0 * ih_f), int_h))
        pen = gate * (1.0 - pinned_one) * B2
        pen_expr = _pen_exprs(recs_f, pen, 1.0 - af[:, k], d_lam, m_aux)
        v_k = (-cp.multiply(gate * (H / sc.V) * a_f * d_f * ih_f,
                            cp.power(mean, 3))
               - pen_expr + cp.multiply(gate * B2, d_lin))
        u_exprs[k] = u_exprs[k] + cp.sum(v_k)

    for k in range(K):
        add(f"throughput_epigraph_{k}", "concave-ge", U <= u_exprs[k])

    # collision: affine lower bound of squared pair distance at sampled z ----
    if not drop_collision:
        dmin2_t = (sc.d_min / H) ** 2
        rel0 = A_s - A_j
        rel1 = B_s - B_j
        rel0_ref = np.stack([c.rel0_ref for c in surr.collisions]) / H
        rel1_ref = np.stack([c.rel1_ref for c in surr.collisions]) / H

        def d_expr(z_vec, rel_expr_at):
            refz = rel0_ref + z_vec[:, None] * (rel1_ref - rel0_ref)
            return (-np.sum(refz * refz, axis=1)
                    + 2.0 * cp.sum(cp.multiply(refz, rel_expr_at), axis=1))

        add("collision_z0", "affine-ineq",
            d_expr(np.zeros(S), rel0) >= dmin2_t)
        add("collision_z1", "affine-ineq",
            d_expr(np.ones(S), rel1) >= dmin2_t)
        zs = surr.z_star
        idx = np.flatnonzero(~np.isnan(zs))
        if len(idx):
            zv = zs[idx]
            refz = (rel0_ref[idx] + zv[:, None] * (rel1_ref[idx] - rel0_ref[idx]))
            relz = rel0[idx] + cp.multiply(
                np.repeat(zv[:, None], 2, axis=1), rel1[idx] - rel0[idx])
            add("collision_zstar", "affine-ineq",
                -np.sum(refz * refz, axis=1)
                + 2.0 * cp.sum(cp.multiply(refz, relz), axis=1) >= dmin2_t)

    # kappa positivity for the fly-segment minorants at {0, 1, vertex} -------
    a_s_ref, b_s_ref, a_j_ref, b_j_ref = trajectory.segment_points(ref, sc)

    def kappa_rows(p_expr_0, p_expr_1, p_ref_0, p_ref_1, w, name):
        w_t = w / H
        p0 = p_ref_0 / H - w_t
        p1 = p_ref_1 / H - w_t
        z_candidates = [np.zeros(S), np.ones(S)]
        vert = np.full(S, np.nan)
        for s in range(S):
            zv = _ref_vertex(p0[s], p1[s])
            if zv is not None:
                vert[s] = zv

        def emit(tag_z, z_vec, rows):
            refz = p0[rows] + z_vec[:, None] * (p1[rows] - p0[rows])
            scale = np.sum(refz * refz, axis=1) + 1.0
            pz = (p_expr_0[rows]
                  + cp.multiply(np.repeat(z_vec[:, None], 2, axis=1),
                                p_expr_1[rows] - p_expr_0[rows]))
            minor = (2.0 * cp.sum(cp.multiply(refz / scale[:, None],
                                              pz - w_t[None, :]), axis=1)
                     + (1.0 - np.sum(refz * refz, axis=1)) / scale)
            add(f"{name}_{tag_z}", "affine-ineq", minor >= 0.0)

        all_rows = np.arange(S)
        emit("z0", z_candidates[0], all_rows)
        emit("z1", z_candidates[1], all_rows)
        idx = np.flatnonzero(~np.isnan(vert))
        if len(idx):
            emit("zstar", vert[idx], idx)

    kappa_rows(A_s, B_s, a_s_ref, b_s_ref, sc.eve_pos, "kappa_Se")
    if sc.P_J > 0:
        for k in range(K):
            kappa_rows(A_j, B_j, a_j_ref, b_j_ref, sc.gu_pos[k], f"kappa_Jk_{k}")

    problem = cp.Problem(cp.Maximize(U), [c for _, _, c in tagged])
    n_vars = sum(int(np.prod(v.shape)) if v.shape else 1
                 for v in problem.variables())
    n_cons = sum(int(np.prod(c.shape)) if c.shape else 1
                 for _, _, c in tagged)
    return ConvexProblem(problem=problem, variables=variables, tagged=tagged,
                         pinned_schedule=pin_schedule, pinned_jammer=pin_jammer,
                         n_solver_vars=n_vars, n_solver_cons=n_cons,
                         m_var=surr.m_var, m_con=surr.m_con, scale=H)
