"""Acceptance criteria, one test per criterion.

Each test prints a single `ACCEPTANCE n: PASS|FAIL` line (run with -s to see
them live). Criterion 8 is soft: per-seed curves are printed and logged, a
miss does not fail the build. All tolerances are fixed here, not tuned.

Expensive artifacts (benchmark runs, seed batches) are session fixtures so
each optimization runs exactly once.
"""

import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from coshf import channel, convexify, trajectory, validate
from coshf.bench_td import TdConfig, run_td
from coshf.sca import ScaConfig, run, run_single_uav
from coshf.scenario import random_scenario
from coshf.trajectory import SegmentIndex, segment_speeds, segment_times
from conftest import perturbed_reference

SEEDS = list(range(1, 11))
PJ_GRID_MW = (0.1, 1.0, 10.0, 100.0)


def _line(num: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def coshf_default(default_sc):
    t0 = time.perf_counter()
    traj, rep = run(default_sc, ScaConfig())
    return traj, rep, time.perf_counter() - t0


@pytest.fixture(scope="session")
def single_default(default_sc):
    t0 = time.perf_counter()
    traj, rep = run_single_uav(default_sc, ScaConfig())
    return traj, rep, time.perf_counter() - t0


@pytest.fixture(scope="session")
def td40_default(default_sc):
    t0 = time.perf_counter()
    path, rep = run_td(default_sc, TdConfig(n0=40))
    return path, rep, time.perf_counter() - t0


@pytest.fixture(scope="session")
def seed_batch():
    cfg = ScaConfig()
    results = {}
    for seed in SEEDS:
        sc = random_scenario(seed=seed, K=4, area=500.0)
        _, dual = run(sc, cfg)
        _, single = run_single_uav(sc, cfg)
        monotone = bool(np.all(np.diff(dual.objective_trace) >= -1e-6))
        results[seed] = (dual.objective, single.objective, monotone)
    return results


@pytest.fixture(scope="session")
def pj_batch():
    cfg = ScaConfig()
    curves = {}
    for seed in SEEDS:
        sc = random_scenario(seed=seed, K=4, area=500.0)
        objs = []
        for pj_mw in PJ_GRID_MW:
            _, rep = run(sc.with_(P_J=pj_mw * 1e-3), cfg)
            objs.append(rep.objective)
        curves[seed] = objs
    return curves


# -- criterion 1: surrogate tightness -------------------------------------------


def test_acceptance_01_surrogate_tightness(default_sc):
    t0 = time.perf_counter()
    worst_exact, worst_quad = 0.0, 0.0
    for seed in range(10):
        ref = perturbed_reference(default_sc, 100 + seed)
        a_s, b_s, a_j, b_j = trajectory.segment_points(ref, default_sc)
        a_fly = ref.sched_fly_flat()
        for i in range(default_sc.K):
            for k in range(default_sc.K):
                true_r = float(channel.secrecy_rate(
                    ref.hover_S[i], ref.hover_J[i], k, default_sc))
                rate_rec = convexify.hover_rate_bound(ref, i, k, default_sc)
                got = float(rate_rec.value(ref.hover_S[i], ref.hover_J[i]))
                worst_exact = max(worst_exact,
                                  abs(got - true_r) / max(true_r, 1e-9))
                term_rec = convexify.hover_term_bound(ref, i, k, default_sc)
                a, t = ref.sched_hover[i, k], ref.hover_dur[i]
                got = term_rec.value(a, t, ref.hover_S[i], ref.hover_J[i])
                true_t = a * t * true_r
                worst_exact = max(worst_exact,
                                  abs(got - true_t) / max(true_t, 1e-9))
        for s in range(ref.n_segments):
            seg = SegmentIndex(s // (ref.N + 1), s % (ref.N + 1))
            rec = convexify.collision_bound(ref, seg, default_sc)
            rel0, rel1 = a_s[s] - a_j[s], b_s[s] - b_j[s]
            for z in rec.candidates():
                rel = rel0 + z * (rel1 - rel0)
                err = abs(rec.value_at(z, rel0, rel1) - float(rel @ rel)) \
                    / max(float(rel @ rel), 1e-9)
                worst_exact = max(worst_exact, err)
            for k in range(default_sc.K):
                rec = convexify.fly_term_bound(ref, seg, k, default_sc, 8)
                got = rec.value(a_fly[s, k], a_s[s], b_s[s], a_j[s], b_j[s])
                # quadrature-resolution counterpart: clamped rate at the
                # same nodes (the bound cannot resolve the clamp between
                # its own nodes)
                total = 0.0
                for w, z in zip(rec.weights, rec.nodes):
                    qs = a_s[s] + z * (b_s[s] - a_s[s])
                    qj = a_j[s] + z * (b_j[s] - a_j[s])
                    r_u, r_e = channel.rate_pair(qs, qj, k, default_sc)
                    total += w * max(float(r_u - r_e), 0.0)
                dt = max(np.linalg.norm(b_s[s] - a_s[s]),
                         np.linalg.norm(b_j[s] - a_j[s])) / default_sc.V
                true_f = a_fly[s, k] * dt * total
                worst_quad = max(worst_quad,
                                 abs(got - true_f) / max(true_f, 1e-9))
    wall = time.perf_counter() - t0
    ok = worst_exact <= 1e-6 and worst_quad <= 1e-5 and wall < 60.0
    _line(1, ok, f"exact bounds rel err {worst_exact:.2e} (<=1e-6), "
          f"quadrature-backed {worst_quad:.2e} (<=1e-5), {wall:.1f}s (<60s)")
    assert ok


# -- criterion 2: surrogate domination -------------------------------------------


def test_acceptance_02_surrogate_domination(default_sc):
    rng = np.random.default_rng(202)
    ref = perturbed_reference(default_sc, 202)
    a_s, b_s, a_j, b_j = trajectory.segment_points(ref, default_sc)
    worst = np.inf           # minimum slack (true - bound); must be >= -1e-9

    n = 0
    while n < 1000:          # hover rate and product bounds
        i, k = rng.integers(default_sc.K), rng.integers(default_sc.K)
        rate_rec = convexify.hover_rate_bound(ref, i, k, default_sc)
        qs = ref.hover_S[i] + rng.normal(0, 20, 2)
        qj = ref.hover_J[i] + rng.normal(0, 20, 2)
        if not rate_rec.in_domain(qs, qj):
            continue
        n += 1
        true_r = float(channel.secrecy_rate(qs, qj, k, default_sc))
        worst = min(worst, true_r - float(rate_rec.value(qs, qj)))
        term_rec = convexify.hover_term_bound(ref, i, k, default_sc)
        a, t = rng.uniform(0, 1), rng.uniform(0, 50)
        worst = min(worst, a * t * true_r - term_rec.value(a, t, qs, qj))

    n = 0
    mids = (np.arange(2000) + 0.5) / 2000
    while n < 1000:          # fly segment bound vs dense clamped integral
        s = int(rng.integers(ref.n_segments))
        k = int(rng.integers(default_sc.K))
        seg = SegmentIndex(s // (ref.N + 1), s % (ref.N + 1))
        rec = convexify.fly_term_bound(ref, seg, k, default_sc, 8)
        pts = [p + rng.normal(0, 12, 2)
               for p in (a_s[s], b_s[s], a_j[s], b_j[s])]
        if not rec.in_domain(*pts):
            continue
        n += 1
        a = rng.uniform(0, 1)
        got = rec.value(a, *pts)
        qs = pts[0] + mids[:, None] * (pts[1] - pts[0])
        qj = pts[2] + mids[:, None] * (pts[3] - pts[2])
        r = channel.secrecy_rate(qs, qj, k, default_sc)
        dt = max(np.linalg.norm(pts[1] - pts[0]),
                 np.linalg.norm(pts[3] - pts[2])) / default_sc.V
        worst = min(worst, a * dt * float(np.mean(r)) - got)

    for _ in range(1000):    # collision linearization under the true square
        s = int(rng.integers(ref.n_segments))
        seg = SegmentIndex(s // (ref.N + 1), s % (ref.N + 1))
        rec = convexify.collision_bound(ref, seg, default_sc)
        rel0 = (a_s[s] - a_j[s]) + rng.normal(0, 40, 2)
        rel1 = (b_s[s] - b_j[s]) + rng.normal(0, 40, 2)
        z = rng.uniform()
        rel = rel0 + z * (rel1 - rel0)
        worst = min(worst, float(rel @ rel) - rec.value_at(z, rel0, rel1))

    ok = worst >= -1e-9
    _line(2, ok, f"minimum slack over perturbations {worst:.3e} (>= -1e-9)")
    assert ok


# -- criterion 3: closed-form collision minimum -----------------------------------


def test_acceptance_03_collision_closed_form():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    n_pairs = 10_000
    p0s = rng.uniform(0, 500, (n_pairs, 2))
    p1s = rng.uniform(0, 500, (n_pairs, 2))
    p0j = rng.uniform(0, 500, (n_pairs, 2))
    p1j = rng.uniform(0, 500, (n_pairs, 2))
    rel0 = p0s - p0j
    rel1 = p1s - p1j
    closed = np.sqrt(trajectory._pair_min_dist2(rel0, rel1 - rel0))

    z = np.linspace(0, 1, 10_001)
    worst = 0.0
    for start in range(0, n_pairs, 500):
        sl = slice(start, start + 500)
        seg_rel0 = rel0[sl][:, None, :]
        seg_dir = (rel1 - rel0)[sl][:, None, :]
        d = np.linalg.norm(seg_rel0 + z[None, :, None] * seg_dir, axis=2)
        arg = np.argmin(d, axis=1)
        for row, zi in enumerate(arg):
            idx = start + row
            a, g = rel0[idx], rel1[idx] - rel0[idx]

            def f(zz):
                r = a + zz * g
                return float(r @ r)

            lo = max(0.0, z[zi] - 2e-4)
            hi = min(1.0, z[zi] + 2e-4)
            res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
            oracle = min(float(d[row, zi]), float(np.sqrt(res.fun)))
            worst = max(worst, abs(closed[idx] - oracle))
    wall = time.perf_counter() - t0
    ok = worst <= 1e-6 and wall < 30.0
    _line(3, ok, f"closed form vs refined grid |diff| {worst:.2e} m "
          f"(<=1e-6) over {n_pairs} pairs, {wall:.1f}s (<30s)")
    assert ok


# -- criterion 4: monotone convergence --------------------------------------------


def test_acceptance_04_sca_convergence(coshf_default):
    _, rep, wall = coshf_default
    diffs = np.diff(rep.objective_trace)
    monotone = bool(np.all(diffs >= -1e-6))
    ok = (monotone and rep.converged and rep.iters <= 30 and wall <= 300.0)
    _line(4, ok, f"monotone={monotone}, converged={rep.converged}, "
          f"iters={rep.iters} (<=30), wall={wall:.0f}s (<=300s), "
          f"objective={rep.objective:.3f} bits/Hz")
    assert ok


# -- criterion 5: dual versus single UAV -------------------------------------------


def test_acceptance_05_dual_vs_single(coshf_default, single_default,
                                      seed_batch):
    _, dual, _ = coshf_default
    _, single, _ = single_default
    default_ok = dual.objective >= single.objective - 1e-6
    wins = sum(1 for d, s, _m in seed_batch.values() if d >= s - 1e-6)
    monotone_all = all(m for _d, _s, m in seed_batch.values())
    ok = default_ok and wins >= 8 and monotone_all
    _line(5, ok, f"default {dual.objective:.2f} vs {single.objective:.2f} "
          f"bits/Hz, seed wins {wins}/10 (need >=8), "
          f"all seed traces monotone: {monotone_all}")
    assert ok


# -- criterion 6: TD comparison trend ----------------------------------------------


def test_acceptance_06_td_comparison(coshf_default, td40_default):
    _, coshf_rep, coshf_wall = coshf_default
    _, td_rep, td_wall = td40_default
    rel = abs(td_rep.objective - coshf_rep.objective) \
        / max(coshf_rep.objective, 1e-9)
    obj_ok = rel <= 0.10
    wall_ok = coshf_wall <= 0.5 * td_wall
    ok = obj_ok and wall_ok
    _line(6, ok, f"TD40 {td_rep.objective:.2f} vs co-SHF "
          f"{coshf_rep.objective:.2f} bits/Hz (gap {100*rel:.1f}%, <=10%); "
          f"wallclock {coshf_wall:.0f}s vs {td_wall:.0f}s "
          f"(ratio {coshf_wall/td_wall:.2f}, need <=0.5)")
    assert ok


# -- criterion 7: hover-and-fly structure -------------------------------------------


def test_acceptance_07_speed_structure(default_sc, coshf_default):
    traj, rep, _ = coshf_default
    dts = segment_times(traj, default_sc)
    speed_ok = True
    for s in range(traj.n_segments):
        if dts[s] > 0:
            seg = SegmentIndex(s // (traj.N + 1), s % (traj.N + 1))
            if max(segment_speeds(traj, seg, default_sc)) != default_sc.V:
                speed_ok = False
    active = int(np.sum(traj.hover_dur > 0.01 * default_sc.T))
    slack = default_sc.T - trajectory.total_time(traj, default_sc)
    ok = speed_ok and active <= default_sc.K \
        and slack <= 1e-3 * default_sc.T
    _line(7, ok, f"max segment speed == V exactly: {speed_ok}; active hover "
          f"pairs {active} (<= {default_sc.K}); time slack {slack:.2e}s "
          f"(<= {1e-3*default_sc.T:.2f}s)")
    assert ok


# -- criterion 8 (soft): jamming power trend -----------------------------------------


def test_acceptance_08_jamming_power_trend(pj_batch):
    interior = 0
    for seed, objs in sorted(pj_batch.items()):
        best = int(np.argmax(objs))
        interior += int(best in (1, 2))
        print(f"  seed {seed}: objectives vs P_J {PJ_GRID_MW} mW = "
              f"{[round(o, 2) for o in objs]} (best at index {best})")
    ok = interior >= 7
    _line(8, ok, f"interior-grid optimum on {interior}/10 seeds (soft "
          f"criterion, target >=7; misses logged, not build-breaking)")
    if not ok:
        pytest.skip("soft criterion missed; per-seed curves logged above")


# -- criterion 9: validator independence ---------------------------------------------


def test_acceptance_09_validator(default_sc, coshf_default, td40_default):
    traj, rep, _ = coshf_default
    aud = validate.audit(traj, default_sc,
                         reported_throughput=rep.per_user)
    path, td_rep, _ = td40_default
    td_aud = validate.audit(path, default_sc,
                            reported_throughput=td_rep.per_user)
    checks = {
        "coshf gap": aud.max_rel_throughput_gap <= 1e-3,
        "td gap": td_aud.max_rel_throughput_gap <= 1e-3,
        "coshf speed": aud.max_speed_violation <= 1e-6,
        "td speed": td_aud.max_speed_violation <= 1e-6,
        "coshf distance": aud.min_pair_distance >= default_sc.d_min - 1e-3,
        "td distance": td_aud.min_pair_distance >= default_sc.d_min - 1e-3,
        "coshf binary": aud.scheduling_binary,
        "td binary": td_aud.scheduling_binary,
    }
    ok = all(checks.values())
    _line(9, ok, f"gaps {aud.max_rel_throughput_gap:.1e}/"
          f"{td_aud.max_rel_throughput_gap:.1e} (<=1e-3); "
          + ", ".join(f"{k}={'ok' if v else 'VIOLATED'}"
                      for k, v in checks.items() if not v or True))
    assert ok


# -- criterion 10: complexity-model counting -----------------------------------------


def test_acceptance_10_counting():
    expected = {(1, 0): (9, 24), (4, 1): (130, 333), (6, 2): (364, 957)}
    got = {}
    from coshf.sca import initialize
    for (K, N), (mv, mc) in expected.items():
        sc = random_scenario(seed=50 + K, K=K, area=500.0, N=N, T=250.0)
        _, prob = convexify.assemble(initialize(sc), sc, quad_order=4)
        got[(K, N)] = (prob.m_var, prob.m_con)
    ok = got == expected
    _line(10, ok, f"M_var/M_con per (K,N): {got} == {expected}")
    assert ok
