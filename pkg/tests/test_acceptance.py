"""Acceptance criteria 1-11; each test records one PASS/FAIL line for the terminal summary."""

import math
import time

import numpy as np
import pytest

from _oracles import jacobian_fd, positive_roots_grid
from planktonmap import nsbif as nb
from planktonmap.audit import STRATA, run_audit
from planktonmap.control import (Gains, controlled_orbit_converges, resolve_target, stability_triangle,
                                 stable_grid)
from planktonmap.dynamics import (classify_attractor, descent_hypotheses, invariant_set_check, iterate,
                                  lyapunov_descent, sample_set, sweep_theta, transition_theta)
from planktonmap.equilibria import critical_points_of_h, find_fixed_points, positive_fixed_points
from planktonmap.model import Params, jacobian_general, pq, psi, psi_at_one
from test_dynamics import GLOBAL_SETS, PORTRAITS, SET_OF

EX1 = Params(r=0.5, beta=2.0, theta=1.0, gamma=1.0)
EX2 = Params(r=0.5, beta=4.0, theta=1.0, gamma=1.0)
EX3 = Params(r=0.5, beta=3.0, theta=2.0, gamma=0.1)
EX3B = Params(r=0.5, beta=2.1, theta=1.1, gamma=0.5)
CONTROL = Params(r=1.0, beta=3.0, theta=1.2, gamma=1.0)


@pytest.fixture(scope="module")
def audit_report():
    t0 = time.perf_counter()
    rep = run_audit(per_stratum=80, seed=20240101)
    return rep, time.perf_counter() - t0


class Checks:
    """Collects named sub-checks so one failing value does not hide the others."""

    def __init__(self):
        self.failed = []

    def close(self, name, got, want, tol):
        if not abs(got - want) <= tol:
            self.failed.append(f"{name}={got:.6g} (want {want}±{tol})")

    def true(self, name, cond):
        if not cond:
            self.failed.append(name)

    def finish(self, record, number, detail=""):
        ok = not self.failed
        record(number, ok, detail if ok else "; ".join(self.failed))
        assert ok, self.failed


def _eig_pair(fp):
    lam = sorted(fp.stability.eigenvalues, key=lambda z: -abs(z))
    return abs(lam[0]), abs(lam[1])


def test_criterion_01_example1_threshold(record_criterion):
    c = Checks()
    t0 = time.perf_counter()
    (pt,) = nb.ns_critical(EX1)
    lam1, lam2 = nb.eigen_at(pt.u_bar, EX1.with_theta(pt.theta0))
    elapsed = time.perf_counter() - t0
    c.close("theta0", pt.theta0, 0.347233, 1e-4)
    c.close("u_bar", pt.u_bar, 0.371926, 1e-4)
    c.close("Re", lam2.real, 0.8991, 5e-4)
    c.close("Im", abs(lam2.imag), 0.4376, 5e-4)
    c.true("conjugate pair", lam1 == lam2.conjugate())
    c.true(f"runtime {elapsed:.3f}s < 1s", elapsed < 1.0)
    c.finish(record_criterion, 1, f"theta0={pt.theta0:.6f} u={pt.u_bar:.6f} ({elapsed * 1e3:.0f} ms)")


def test_criterion_02_example1_normal_form(record_criterion):
    c = Checks()
    (pt,) = nb.ns_critical(EX1)
    rep = nb.normal_form(pt.u_bar, pt.theta0, EX1)
    want = {"L20": (0.011155, 0.040816), "L11": (-0.192358, -0.204738),
            "L02": (-0.274762, -0.113795), "L21": (-0.087924, 0.048583)}
    for name, (re, im) in want.items():
        z = getattr(rep, name)
        c.close(f"{name}.re", z.real, re, 2e-3)
        c.close(f"{name}.im", z.imag, im, 2e-3)
    c.close("L", rep.L, -0.248898, 2e-3)
    c.finish(record_criterion, 2, f"L={rep.L:.6f}")


def test_criterion_03_example2(record_criterion):
    c = Checks()
    (pt,) = nb.ns_critical(EX2)
    rep = nb.normal_form(pt.u_bar, pt.theta0, EX2)
    c.close("theta0", pt.theta0, 5.0, 1e-6)
    c.close("u_bar", pt.u_bar, 0.2360, 5e-4)
    c.close("L", rep.L, -1.544896, 2e-3)
    e2 = [fp for fp in positive_fixed_points(EX2.with_theta(5.0)) if fp.kind == "E2"]
    c.true("E2 exists", len(e2) == 1)
    if e2:
        c.close("E2.u", e2[0].u, 1 / 3, 5e-4)
        c.close("E2.v", e2[0].v, 8 / 9, 5e-4)
        hi, lo = _eig_pair(e2[0])
        c.close("lam_hi", hi, 1.2436, 5e-4)
        c.close("lam_lo", lo, 0.5897, 5e-4)
        c.true("saddle", e2[0].stability.tag == "Saddle")
    c.finish(record_criterion, 3, f"theta0={pt.theta0:.9f} L={rep.L:.6f}")


def test_criterion_04_example3_structure(record_criterion):
    c = Checks()
    fps = positive_fixed_points(EX3)
    c.true("three positive points", len(fps) == 3)
    want = [(0.02679, 0.12339), (0.1, 0.18), (0.3732, 0.2966)]
    for fp, (u, v) in zip(fps, want):
        c.close(f"{fp.kind}.u", fp.u, u, 5e-4)
        c.close(f"{fp.kind}.v", fp.v, v, 5e-4)
    if len(fps) == 3:
        c.close("q(u1)", pq(fps[0].u, EX3)[1], 1.422, 2e-3)
        c.close("q(u3)", pq(fps[2].u, EX3)[1], 1.2778, 2e-3)
        hi, lo = _eig_pair(fps[1])
        c.close("E2 hi", hi, 1.68, 5e-3)
        c.close("E2 lo", lo, 0.67, 5e-3)
    # the grid oracle agrees on the count
    c.true("grid count", len(positive_roots_grid(EX3)) == 3)

    fps_b = positive_fixed_points(EX3B)
    c.true("second set: three points", len(fps_b) == 3)
    if len(fps_b) == 3:
        c.close("q(u1)'", pq(fps_b[0].u, EX3B)[1], 0.9755, 2e-3)
        c.close("q(u3)'", pq(fps_b[2].u, EX3B)[1], 0.3654, 2e-3)
        e2 = fps_b[1]
        c.true("E2=(0.5,0.5)", abs(e2.u - 0.5) < 1e-12 and abs(e2.v - 0.5) < 1e-12)
        c.true("E2 on curve", abs(e2.v - (1 - e2.u) * (EX3B.gamma + e2.u)) < 1e-12)
        hi, lo = _eig_pair(e2)
        c.close("E2' hi", hi, 1.0427, 5e-4)
        c.close("E2' lo", lo, 0.7072, 5e-4)
    c.finish(record_criterion, 4, "Example 3 fixed points, moduli and eigenvalues")


def test_criterion_05_threshold_values(record_criterion):
    c = Checks()
    c.true("psi(1)=3 exactly", psi_at_one(EX2) == 3.0)
    (u1,) = [u for u in critical_points_of_h(EX2) if 0 < u < 1]
    c.close("u1 (ex2)", u1, 0.2757, 5e-4)
    c.close("psi(u1) (ex2)", float(psi(u1, EX2)), 5.1594, 2e-3)
    c.close("psi(1) (ex3)", psi_at_one(EX3), 2.2495, 2e-3)
    crit = sorted(critical_points_of_h(EX3))
    c.true("two critical points", len(crit) == 2)
    if len(crit) == 2:
        c.close("u1", crit[0], 0.0397, 5e-4)
        c.close("u2", crit[1], 0.1748, 5e-4)
        c.close("psi(u1)", float(psi(crit[0], EX3)), 2.5893, 2e-3)
        c.close("psi(u2)", float(psi(crit[1], EX3)), 1.8692, 2e-3)
    c.finish(record_criterion, 5, "critical points and levels")


def test_criterion_06_region_oracle(record_criterion, audit_report):
    rep, elapsed = audit_report
    c = Checks()
    c.true(f"samples {len(rep.cases)} >= 1000", len(rep.cases) >= 1000)
    c.true("all strata", set(rep.strata) == set(STRATA) and min(rep.strata.values()) > 0)
    c.true(f"agreement {rep.agreement:.4f} (mismatches {len(rep.mismatches)})", rep.agreement == 1.0)
    c.true(f"runtime {elapsed:.1f}s < 60s", elapsed < 60.0)
    c.finish(record_criterion, 6,
             f"{len(rep.scored)}/{len(rep.cases)} scored, agreement {rep.agreement:.4f}, {elapsed:.1f}s")


def test_criterion_07_jacobian(record_criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(500):
        p = Params(r=rng.uniform(0.05, 1.5), beta=rng.uniform(0.1, 20.0), theta=rng.uniform(0.01, 20.0),
                   gamma=rng.uniform(0.02, 5.0))
        u, v = rng.uniform(0.0, 2.0), rng.uniform(0.0, 3.0)
        J = jacobian_general((u, v), p).as_array()
        F = jacobian_fd(u, v, p)
        worst = max(worst, float(np.linalg.norm(J - F) / max(np.linalg.norm(J), 1e-300)))
    ok = worst <= 1e-6
    record_criterion(7, ok, f"max relative error {worst:.2e} over 500 points")
    assert ok


def test_criterion_08_dynamics(record_criterion):
    c = Checks()
    (pt,) = nb.ns_critical(EX1)
    t0 = time.perf_counter()
    rows = sweep_theta(EX1, (0.28, 0.40), 120, (0.32, 0.82), n=200_000)
    t_sweep = time.perf_counter() - t0
    step = (0.40 - 0.28) / 119
    th = transition_theta(rows)
    c.true("transition found", th is not None)
    if th is not None:
        c.close("transition", th, pt.theta0, step)

    t0 = time.perf_counter()
    labels = {}
    for name, p, theta, start, expected in PORTRAITS:
        labels[name] = classify_attractor(iterate(start, 10_000, p.with_theta(theta))).label
        c.true(f"{name}: {labels[name]} != {expected}", labels[name] == expected)
    t_port = time.perf_counter() - t0
    c.true(f"portrait runtime {t_port:.1f}s < 30s", t_port < 30.0)
    c.finish(record_criterion, 8,
             f"transition {th:.5f} vs theta0 {pt.theta0:.5f} (step {step:.2e}, sweep {t_sweep:.1f}s); "
             f"{len(PORTRAITS)} portraits in {t_port:.1f}s" if th is not None else "")


def test_criterion_09_control(record_criterion):
    c = Checks()
    p = CONTROL
    target = resolve_target(p)
    tri = stability_triangle(target, p)
    c.true("non-degenerate triangle", not tri.degenerate)

    vs = np.array(tri.vertices)
    pad = 0.25 * np.ptp(vs, axis=0)
    s1 = np.linspace(vs[:, 0].min() - pad[0], vs[:, 0].max() + pad[0], 401)
    s2 = np.linspace(vs[:, 1].min() - pad[1], vs[:, 1].max() + pad[1], 401)
    S1, S2 = np.meshgrid(s1, s2, indexing="ij")
    stable = stable_grid(target, p, s1, s2)
    inside = tri.contains(S1, S2)
    near = tri.contains(S1, S2, band=-1e-6) & ~tri.contains(S1, S2, band=1e-6)
    agree = float(np.mean(stable[~near] == inside[~near]))
    c.true(f"grid agreement {agree:.5f}", agree >= 0.999)

    rng = np.random.default_rng(99)

    # the triangle certifies local stability only; for |s2| near 9 the basin is narrower than 0.05
    radius = 0.02

    def start():
        ang, rad = rng.uniform(0, 2 * math.pi), radius * math.sqrt(rng.uniform())
        return target.u + rad * math.cos(ang), target.v + rad * math.sin(ang)

    interior = []
    while len(interior) < 20:
        w = rng.dirichlet((1.0, 1.0, 1.0))
        g = tuple(w @ vs)
        if tri.contains(*g, band=0.05):
            interior.append(g)
    exterior = []
    while len(exterior) < 20:
        g = (rng.uniform(s1[0], s1[-1]), rng.uniform(s2[0], s2[-1]))
        if not tri.contains(*g, band=-0.05):
            exterior.append(g)
    conv_in = sum(controlled_orbit_converges(start(), Gains(*g), target, p) for g in interior)
    conv_out = sum(controlled_orbit_converges(start(), Gains(*g), target, p) for g in exterior)
    c.true(f"interior converged {conv_in}/20", conv_in == 20)
    c.true(f"exterior converged {conv_out}/20", conv_out == 0)
    c.finish(record_criterion, 9,
             f"target {target.kind} ({target.u:.4f},{target.v:.4f}); grid agreement {agree:.5f}; "
             f"interior {conv_in}/20, exterior {conv_out}/20 (starts within {radius})")


def test_criterion_10_global_stability(record_criterion):
    c = Checks()
    for name, p in GLOBAL_SETS.items():
        which = SET_OF[name]
        descent_hypotheses(p)
        rep = invariant_set_check(p, which, samples=100_000, seed=10)
        c.true(f"{name}: {len(rep.violations)} invariance violations", rep.ok)
        starts = sample_set(p.gamma, which, 200, np.random.default_rng(11))
        starts = starts[starts[:, 0] > 0][:100]
        passed = sum(lyapunov_descent(iterate(tuple(s), 5000, p)) for s in starts)
        c.true(f"{name}: descent {passed}/{len(starts)}", passed == len(starts) == 100)
    c.finish(record_criterion, 10, "3 sets x 100 starts, 1e5 invariance samples each")


def test_criterion_11_conjecture_audit(record_criterion, audit_report):
    rep, _ = audit_report
    d = rep.as_dict()["conjecture"]
    # produced report: every E2 found carries its F(-1) certificate
    e2 = [cs for cs in rep.cases if cs.e2_f_minus_one is not None]
    ok = len(e2) == d["e2_found"] and all(math.isfinite(cs.e2_f_minus_one) for cs in e2)
    for cs in rep.conjecture_counterexamples:
        fps = [fp for fp in find_fixed_points(cs.params, check=False) if fp.kind == "E2"]
        ok &= bool(fps) and max(abs(z) for z in fps[0].stability.eigenvalues) > 1
    record_criterion(11, ok, f"{d['e2_found']} E2 found, {len(d['counterexamples'])} with F(-1) <= 0 "
                             f"(min {d['min_f_minus_one']:.3g})")
    assert ok
