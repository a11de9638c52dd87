"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 5-7 and 9 run full-size solves (M up to 512) and take minutes.
"""

import time

import numpy as np
import pytest

from fracnodal.errors import FaceSignViolation
from fracnodal.experiments import SweepConfig, cauchy_looking, run_b_sweep, run_energy_doubling, run_grid_study
from fracnodal.functional import (
    Problem,
    components,
    decomposition_excess,
    decomposition_excess_closed_form,
    energy,
    energy_from_components,
    gagliardo_energy,
    h_norm_sq,
    pairing,
    pairing_gap,
)
from fracnodal.model import ModelParams
from fracnodal.nehari import MirandaBox, miranda_solve, pair_project, w_field
from fracnodal.solver import SolverConfig, minimize_nodal, verify_critical

from conftest import random_sign_changing
from test_nehari import grid_scan_zero, nonlinear_F


@pytest.fixture
def verdict(request):
    """Write one line per criterion to the terminal, then assert."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def _report(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        assert ok, line

    return _report


@pytest.fixture(scope="module")
def p128():
    return Problem.build(ModelParams(grid_points=128))


def test_criterion_1_algebraic_identities(p128, verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_g = worst_x = 0.0
    excess_pos = gap_pos = True
    for _ in range(50):
        u = random_sign_changing(rng, p128.grid)
        eb = components(p128, u)
        G = gagliardo_energy(p128, u)
        worst_g = max(worst_g, abs(eb.gagliardo - G) / abs(G))
        ex = decomposition_excess(p128, u)
        cf = decomposition_excess_closed_form(p128, eb)
        worst_x = max(worst_x, abs(ex - cf) / abs(cf))
        excess_pos &= ex > 0
        gap_pos &= pairing_gap(p128, eb, +1) > 0 and pairing_gap(p128, eb, -1) > 0
    dt = time.perf_counter() - t0
    ok = worst_g <= 1e-12 and worst_x <= 1e-12 and excess_pos and gap_pos and dt < 5
    verdict(1, ok, f"split rel err {worst_g:.1e}, excess rel err {worst_x:.1e}, "
                   f"excess>0 {excess_pos}, gaps>0 {gap_pos}, {dt:.2f}s")


def test_criterion_2_gradient(p128, verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    h = 1e-6
    worst = 0.0
    for _ in range(20):
        u = random_sign_changing(rng, p128.grid)
        for _ in range(5):
            phi = rng.normal(size=u.size)
            fd = (energy(p128, u + h * phi) - energy(p128, u - h * phi)) / (2 * h)
            an = pairing(p128, u, phi)
            worst = max(worst, abs(an - fd) / abs(an))
    dt = time.perf_counter() - t0
    verdict(2, worst <= 1e-5 and dt < 5, f"worst relative FD error {worst:.2e}, {dt:.2f}s")


def test_criterion_3_pair_solver(p128, verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    mp = p128.params
    # (a) closed form against direct pairings
    worst_w = 0.0
    for _ in range(10):
        u = random_sign_changing(rng, p128.grid)
        eb = components(p128, u)
        up, um = np.maximum(u, 0), np.minimum(u, 0)
        al, be = rng.uniform(0.3, 3.0, size=2)
        v = al * up + be * um
        w1, w2 = w_field(mp, eb, al, be)
        worst_w = max(worst_w, abs(w1 - pairing(p128, v, al * up)) / abs(w1),
                      abs(w2 - pairing(p128, v, be * um)) / abs(w2))
    # (b) residual, (c) reproducibility over 10 bracket starts, (e) maximality
    worst_res = worst_rep = 0.0
    maximal = True
    for _ in range(5):
        u = random_sign_changing(rng, p128.grid)
        ref = pair_project(p128, u)
        worst_res = max(worst_res, ref.residual_norm)
        for g in rng.uniform(0.05, 20.0, size=(10, 2)):
            p = pair_project(p128, u, guess=tuple(g))
            worst_rep = max(worst_rep, abs(p.alpha - ref.alpha) / ref.alpha, abs(p.beta - ref.beta) / ref.beta)
        eb = components(p128, u)
        A, B = np.meshgrid(np.linspace(0.01, 3, 101) * ref.alpha, np.linspace(0.01, 3, 101) * ref.beta)
        best = energy_from_components(p128, eb, ref.alpha, ref.beta)
        maximal &= bool(np.max(energy_from_components(p128, eb, A, B)) <= best * (1 + 1e-12))
    # (d) nonpositive half-pairings give alpha, beta <= 1
    bounded = True
    built = 0
    while built < 20:
        u = rng.uniform(2.0, 6.0) * random_sign_changing(rng, p128.grid)
        if pairing(p128, u, np.maximum(u, 0)) > 0 or pairing(p128, u, np.minimum(u, 0)) > 0:
            continue
        p = pair_project(p128, u)
        bounded &= p.alpha <= 1 + 1e-10 and p.beta <= 1 + 1e-10
        built += 1
    dt = time.perf_counter() - t0
    ok = worst_w <= 1e-12 and worst_res <= 1e-10 and worst_rep <= 1e-6 and bounded and maximal and dt < 30
    verdict(3, ok, f"W rel err {worst_w:.1e}, residual {worst_res:.1e}, reproducibility {worst_rep:.1e}, "
                   f"half-pairing property {bounded}, grid maximality {maximal}, {dt:.2f}s")


def test_criterion_4_miranda(verdict):
    t0 = time.perf_counter()
    A = np.array([[3.0, 0.5], [-0.4, 2.0]])
    target = np.array([0.7, -1.3])
    lin = miranda_solve(lambda x: A @ (target - x), MirandaBox([-2, -3], [2, 1]))
    lin_err = float(np.max(np.abs(lin - target)))
    x = miranda_solve(nonlinear_F, MirandaBox([0.5, 0.5], [3.0, 3.0]))
    scan_err = float(np.max(np.abs(x - grid_scan_zero(nonlinear_F, [0.5, 0.5], [3.0, 3.0], n=400))))
    try:
        miranda_solve(lambda x: x - 0.5, MirandaBox([0.0], [1.0]))
        detected = False
    except FaceSignViolation:
        detected = True
    dt = time.perf_counter() - t0
    ok = lin_err <= 1e-12 and scan_err <= 1e-6 and detected and dt < 5
    verdict(4, ok, f"linear err {lin_err:.1e}, grid-scan err {scan_err:.1e}, violation detected {detected}, "
                   f"{dt:.2f}s")


def test_criterion_5_nodal_solve(verdict):
    t0 = time.perf_counter()
    pr = Problem.build(ModelParams(grid_points=256, half_width=20.0))
    res = minimize_nodal(pr, SolverConfig())
    rep = verify_critical(pr, res.field, tol=1e-8)
    pair = pair_project(pr, res.field)
    u = res.field.values
    up, um = np.maximum(u, 0), np.minimum(u, 0)
    lattice = all(
        energy(pr, al * up + be * um) < res.level
        for al in (0.5, 0.9, 1.1, 1.5)
        for be in (0.5, 0.9, 1.1, 1.5)
    )
    dt = time.perf_counter() - t0
    ok = (res.residual_inf <= 1e-8 and res.iters <= 200_000 and rep.passed
          and pair.distance_to_unit() <= 1e-8 and lattice and dt < 180)
    verdict(5, ok, f"level {res.level:.10g}, {res.iters} iters, residual {res.residual_inf:.2e}, "
                   f"critical {rep.passed}, pair offset {pair.distance_to_unit():.1e}, lattice {lattice}, {dt:.1f}s")


def test_criterion_6_energy_doubling(verdict):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for b in (1.0, 0.0, 0.1):
        rec = run_energy_doubling(ModelParams(b=b))
        ok &= rec.margin > 0 and rec.chain.holds
        parts.append(f"b={b:g}: margin {rec.margin:.6g} chain {rec.chain.holds}")
    dt = time.perf_counter() - t0
    ok &= dt < 600
    verdict(6, ok, "; ".join(parts) + f"; {dt:.0f}s")


def test_criterion_7_continuation(verdict):
    t0 = time.perf_counter()
    entries = run_b_sweep(SweepConfig())
    d = [e.distance_to_limit for e in entries]
    tail = d[-4:]
    decreasing = all(y < x for x, y in zip(tail, tail[1:]))
    nonzero = [e for e in entries if e.b > 0]
    b_min = nonzero[-1]
    gap = b_min.distance_to_limit
    offsets = [max(abs(e.record.pair_alpha - 1), abs(e.record.pair_beta - 1)) for e in entries]
    converging = all(y < x for x, y in zip(offsets, offsets[1:]))
    last_off = offsets[len(nonzero) - 1]
    dt = time.perf_counter() - t0
    ok = decreasing and gap <= 1e-2 and last_off <= 1e-2 and converging and dt < 900
    verdict(7, ok, f"tail distances {[f'{x:.3g}' for x in tail]} decreasing {decreasing}; "
                   f"gap at b={b_min.b:g} is {gap:.3g} (need <= 1e-2); pair offset {last_off:.3g} "
                   f"(need <= 1e-2), converging {converging}; {dt:.0f}s")


def test_criterion_8_coercivity(p128, verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = np.inf
    for _ in range(100):
        u = rng.uniform(0.1, 5.0) * random_sign_changing(rng, p128.grid, smooth=bool(rng.integers(2)))
        slack = energy(p128, u) - 0.25 * pairing(p128, u, u) - 0.25 * p128.a * h_norm_sq(p128, u)
        worst = min(worst, slack)
    dt = time.perf_counter() - t0
    verdict(8, worst >= 0 and dt < 2, f"minimum slack {worst:.3e}, {dt:.2f}s")


def test_criterion_9_grid_robustness(verdict):
    t0 = time.perf_counter()
    levels = run_grid_study(ModelParams(), grid_points=(128, 256, 512))
    vals = [g.level for g in levels]
    ok = cauchy_looking(vals)
    dt = time.perf_counter() - t0
    ok &= dt < 600
    desc = ", ".join(f"M={g.grid_points}: {g.level:.10g} ({g.source})" for g in levels)
    verdict(9, ok, f"{desc}; differences {abs(vals[1] - vals[0]):.4g} > {abs(vals[2] - vals[1]):.4g}; {dt:.0f}s")
