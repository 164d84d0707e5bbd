"""Acceptance criteria 1-12, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v`` (the PASS/FAIL lines are
printed in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from beamvar.cli import crossings_of, gamma_sweep
from beamvar.euler import (TWO_SQRT_PI, G_of_mu, find_threshold_lambda, rescaled_right_cauchy, solve_E,
                           split_solve, touch_condition)
from beamvar.model import BeamParams, Grid, energy_full, gradient_full
from beamvar.obstacle import ObstacleSpec, touch_set, x_lambda
from beamvar.solvers import el_residual, minimize_constrained, minimize_reduced, perturbation_audit
from beamvar.theta import detect_theta_jump, solve_monotone

GRAD_TOL = 1e-10
RESULTS = {}


def c1_theta_residual():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for b in (0.1, 0.5, 0.99):
        phi = rng.uniform(-3 * math.pi, 3 * math.pi, 1000)
        x = rng.uniform(0, 1, 1000)
        th = solve_monotone(phi, b * (1 - x))
        worst = max(worst, float(np.max(np.abs(th - b * (1 - x) * np.cos(th) - phi))))
    dt = time.perf_counter() - t0
    return worst < 1e-12 and dt < 1.0, f"max residual {worst:.2e}, {dt:.2f} s"


def c2_gradient():
    rng = np.random.default_rng(2)
    g = Grid.uniform(64)
    p = BeamParams(1.0, 0.05)
    step = 1e-6
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        phi = np.concatenate([[0.0], rng.normal(size=64)])
        th = rng.normal(size=64)
        gp, gt = gradient_full(phi, th, p, g)
        fd_p = np.zeros(65)
        for i in range(1, 65):
            e = np.zeros(65)
            e[i] = step
            fd_p[i] = (energy_full(phi + e, th, p, g) - energy_full(phi - e, th, p, g)) / (2 * step)
        fd_t = np.zeros(64)
        for i in range(64):
            e = np.zeros(64)
            e[i] = step
            fd_t[i] = (energy_full(phi, th + e, p, g) - energy_full(phi, th - e, p, g)) / (2 * step)
        exact = np.concatenate([gp[1:], gt])
        fd = np.concatenate([fd_p[1:], fd_t])
        worst = max(worst, float(np.max(np.abs(exact - fd)) / np.max(np.abs(exact))))
    dt = time.perf_counter() - t0
    return worst < 1e-6 and dt < 5.0, f"max relative error {worst:.2e}, {dt:.2f} s"


def c3_global_branch():
    t0 = time.perf_counter()
    res = minimize_reduced(BeamParams(1.0, 0.01), Grid.uniform(1024))
    dt = time.perf_counter() - t0
    phi, th = res.phi.values, res.theta.values
    lo, hi = -1e-8, math.pi / 2 + 1e-8
    ok = (res.converged and lo <= phi.min() and phi.max() <= hi and lo <= th.min() and th.max() <= hi
          and bool(np.all(np.diff(phi) > 0)) and dt < 60)
    return ok, f"phi in [{phi.min():.3g}, {phi.max():.6f}], theta in [{th.min():.4f}, {th.max():.6f}], {dt:.2f} s"


def c4_local_branch():
    t0 = time.perf_counter()
    p = BeamParams(1.0, 0.01)
    spec = ObstacleSpec(p.lam)
    g = spec.grid(1024)
    res = minimize_constrained(p, spec, g)
    phi = res.phi.values
    at_switch = phi[g.index_of(spec.x_switch)]
    touches = touch_set(res.phi, spec, 1e-6)
    radius = 0.05
    worst = perturbation_audit(res, p, g, radius, 200)
    dt = time.perf_counter() - t0
    ok = (res.converged and bool(np.all(phi[1:] < 0)) and at_switch < -math.pi - 1e-3
          and set(touches) <= {0} and worst >= -GRAD_TOL * radius and dt < 120)
    return ok, (f"max phi(x>0) {phi[1:].max():.4f}, phi(x_lambda) {at_switch:.5f}, touch {touches}, "
                f"audit worst change {worst:+.2e}, {dt:.2f} s")


def c5_el_convergence():
    p = BeamParams(0.5, 0.1)
    r = []
    for n in (128, 256, 512, 1024):
        g = Grid.uniform(n)
        r.append(el_residual(minimize_reduced(p, g), p, g))
    ratios = [a / b for a, b in zip(r, r[1:])]
    return all(3 <= q <= 5 for q in ratios), "ratios " + ", ".join(f"{q:.3f}" for q in ratios)


def c6_obstacle_asymptotics():
    dev = [abs(lam * x_lambda(lam) ** 2 - 2 * math.pi) for lam in (1e2, 1e3, 1e4)]
    ok = dev[0] > dev[1] > dev[2] and dev[2] < 0.02 * 2 * math.pi
    return ok, "relative deviations " + ", ".join(f"{d / (2 * math.pi):.4f}" for d in dev)


def c7_constants():
    t0 = time.perf_counter()
    closed = math.sqrt(2) * math.log(1 + math.sqrt(2)) / math.sqrt(math.pi)
    g4 = G_of_mu(4 * math.pi)
    e = solve_E()
    nu = rescaled_right_cauchy()
    dt = time.perf_counter() - t0
    ok = (abs(g4 - closed) < 1e-8 and g4 < math.sqrt(math.pi) / 2 and abs(G_of_mu(e) - 1) <= 1e-8
          and e < 4 * math.pi and abs(nu - TWO_SQRT_PI) < 1e-3 and dt < 30)
    return ok, f"G(4pi)={g4:.10f}, E={e:.10f}, nu={nu:.8f}, {dt:.2f} s"


def c8_slope_asymptotics():
    t0 = time.perf_counter()
    lam = 1e3
    s = split_solve(lam, 2048)
    dl = s.x_switch * s.left_slope + math.sqrt(solve_E())
    dr = s.x_switch * s.right_slope + TWO_SQRT_PI
    dt = time.perf_counter() - t0
    ok = abs(dl) < 0.05 and abs(dr) < 0.05 and dt < 300
    return ok, f"x l' + sqrt(E) = {dl:+.4f}, x r' + 2 sqrt(pi) = {dr:+.4f}, {dt:.2f} s"


def c9_regime_flips():
    a, b = touch_condition(15.0), touch_condition(100.0)
    return a and not b, f"touch(15)={a}, touch(100)={b}"


def c10_threshold():
    lams = {n: find_threshold_lambda(15.0, 100.0, 1e-3, n) for n in (512, 2048)}
    ok = all(42 < v < 43 for v in lams.values()) and abs(lams[512] - lams[2048]) < 0.5
    return ok, ", ".join(f"n={n}: {v:.4f}" for n, v in lams.items())


def c11_gamma_sweep():
    rows, _, _ = gamma_sweep(BeamParams(1.0, 0.01), [0.4, 0.2, 0.1, 0.05, 0.025], 1024)
    d = [r.sup_distance_to_eps0_minimizer for r in rows]
    return all(a > b for a, b in zip(d, d[1:])), "distances " + ", ".join(f"{v:.2e}" for v in d)


def c12_theta_jump():
    p = BeamParams(2.0, 0.02)
    spec = ObstacleSpec(p.lam)
    g = spec.grid(1024)
    res = minimize_constrained(p, spec, g)
    jumps = detect_theta_jump(res.theta, g, 0.1)
    cross = crossings_of(res.phi, -math.pi / 2)
    good = [(x, m) for x, m in jumps if p.b * (1 - x) > 1 and any(abs(x - c) <= 2 * g.h_max for c in cross)]
    ok = res.converged and bool(good)
    where = f"jump at x={good[0][0]:.5f} size {good[0][1]:.3f}" if good else f"jumps {jumps}"
    return ok, f"{where}, crossings {[round(c, 5) for c in cross]}"


CRITERIA = {
    1: ("theta-map residual", c1_theta_residual),
    2: ("gradient check", c2_gradient),
    3: ("global branch", c3_global_branch),
    4: ("local branch", c4_local_branch),
    5: ("EL residual convergence", c5_el_convergence),
    6: ("obstacle asymptotics", c6_obstacle_asymptotics),
    7: ("limiting constants", c7_constants),
    8: ("slope asymptotics", c8_slope_asymptotics),
    9: ("regime flips", c9_regime_flips),
    10: ("detachment threshold", c10_threshold),
    11: ("gamma sweep", c11_gamma_sweep),
    12: ("theta discontinuity", c12_theta_jump),
}


def run(num):
    name, fn = CRITERIA[num]
    ok, detail = fn()
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:2d} ({name}): {detail}"
    RESULTS[num] = line
    print(line)
    return ok, line


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num):
    ok, line = run(num)
    assert ok, line


if __name__ == "__main__":
    for n in sorted(CRITERIA):
        run(n)
