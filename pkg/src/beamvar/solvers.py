"""Minimization drivers for the reduced, constrained and Euler problems.

All problems handled here share the chain structure

    E(phi) = sum_i h_i * (kappa/2 * ((phi_{i+1} - phi_i)/h_i)**2 + c_i(phi_mid_i))

with a tridiagonal Hessian. Theta is eliminated pointwise before the
minimization, so only the nodal unknowns remain. Bounds are upper bounds
only (the barrier sits above the admissible fields). The driver is a
projected Newton method with Armijo backtracking along the projection arc.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded, cho_solve_banded

from .model import BeamParams, Grid, PhiField, ThetaField, energy_full, _values
from .obstacle import TOUCH_TOL, ObstacleSpec, phi_star, touch_set
from .theta import theta_optimal

log = logging.getLogger(__name__)

CellFn = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class SolveOptions:
    grad_tol: float = 1e-10
    max_iters: int = 500
    step_rule: str = "backtracking"
    init: Union[str, np.ndarray] = "zero"
    margin: float = 0.1

    def __post_init__(self):
        if self.grad_tol <= 0 or self.max_iters < 1:
            raise ValueError("grad_tol must be positive and max_iters at least 1")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if isinstance(self.init, str) and self.init not in ("zero", "obstacle_minus_margin"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class MinimizerResult:
    phi: PhiField
    theta: Optional[ThetaField]
    energy: float
    grad_inf_norm: float
    active_nodes: list
    iterations: int
    converged: bool
    energy_history: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "grad_inf_norm": self.grad_inf_norm,
            "active_nodes": [int(i) for i in self.active_nodes],
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass
class ChainOutcome:
    x: np.ndarray
    energy: float
    grad: np.ndarray
    kkt: float
    active: np.ndarray
    iterations: int
    converged: bool
    history: list


class ChainProblem:
    """Energy of a piecewise-linear field on ``nodes`` with a per-cell potential.

    ``cell(phi_mid)`` returns ``(c, dc, d2c)`` per cell, already including
    any dependence on the cell midpoint.
    """

    def __init__(self, nodes: np.ndarray, kappa: float, cell: CellFn,
                 pinned: Sequence[int] = (0,), upper: Optional[np.ndarray] = None):
        self.nodes = np.asarray(nodes, dtype=float)
        self.h = np.diff(self.nodes)
        self.kappa = kappa
        self.cell = cell
        self.pinned = np.zeros(self.nodes.size, dtype=bool)
        self.pinned[list(pinned)] = True
        self.upper = np.full(self.nodes.size, np.inf) if upper is None else np.asarray(upper, float)
        self.mass = np.zeros(self.nodes.size)
        self.mass[:-1] += 0.5 * self.h
        self.mass[1:] += 0.5 * self.h

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.where(self.pinned, x, np.minimum(x, self.upper))

    def energy(self, x: np.ndarray) -> float:
        c, _, _ = self.cell(0.5 * (x[:-1] + x[1:]))
        return float(np.dot(self.h, 0.5 * self.kappa * (np.diff(x) / self.h) ** 2 + c))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        _, dc, _ = self.cell(0.5 * (x[:-1] + x[1:]))
        return self._assemble_grad(x, dc)

    def _assemble_grad(self, x, dc):
        flux = self.kappa * np.diff(x) / self.h
        src = 0.5 * self.h * dc
        g = np.zeros_like(x)
        g[1:] += flux + src
        g[:-1] += -flux + src
        g[self.pinned] = 0.0
        return g

    def derivatives(self, x: np.ndarray):
        c, dc, d2c = self.cell(0.5 * (x[:-1] + x[1:]))
        f = float(np.dot(self.h, 0.5 * self.kappa * (np.diff(x) / self.h) ** 2 + c))
        g = self._assemble_grad(x, dc)
        stiff = self.kappa / self.h
        quad = 0.25 * self.h * d2c
        diag = np.zeros_like(x)
        diag[1:] += stiff + quad
        diag[:-1] += stiff + quad
        off = -stiff + quad
        return f, g, diag, off

    def kkt_measure(self, x: np.ndarray, g: np.ndarray) -> float:
        at_bound = (x >= self.upper) & ~self.pinned
        inner = ~at_bound & ~self.pinned
        viol = np.concatenate([np.abs(g[inner]), np.maximum(g[at_bound], 0.0), [0.0]])
        return float(viol.max())


def _newton_direction(diag, off, g, fixed):
    """Solve ``H_FF d_F = -g_F`` on the free set, shifting ``H`` until it is positive definite."""
    n = diag.size
    d = diag.copy()
    e = off.copy()
    d[fixed] = 1.0
    e[fixed[:-1] | fixed[1:]] = 0.0
    rhs = np.where(fixed, 0.0, -g)
    scale = max(float(np.max(np.abs(d))), 1e-300)
    shift = 0.0
    for _ in range(80):
        band = np.zeros((2, n))
        band[0, 1:] = e
        band[1] = d + np.where(fixed, 0.0, shift)
        try:
            cb = cholesky_banded(band, lower=False)
        except LinAlgError:
            shift = max(2.0 * shift, 1e-10 * scale)
            continue
        out = cho_solve_banded((cb, False), rhs)
        out[fixed] = 0.0
        return out, shift
    raise LinAlgError("could not regularize the Hessian")


def projected_newton(prob: ChainProblem, x0: np.ndarray, opts: SolveOptions) -> ChainOutcome:
    x = prob.project(np.asarray(x0, dtype=float).copy())
    f, g, diag, off = prob.derivatives(x)
    history = [f]
    sigma = 1e-4
    kkt = prob.kkt_measure(x, g)
    it = 0
    while it < opts.max_iters and kkt > opts.grad_tol:
        it += 1
        # nodes counted active for the direction: near the bound and pushing into it
        w = float(np.max(np.abs(x - prob.project(x - g / prob.mass)), initial=0.0))
        eps_act = min(1e-6, w)
        active = (~prob.pinned) & (x >= prob.upper - eps_act) & (g < 0.0)
        fixed = prob.pinned | active
        d, _ = _newton_direction(diag, off, g, fixed)
        if opts.step_rule == "fixed":
            x = prob.project(x + d)
            f, g, diag, off = prob.derivatives(x)
        else:
            slack = 1e-13 * max(1.0, abs(f))
            accepted = False
            for direction in (d, np.where(fixed, 0.0, -g / prob.mass)):
                alpha = 1.0
                for _ in range(60):
                    xn = prob.project(x + alpha * direction)
                    fn = prob.energy(xn)
                    if fn <= f + sigma * float(np.dot(g, xn - x)) + slack:
                        accepted = True
                        break
                    alpha *= 0.5
                if accepted:
                    break
            if not accepted:
                log.debug("line search stalled at iteration %d, kkt=%.3e", it, kkt)
                break
            x = xn
            f, g, diag, off = prob.derivatives(x)
        history.append(f)
        kkt = prob.kkt_measure(x, g)
    active = np.flatnonzero((x >= prob.upper) & ~prob.pinned)
    return ChainOutcome(x, f, g, kkt, active, it, kkt <= opts.grad_tol, history)


# -- per-cell potentials ----------------------------------------------------

def timoshenko_cell(x_mid: np.ndarray, b: float) -> CellFn:
    """Reduced shear-plus-load density ``min_theta (phi - theta)^2/2 - beta sin(theta)``."""
    beta = b * (1.0 - x_mid)

    def cell(pm):
        th = theta_optimal(pm, x_mid, b)
        s = np.sin(th)
        c = 0.5 * (pm - th) ** 2 - beta * s
        denom = np.maximum(1.0 + beta * s, 1e-8)
        return c, pm - th, beta * s / denom

    return cell


def euler_cell(x_mid: np.ndarray, lam: float) -> CellFn:
    w = lam * (1.0 - x_mid)

    def cell(pm):
        s = np.sin(pm)
        return -w * s, -w * np.cos(pm), w * s

    return cell


def reduced_energy(phi, p: BeamParams, g: Grid) -> float:
    """``F(phi, Theta(phi))`` with the pointwise optimal theta."""
    ph = _values(phi, g.n_nodes, "phi")
    return ChainProblem(g.nodes, p.k, timoshenko_cell(g.midpoints, p.b)).energy(ph)


# -- drivers ----------------------------------------------------------------

def _initial_field(opts: SolveOptions, g: Grid, spec: Optional[ObstacleSpec]) -> np.ndarray:
    if isinstance(opts.init, np.ndarray) or not isinstance(opts.init, str):
        x0 = _values(opts.init, g.n_nodes, "init").copy()
    elif opts.init == "zero":
        x0 = np.zeros(g.n_nodes)
    else:
        if spec is None:
            raise ValueError("obstacle_minus_margin needs an obstacle")
        x0 = phi_star(g.nodes, spec) - opts.margin
    x0[0] = 0.0
    return x0


def _finish(out: ChainOutcome, g: Grid, theta: Optional[np.ndarray], energy: float):
    if not out.converged:
        log.warning("solver stopped after %d iterations with kkt=%.3e", out.iterations, out.kkt)
    return MinimizerResult(
        phi=PhiField(out.x, g),
        theta=None if theta is None else ThetaField(theta, g),
        energy=energy,
        grad_inf_norm=out.kkt,
        active_nodes=[int(i) for i in out.active],
        iterations=out.iterations,
        converged=out.converged,
        energy_history=out.history,
    )


def _timoshenko_result(out: ChainOutcome, p: BeamParams, g: Grid) -> MinimizerResult:
    th = theta_optimal(0.5 * (out.x[:-1] + out.x[1:]), g.midpoints, p.b)
    return _finish(out, g, th, energy_full(out.x, th, p, g))


def minimize_reduced(p: BeamParams, g: Grid, opts: SolveOptions = SolveOptions()) -> MinimizerResult:
    """Minimize ``phi -> F(phi, Theta(phi))`` over fields clamped at the origin."""
    prob = ChainProblem(g.nodes, p.k, timoshenko_cell(g.midpoints, p.b))
    out = projected_newton(prob, _initial_field(opts, g, None), opts)
    return _timoshenko_result(out, p, g)


def _require_knot(spec: ObstacleSpec, g: Grid) -> None:
    try:
        g.index_of(spec.x_switch)
    except KeyError:
        raise ValueError("grid must contain the switch point of the obstacle as a node") from None


def minimize_constrained(p: BeamParams, spec: ObstacleSpec, g: Grid,
                         opts: SolveOptions = SolveOptions(init="obstacle_minus_margin")) -> MinimizerResult:
    """Reduced Timoshenko energy under ``phi <= phi_star``."""
    _require_knot(spec, g)
    upper = phi_star(g.nodes, spec)
    prob = ChainProblem(g.nodes, p.k, timoshenko_cell(g.midpoints, p.b), upper=upper)
    out = projected_newton(prob, _initial_field(opts, g, spec), opts)
    return _timoshenko_result(out, p, g)


def minimize_euler_constrained(lam: float, spec: ObstacleSpec, g: Grid,
                               opts: SolveOptions = SolveOptions(init="obstacle_minus_margin")) -> MinimizerResult:
    """Euler-beam energy ``F_lambda`` under ``phi <= phi_star``; ``theta`` is ``None``."""
    _require_knot(spec, g)
    upper = phi_star(g.nodes, spec)
    prob = ChainProblem(g.nodes, 1.0, euler_cell(g.midpoints, lam), upper=upper)
    out = projected_newton(prob, _initial_field(opts, g, spec), opts)
    return _finish(out, g, None, out.energy)


def minimize_euler_free(lam: float, g: Grid, init: np.ndarray,
                        opts: SolveOptions = SolveOptions()) -> MinimizerResult:
    """Unconstrained ``F_lambda`` from a given starting field."""
    prob = ChainProblem(g.nodes, 1.0, euler_cell(g.midpoints, lam))
    out = projected_newton(prob, init, opts)
    return _finish(out, g, None, out.energy)


# -- diagnostics ------------------------------------------------------------

def one_sided_slope(x: np.ndarray, y: np.ndarray, at_end: bool) -> float:
    """Second-order three-point derivative at the first (or last) node."""
    if at_end:
        x, y = -x[::-1], y[::-1]
        return -one_sided_slope(x, y, False)
    h1, h2 = x[1] - x[0], x[2] - x[1]
    return (-(2 * h1 + h2) / (h1 * (h1 + h2)) * y[0]
            + (h1 + h2) / (h1 * h2) * y[1]
            - h1 / (h2 * (h1 + h2)) * y[2])


def el_residual(res: MinimizerResult, p: BeamParams, g: Grid) -> float:
    """Sup-norm defect of ``k phi'' = phi - theta`` plus ``|phi'(1)|``.

    Taken over interior nodes not in ``res.active_nodes``; theta is averaged
    to the nodes with cell-width weights.
    """
    ph = res.phi.values
    th = res.theta.values
    h = g.widths
    hl, hr = h[:-1], h[1:]
    d2 = 2.0 / (hl + hr) * ((ph[2:] - ph[1:-1]) / hr - (ph[1:-1] - ph[:-2]) / hl)
    th_node = (hl * th[:-1] + hr * th[1:]) / (hl + hr)
    r = p.k * d2 - (ph[1:-1] - th_node)
    keep = np.ones(r.size, dtype=bool)
    for i in res.active_nodes:
        if 1 <= i <= g.n_nodes - 2:
            keep[i - 1] = False
    interior = float(np.max(np.abs(r[keep]), initial=0.0))
    return interior + abs(one_sided_slope(g.nodes[-3:], ph[-3:], at_end=True))


def euler_el_residual(res: MinimizerResult, lam: float, g: Grid) -> float:
    """Sup-norm of ``phi'' + lambda (1-x) cos(phi)`` over inactive interior nodes."""
    ph = res.phi.values
    h = g.widths
    hl, hr = h[:-1], h[1:]
    d2 = 2.0 / (hl + hr) * ((ph[2:] - ph[1:-1]) / hr - (ph[1:-1] - ph[:-2]) / hl)
    x = g.nodes[1:-1]
    r = d2 + lam * (1.0 - x) * np.cos(ph[1:-1])
    keep = np.ones(r.size, dtype=bool)
    for i in res.active_nodes:
        if 1 <= i <= g.n_nodes - 2:
            keep[i - 1] = False
    return float(np.max(np.abs(r[keep]), initial=0.0))


def _h1_norm(v: np.ndarray, g: Grid) -> float:
    dv = np.diff(v) / g.widths
    vm = 0.5 * (v[:-1] + v[1:])
    return math.sqrt(float(np.dot(g.widths, dv**2 + vm**2)))


def perturbation_audit(res: MinimizerResult, p: BeamParams, g: Grid, radius: float = 0.05,
                       samples: int = 200, seed: int = 0, modes: int = 12) -> float:
    """Most negative energy change over random perturbations in an H1 ball.

    Each perturbation is a random combination of ``sin((j - 1/2) pi x)``
    (so it vanishes at the clamp) scaled to an H1 norm between
    ``radius/16`` and ``radius``. Theta is re-optimized pointwise for the
    perturbed field, which is the worst case over all theta.
    """
    if radius <= 0 or samples < 1:
        raise ValueError("radius must be positive and samples at least 1")
    rng = np.random.default_rng(seed)
    x = g.nodes
    basis = np.sin(np.outer(np.arange(1, modes + 1) - 0.5, np.pi * x))
    base = energy_full(res.phi, res.theta, p, g)
    prob = ChainProblem(g.nodes, p.k, timoshenko_cell(g.midpoints, p.b))
    worst = math.inf
    for s in range(samples):
        coef = rng.standard_normal(modes) / np.arange(1, modes + 1)
        v = coef @ basis
        scale = radius * 2.0 ** (-(s % 5))
        v *= scale / _h1_norm(v, g)
        worst = min(worst, prob.energy(res.phi.values + v) - base)
    return worst
