"""Euler-beam limit: split problems at the switch point, limiting constants
and the detachment threshold.

For ``F_lambda(phi) = int (phi'^2/2 - lambda (1-x) sin(phi))`` restricted to
fields through ``(x_lambda, -pi)``, the left and right halves are solved
separately; a minimizer can touch the barrier there only when the left
slope does not exceed the right slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import Grid
from .numerics import OdeState, RootBracket, quad_adaptive, rk4_integrate, root_bisect, shoot_dirichlet
from .obstacle import ObstacleSpec, phi_star, x_lambda
from .solvers import ChainProblem, SolveOptions, euler_cell, one_sided_slope, projected_newton

GridLike = Union[Grid, int, None]
DEFAULT_N = 1024
TWO_SQRT_PI = 2.0 * math.sqrt(math.pi)


class SplitSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class SplitSolution:
    """Minimizers of the left and right functionals, on their own node sets."""

    lam: float
    x_switch: float
    left_x: np.ndarray
    left: np.ndarray
    right_x: np.ndarray
    right: np.ndarray
    left_slope: float
    right_slope: float

    @property
    def touches(self) -> bool:
        return bool(self.left_slope <= self.right_slope)


def _knotted(lam: float, g: GridLike) -> tuple[ObstacleSpec, Grid]:
    spec = ObstacleSpec(lam)
    n = DEFAULT_N if g is None else (g if isinstance(g, int) else g.n_cells)
    if isinstance(g, Grid):
        try:
            g.index_of(spec.x_switch)
            return spec, g
        except KeyError:
            pass
    return spec, Grid.uniform(n).with_knot(spec.x_switch)


def _solve(prob: ChainProblem, x0: np.ndarray, opts: SolveOptions) -> np.ndarray:
    out = projected_newton(prob, x0, opts)
    if not out.converged:
        raise SplitSolveError(f"split solve did not converge (kkt={out.kkt:.3e})")
    return out.x


def solve_left(lam: float, g: GridLike = None, opts: SolveOptions = SolveOptions()):
    """Minimizer of the left functional on ``[0, x_lambda]`` and its slope at ``x_lambda``."""
    spec, g = _knotted(lam, g)
    i = g.index_of(spec.x_switch)
    x = g.nodes[: i + 1]
    upper = phi_star(x, spec)
    cell = euler_cell(0.5 * (x[:-1] + x[1:]), lam)
    prob = ChainProblem(x, 1.0, cell, pinned=(0, i), upper=upper)
    x0 = -math.pi * x / x[-1]
    x0[-1] = -math.pi
    phi = _solve(prob, x0, opts)
    return phi, one_sided_slope(x[-3:], phi[-3:], at_end=True)


def solve_right(lam: float, g: GridLike = None, opts: SolveOptions = SolveOptions()):
    """Minimizer of the right functional on ``[x_lambda, 1]`` under ``phi <= -pi``."""
    spec, g = _knotted(lam, g)
    i = g.index_of(spec.x_switch)
    x = g.nodes[i:]
    cell = euler_cell(0.5 * (x[:-1] + x[1:]), lam)
    prob = ChainProblem(x, 1.0, cell, pinned=(0,), upper=np.full(x.size, -math.pi))
    x0 = np.full(x.size, -math.pi - 0.1)
    x0[0] = -math.pi
    phi = _solve(prob, x0, opts)
    return phi, one_sided_slope(x[:3], phi[:3], at_end=False)


def split_solve(lam: float, g: GridLike = None) -> SplitSolution:
    spec, g = _knotted(lam, g)
    i = g.index_of(spec.x_switch)
    left, ls = solve_left(lam, g)
    right, rs = solve_right(lam, g)
    return SplitSolution(lam, spec.x_switch, g.nodes[: i + 1], left, g.nodes[i:], right, ls, rs)


def split_energy(sol: SplitSolution) -> float:
    """``L_lambda(left) + R_lambda(right)``, the energy of the glued field."""
    total = 0.0
    for x, v in ((sol.left_x, sol.left), (sol.right_x, sol.right)):
        total += ChainProblem(x, 1.0, euler_cell(0.5 * (x[:-1] + x[1:]), sol.lam)).energy(v)
    return total


def touch_condition(lam: float, g: GridLike = None) -> bool:
    """True when a minimizer through ``(x_lambda, -pi)`` is possible."""
    _, ls = solve_left(lam, g)
    _, rs = solve_right(lam, g)
    return bool(ls <= rs)


def slope_gap(lam: float, g: GridLike = None) -> float:
    _, ls = solve_left(lam, g)
    _, rs = solve_right(lam, g)
    return ls - rs


def find_threshold_lambda(lo: float = 15.0, hi: float = 100.0, tol: float = 1e-3,
                          g: GridLike = None) -> float:
    """Bisection on ``lambda`` for the sign change of ``left_slope - right_slope``.

    ``g`` only sets the resolution; every trial ``lambda`` gets its own
    knotted grid with the same cell count.
    """
    n = DEFAULT_N if g is None else (g if isinstance(g, int) else g.n_cells)
    f = lambda lam: slope_gap(lam, n)
    br = RootBracket.of(f, lo, hi)
    if not (br.f_lo <= 0.0 < br.f_hi):
        raise ValueError(f"lambda={lo} must touch and lambda={hi} must detach")
    return root_bisect(f, br, tol)


# -- limiting constants -----------------------------------------------------

def G_of_mu(mu: float, tol: float = 1e-10) -> float:
    if mu <= 0:
        raise ValueError("mu must be positive")
    four_pi = 4.0 * math.pi
    return quad_adaptive(lambda s: 1.0 / math.sqrt(mu + four_pi * math.sin(s)), 0.0, math.pi, tol)


def G_midpoint(mu: float, m: int = 1_000_000) -> float:
    """Fixed ``m``-point midpoint rule for the same integral."""
    s = (np.arange(m) + 0.5) * (math.pi / m)
    return float(np.sum(1.0 / np.sqrt(mu + 4.0 * math.pi * np.sin(s))) * (math.pi / m))


def solve_E(tol: float = 1e-10, quad_tol: float = 1e-12) -> float:
    """Unique ``E > 0`` with ``G(E) = 1``."""
    f = lambda e: G_of_mu(e, quad_tol) - 1.0
    return root_bisect(f, RootBracket.of(f, 1e-6, 4.0 * math.pi), tol)


def _heteroclinic_fate(nu: float, t_end: float, dt: float) -> int:
    """+1 when the orbit from ``(-pi, -nu)`` passes ``-3pi/2``, -1 when it turns back."""
    rhs = lambda t, y, v: -2.0 * math.pi * math.cos(y)
    state = OdeState(1.0, -math.pi, -nu)
    n_chunk = max(1, int(round(1.0 / dt)))
    t = 1.0
    while t < t_end:
        for s in rk4_integrate(rhs, state, t + n_chunk * dt, n_chunk)[1:]:
            if s.y < -1.5 * math.pi:
                return 1
            if s.yp >= 0.0:
                return -1
        state = s
        t = s.t
    return 1 if state.y + 1.5 * math.pi < -0.0 else -1


def rescaled_right_cauchy(t_end: float = 50.0, dt: float = 1e-3, tol: float = 1e-13) -> float:
    """Initial speed ``nu`` of the orbit of ``w'' + 2 pi cos(w) = 0`` from ``-pi``
    that creeps up to ``-3 pi / 2`` with vanishing speed."""
    f = lambda nu: float(_heteroclinic_fate(nu, t_end, dt))
    return root_bisect(f, RootBracket.of(f, 0.5, 2.0 * math.pi), tol)


def rescaled_left_slope(lam: float, slope_guess: float, width: float = 0.5,
                        n_steps: int = 4000) -> float:
    """``z'(1)`` for ``z'' + lambda x^2 (1 - x t) cos z = 0``, ``z(0)=0``, ``z(1)=-pi``.

    ``slope_guess`` is an estimate of the initial slope ``z'(0)``; the shot
    is bracketed around it so the Dirichlet solution of the minimizing
    branch is selected.
    """
    xl = x_lambda(lam)
    a = lam * xl * xl
    rhs = lambda t, y, v: -a * (1.0 - xl * t) * math.cos(y)
    s0 = shoot_dirichlet(rhs, 0.0, 0.0, 1.0, -math.pi,
                         (slope_guess - width, slope_guess + width), 1e-12, n_steps)
    return rk4_integrate(rhs, s0, 1.0, n_steps)[-1].yp


def constants(nu_kwargs: Optional[dict] = None) -> dict:
    e = solve_E()
    nu = rescaled_right_cauchy(**(nu_kwargs or {}))
    return {"E": e, "sqrtE": math.sqrt(e), "two_sqrt_pi": TWO_SQRT_PI, "nu": nu}
