"""Scalar kernels: adaptive Simpson quadrature, bisection, RK4 and shooting.

All routines are deterministic and use fixed iteration rules, so repeated
calls with the same inputs give bitwise-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List

Rhs = Callable[[float, float, float], float]


class QuadratureError(RuntimeError):
    pass


class BracketError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise BracketError(f"empty bracket [{self.lo}, {self.hi}]")
        if self.f_lo * self.f_hi > 0:
            raise BracketError(f"no sign change on [{self.lo}, {self.hi}]: f = {self.f_lo}, {self.f_hi}")

    @classmethod
    def of(cls, f: Callable[[float], float], lo: float, hi: float) -> "RootBracket":
        return cls(lo, hi, f(lo), f(hi))


@dataclass(frozen=True)
class OdeState:
    """Point ``(t, y, y')`` on a trajectory of a scalar second-order ODE."""

    t: float
    y: float
    yp: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t, self.y, self.yp)):
            raise IntegrationError(f"non-finite state {self}")


def quad_adaptive(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                  max_depth: int = 60) -> float:
    """Adaptive Simpson rule with the usual ``|S2 - S1| <= 15 tol`` acceptance."""
    if not a < b:
        raise ValueError("need a < b")
    if tol <= 0:
        raise ValueError("tol must be positive")

    def simpson(fa, fm, fb, w):
        return w / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, fa, m, fm, b, fb, whole, tol, depth):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise QuadratureError(f"maximum depth exceeded near [{a}, {b}]")
        return (recurse(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1)
                + recurse(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1))

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    return recurse(a, fa, m, fm, b, fb, simpson(fa, fm, fb, b - a), tol, 0)


def root_bisect(f: Callable[[float], float], br: RootBracket, tol: float = 1e-12,
                max_iter: int = 200) -> float:
    """Midpoint bisection until the bracket is narrower than ``tol``."""
    lo, hi, f_lo = br.lo, br.hi, br.f_lo
    if br.f_lo == 0.0:
        return lo
    if br.f_hi == 0.0:
        return hi
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (f_lo < 0):
            lo, f_lo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rk4_integrate(rhs: Rhs, init: OdeState, t_end: float, n_steps: int) -> List[OdeState]:
    """Classical RK4 for ``y'' = rhs(t, y, y')`` with a fixed step."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    dt = (t_end - init.t) / n_steps
    t, y, v = init.t, init.y, init.yp
    out = [init]
    for i in range(n_steps):
        try:
            k1y, k1v = v, rhs(t, y, v)
            k2y, k2v = v + 0.5 * dt * k1v, rhs(t + 0.5 * dt, y + 0.5 * dt * k1y, v + 0.5 * dt * k1v)
            k3y, k3v = v + 0.5 * dt * k2v, rhs(t + 0.5 * dt, y + 0.5 * dt * k2y, v + 0.5 * dt * k2v)
            k4y, k4v = v + dt * k3v, rhs(t + dt, y + dt * k3y, v + dt * k3v)
        except OverflowError as exc:
            raise IntegrationError(f"overflow near t={t}") from exc
        y = y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = init.t + (i + 1) * dt
        out.append(OdeState(t, y, v))
    return out


def shoot_dirichlet(rhs: Rhs, t0: float, y0: float, t1: float, y1_target: float,
                    slope_bracket: RootBracket | tuple, tol: float = 1e-10,
                    n_steps: int = 2000) -> OdeState:
    """Find the initial slope that carries ``y(t0) = y0`` to ``y(t1) = y1_target``.

    ``slope_bracket`` may be a :class:`RootBracket` of the endpoint mismatch or
    a plain ``(lo, hi)`` pair of slopes, in which case the mismatch is
    evaluated at both ends.
    """
    def miss(s):
        return rk4_integrate(rhs, OdeState(t0, y0, s), t1, n_steps)[-1].y - y1_target

    if not isinstance(slope_bracket, RootBracket):
        slope_bracket = RootBracket.of(miss, *slope_bracket)
    s = root_bisect(miss, slope_bracket, tol)
    return OdeState(t0, y0, s)
