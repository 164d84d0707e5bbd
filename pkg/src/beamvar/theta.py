"""Pointwise elimination of the tangent angle theta.

For fixed ``phi`` the energy density is, up to terms free of theta,

    H(x, phi, theta) = -phi*theta + theta**2/2 - beta*sin(theta),
    beta = b*(1 - x),

so theta is chosen independently at every quadrature point. Stationary
points solve ``theta - beta*cos(theta) = phi``; for ``beta < 1`` the left
side is strictly increasing and the root is unique.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BeamParams, Grid, PhiField, ThetaField, _values

RESIDUAL_TOL = 1e-12
JUMP_DELTA = 0.1


class ThetaSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class PointwiseProblem:
    phi_val: float
    x: float
    b: float

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise ValueError("x must lie in [0, 1]")
        if self.b <= 0:
            raise ValueError("b must be positive")


@dataclass(frozen=True)
class BandIndex:
    """Label ``n`` of the band ``[(2n-1)pi/2, (2n+1)pi/2]``."""

    n: int

    @property
    def interval(self) -> tuple[float, float]:
        return ((2 * self.n - 1) * math.pi / 2, (2 * self.n + 1) * math.pi / 2)


def h_density(theta, phi, beta):
    return -phi * theta + 0.5 * theta**2 - beta * np.sin(theta)


def _stationarity(theta, phi, beta):
    return theta - phi - beta * np.cos(theta)


def _bisect_pieces(lo, hi, phi, beta, iters=200):
    """Vectorized bisection of the stationarity equation on monotone pieces.

    Returns the roots and a mask of the pieces that contain a sign change.
    """
    f_lo = _stationarity(lo, phi, beta)
    f_hi = _stationarity(hi, phi, beta)
    ok = (f_lo * f_hi <= 0.0) & (hi >= lo)
    lo, hi = lo.copy(), hi.copy()
    neg_lo = f_lo < 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = _stationarity(mid, phi, beta)
        go_right = (fm < 0.0) == neg_lo
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(lo))):
            break
    root = 0.5 * (lo + hi)
    # exact endpoint roots
    root = np.where(f_lo == 0.0, lo, np.where(f_hi == 0.0, hi, root))
    return root, ok


def argmin_enumerate(phi, x, b):
    """Smallest global minimizer of ``H(x, phi, .)``, vectorized.

    Every stationary point is located by bisection on the pieces where the
    stationarity map is monotone (split at ``sin(theta) = -1/beta``); the
    candidates are compared by their ``H`` values.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    beta = np.broadcast_to(b * (1.0 - np.asarray(x, dtype=float)), phi.shape).astype(float)
    big_d = np.abs(phi) + np.sqrt(2.0 * b + phi**2)
    lo = np.maximum(-big_d, phi - beta)
    hi = np.minimum(big_d, phi + beta)
    if np.any(lo > hi):
        raise ThetaSolveError("empty search bracket")

    breaks = [lo, hi]
    multi = beta > 1.0
    if np.any(multi):
        a = np.arcsin(1.0 / np.where(multi, beta, 1.0))
        m_lo = math.floor(float(np.min(lo)) / (2 * math.pi)) - 1
        m_hi = math.ceil(float(np.max(hi)) / (2 * math.pi)) + 1
        for m in range(m_lo, m_hi + 1):
            for c in (-a + 2 * math.pi * m, math.pi + a + 2 * math.pi * m):
                inside = multi & (c > lo) & (c < hi)
                breaks.append(np.where(inside, c, lo))
    bp = np.sort(np.stack(breaks, axis=1), axis=1)
    npc = bp.shape[1] - 1
    rep = lambda v: np.repeat(v[:, None], npc, axis=1)
    roots, ok = _bisect_pieces(bp[:, :-1], bp[:, 1:], rep(phi), rep(beta))
    if not np.all(ok.any(axis=1)):
        raise ThetaSolveError("no stationary point found inside the a-priori bracket")
    hv = np.where(ok, h_density(roots, rep(phi), rep(beta)), np.inf)
    hmin = hv.min(axis=1, keepdims=True)
    near = hv <= hmin + 1e-14 * (1.0 + np.abs(hmin))
    return np.where(near, roots, np.inf).min(axis=1)


def pointwise_theta_argmin(prob: PointwiseProblem) -> float:
    """Smallest global minimizer of ``H(x, phi, .)`` for a single point."""
    return float(argmin_enumerate(prob.phi_val, prob.x, prob.b)[0])


def solve_monotone(phi, beta, tol=RESIDUAL_TOL, max_iter=100):
    """Safeguarded Newton for ``theta - beta*cos(theta) = phi`` with ``beta < 1``."""
    phi = np.asarray(phi, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), phi.shape)
    lo, hi = phi - beta, phi + beta
    th = phi + beta * np.cos(phi)
    th = np.clip(th, lo, hi)
    r = _stationarity(th, phi, beta)
    floor = 4 * np.finfo(float).eps * (1.0 + np.abs(phi))
    for _ in range(max_iter):
        done = (np.abs(r) <= floor) | (hi - lo <= floor)
        if np.all(done):
            break
        lo = np.where(r < 0, th, lo)
        hi = np.where(r > 0, th, hi)
        cand = th - r / (1.0 + beta * np.sin(th))
        bad = ~((cand > lo) & (cand < hi))
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        rc = _stationarity(cand, phi, beta)
        worse = np.abs(rc) >= np.abs(r)
        mid = 0.5 * (lo + hi)
        cand = np.where(worse & ~bad, mid, cand)
        rc = np.where(worse & ~bad, _stationarity(mid, phi, beta), rc)
        th = np.where(done, th, cand)
        r = np.where(done, r, rc)
    if np.all(np.abs(r) < tol):
        return th
    raise ThetaSolveError(f"Newton did not converge, max residual {np.max(np.abs(r)):.3e}")


def theta_map(phi: PhiField | np.ndarray, p: BeamParams, g: Grid) -> ThetaField:
    """The map ``phi -> Theta(phi)`` of the uniqueness regime ``b < 1``."""
    if p.b >= 1.0:
        raise ValueError("theta_map needs b < 1; use theta_optimal for b >= 1")
    ph = _values(phi, g.n_nodes, "phi")
    phim = 0.5 * (ph[:-1] + ph[1:])
    return ThetaField(solve_monotone(phim, p.b * (1.0 - g.midpoints)), g)


def theta_optimal(phi_mid, x_mid, b):
    """Pointwise optimal theta at given midpoint values of phi.

    Uses Newton where ``b*(1 - x) < 1`` and stationary-point enumeration
    elsewhere. Both return the smallest global minimizer of ``H``.
    """
    phi_mid = np.asarray(phi_mid, dtype=float)
    beta = b * (1.0 - np.asarray(x_mid, dtype=float))
    beta = np.broadcast_to(beta, phi_mid.shape)
    out = np.empty_like(phi_mid)
    easy = beta < 1.0
    if np.any(easy):
        out[easy] = solve_monotone(phi_mid[easy], beta[easy])
    if np.any(~easy):
        x = np.broadcast_to(np.asarray(x_mid, dtype=float), phi_mid.shape)
        out[~easy] = argmin_enumerate(phi_mid[~easy], x[~easy], b)
    return out


def optimal_theta_field(phi: PhiField | np.ndarray, p: BeamParams, g: Grid) -> ThetaField:
    ph = _values(phi, g.n_nodes, "phi")
    return ThetaField(theta_optimal(0.5 * (ph[:-1] + ph[1:]), g.midpoints, p.b), g)


def band_classify(v: float) -> BandIndex:
    """Band containing ``v``; shared edges go to the lower band."""
    return BandIndex(int(math.ceil(v / math.pi - 0.5)))


def detect_theta_jump(theta: ThetaField | np.ndarray, g: Grid, delta: float = JUMP_DELTA):
    """Locations and sizes of jumps larger than ``delta`` between neighbouring cells.

    The reported location is the node shared by the two cells.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    th = _values(theta, g.n_cells, "theta")
    d = np.abs(np.diff(th))
    idx = np.flatnonzero(d > delta)
    return [(float(g.nodes[i + 1]), float(d[i])) for i in idx]


def write_jumps_csv(jumps, path) -> None:
    with open(path, "w") as fh:
        fh.write("x,magnitude\n")
        for x, m in jumps:
            fh.write(f"{x!r},{m!r}\n")
