"""Cubic barrier capped at -pi and its switch point."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Grid, PhiField, _values
from .numerics import RootBracket, root_bisect

TOUCH_TOL = 1e-6


class NotDefined(ValueError):
    """The cubic branch never reaches -pi on [0, 1]."""


def _cubic(x, lam, eps):
    return 0.5 * lam * x**2 * (x / 3.0 - 1.0) - 0.5 * x**2 + eps


def x_lambda(lam: float, eps: float = 0.0) -> float:
    """Smallest ``x`` in (0, 1] where the shifted cubic equals ``-pi``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    f = lambda x: _cubic(x, lam, eps) + math.pi
    # the cubic is strictly decreasing on (0, 1] for lam > 0
    if f(1.0) > 0.0:
        raise NotDefined(f"the barrier stays above -pi for lambda={lam}, eps={eps}")
    return root_bisect(f, RootBracket.of(f, 0.0, 1.0), tol=1e-14)


@dataclass(frozen=True)
class ObstacleSpec:
    lam: float
    eps: float = 0.0
    x_switch: float = float("nan")

    def __post_init__(self):
        if math.isnan(self.x_switch):
            object.__setattr__(self, "x_switch", x_lambda(self.lam, self.eps))

    def __call__(self, x):
        return phi_star(x, self)

    def grid(self, n: int = 1024) -> Grid:
        """Uniform-per-piece grid with the switch point as a node."""
        return Grid.uniform(n).with_knot(self.x_switch)


def phi_star(x, spec: ObstacleSpec):
    """Barrier value ``max(cubic + eps, -pi)``; accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    v = np.where(x >= spec.x_switch, -math.pi, np.maximum(_cubic(x, spec.lam, spec.eps), -math.pi))
    return float(v) if v.ndim == 0 else v


def project_obstacle(phi: PhiField | np.ndarray, spec: ObstacleSpec, g: Grid) -> PhiField:
    """Pointwise ``min(phi, phi_star)`` at every node except the clamped one."""
    g.index_of(spec.x_switch)
    ph = _values(phi, g.n_nodes, "phi").copy()
    ph[1:] = np.minimum(ph[1:], phi_star(g.nodes[1:], spec))
    return PhiField(ph, g)


def touch_set(phi: PhiField, spec: ObstacleSpec, tol: float = TOUCH_TOL) -> list[int]:
    """Indices of nodes where ``phi`` is within ``tol`` of the barrier."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    gap = phi_star(phi.grid.nodes, spec) - phi.values
    return [int(i) for i in np.flatnonzero(gap <= tol)]


def write_obstacle_csv(spec: ObstacleSpec, g: Grid, path) -> None:
    with open(path, "w") as fh:
        fh.write("x,phi_star\n")
        for x, v in zip(g.nodes, phi_star(g.nodes, spec)):
            fh.write(f"{float(x)!r},{float(v)!r}\n")
