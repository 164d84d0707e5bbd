"""Discretization of [0, 1], field types and the discrete energies.

The cross-section angle ``phi`` is piecewise linear (one value per node,
clamped at the origin), the tangent angle ``theta`` is cellwise constant
(one value per cell, attached to the cell midpoint). Every integral is
evaluated with the one-point midpoint rule per cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np


class DimensionError(ValueError):
    """Raised when a field does not match the grid it is used with."""


@dataclass(frozen=True)
class Grid:
    """Partition ``0 = x_0 < x_1 < ... < x_n = 1`` of the unit interval."""

    nodes: np.ndarray
    midpoints: np.ndarray = field(init=False, repr=False)
    widths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a grid needs at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        widths = np.diff(nodes)
        if np.any(widths <= 0.0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        mids.setflags(write=False)
        widths.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "midpoints", mids)
        object.__setattr__(self, "widths", widths)

    @classmethod
    def uniform(cls, n: int = 1024) -> "Grid":
        if n < 1:
            raise ValueError("n must be positive")
        return cls(np.linspace(0.0, 1.0, n + 1))

    @property
    def n_cells(self) -> int:
        return self.widths.size

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def h_max(self) -> float:
        return float(self.widths.max())

    def with_knot(self, *knots: float) -> "Grid":
        """Return a grid with the same cell count, uniform between knots.

        Each knot in (0, 1) becomes an exact node; the cells are distributed
        over the sub-intervals in proportion to their lengths (at least one
        cell each).
        """
        pts = sorted({0.0, 1.0, *(float(k) for k in knots)})
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("knots must lie in [0, 1]")
        lengths = np.diff(pts)
        n = self.n_cells
        if n < lengths.size:
            raise ValueError("not enough cells to separate the knots")
        counts = np.maximum(1, np.rint(lengths * n).astype(int))
        counts[np.argmax(counts)] += n - counts.sum()
        pieces = [np.linspace(a, b, c + 1)[:-1] for a, b, c in zip(pts[:-1], pts[1:], counts)]
        nodes = np.concatenate(pieces + [np.array([1.0])])
        return Grid(nodes)

    def index_of(self, x: float) -> int:
        """Index of the node equal to ``x``; raises ``KeyError`` if absent."""
        hits = np.flatnonzero(self.nodes == x)
        if hits.size != 1:
            raise KeyError(f"{x!r} is not a node of this grid")
        return int(hits[0])

    def refined(self) -> "Grid":
        """Bisect every cell."""
        return Grid(np.sort(np.concatenate([self.nodes, self.midpoints])))


@dataclass(frozen=True)
class BeamParams:
    """Load density ``b`` and bending coefficient ``k``."""

    b: float
    k: float

    def __post_init__(self):
        if not (self.b > 0 and self.k > 0):
            raise ValueError(f"b and k must be positive, got b={self.b}, k={self.k}")

    @property
    def lam(self) -> float:
        return self.b / self.k


@dataclass(frozen=True)
class PhiField:
    """Nodal values of the cross-section angle, clamped to 0 at x = 0."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise DimensionError(f"phi has shape {v.shape}, grid has {self.grid.n_nodes} nodes")
        if v[0] != 0.0:
            raise ValueError("phi must vanish at x = 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def at_midpoints(self) -> np.ndarray:
        return 0.5 * (self.values[:-1] + self.values[1:])

    def to_csv(self, path) -> None:
        _write_columns(path, ("x", "phi"), self.grid.nodes, self.values)


@dataclass(frozen=True)
class ThetaField:
    """Cellwise values of the tangent angle, located at the midpoints."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise DimensionError(f"theta has shape {v.shape}, grid has {self.grid.n_cells} cells")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_csv(self, path) -> None:
        _write_columns(path, ("x_mid", "theta"), self.grid.midpoints, self.values)


@dataclass(frozen=True)
class PlanarCurve:
    """Beam axis positions, one point per grid node."""

    points: np.ndarray
    grid: Grid

    def chord_lengths(self) -> np.ndarray:
        return np.hypot(*np.diff(self.points, axis=0).T)

    def to_csv(self, path) -> None:
        _write_columns(path, ("x", "chi1", "chi2"), self.grid.nodes, *self.points.T)


ArrayLike = Union[PhiField, ThetaField, np.ndarray, list]


def _values(f, size: int, what: str) -> np.ndarray:
    v = np.asarray(f.values if hasattr(f, "values") else f, dtype=float)
    if v.shape != (size,):
        raise DimensionError(f"{what} has shape {v.shape}, expected ({size},)")
    return v


def _write_columns(path, header, *cols) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(c)) for c in row])


def energy_full(phi: ArrayLike, theta: ArrayLike, p: BeamParams, g: Grid) -> float:
    """Discrete value of the Timoshenko energy ``F_{b,k}(phi, theta)``."""
    ph = _values(phi, g.n_nodes, "phi")
    th = _values(theta, g.n_cells, "theta")
    h = g.widths
    dphi = np.diff(ph) / h
    phim = 0.5 * (ph[:-1] + ph[1:])
    dens = 0.5 * p.k * dphi**2 + 0.5 * (phim - th) ** 2 - p.b * (1.0 - g.midpoints) * np.sin(th)
    return float(np.dot(h, dens))


def gradient_full(phi: ArrayLike, theta: ArrayLike, p: BeamParams, g: Grid):
    """Exact gradient of :func:`energy_full`.

    Returns ``(g_phi, g_theta)``. ``g_phi`` has one entry per node with the
    pinned node 0 set to zero.
    """
    ph = _values(phi, g.n_nodes, "phi")
    th = _values(theta, g.n_cells, "theta")
    h = g.widths
    flux = p.k * np.diff(ph) / h
    coupling = h * (0.5 * (ph[:-1] + ph[1:]) - th)
    g_phi = np.zeros_like(ph)
    g_phi[1:] += flux + 0.5 * coupling
    g_phi[:-1] += -flux + 0.5 * coupling
    g_phi[0] = 0.0
    g_theta = -coupling - h * p.b * (1.0 - g.midpoints) * np.cos(th)
    return g_phi, g_theta


def energy_euler(phi: ArrayLike, lam: float, g: Grid) -> float:
    """Discrete value of the Euler-beam energy ``F_lambda(phi)``."""
    ph = _values(phi, g.n_nodes, "phi")
    h = g.widths
    phim = 0.5 * (ph[:-1] + ph[1:])
    dens = 0.5 * (np.diff(ph) / h) ** 2 - lam * (1.0 - g.midpoints) * np.sin(phim)
    return float(np.dot(h, dens))


def gradient_euler(phi: ArrayLike, lam: float, g: Grid) -> np.ndarray:
    ph = _values(phi, g.n_nodes, "phi")
    h = g.widths
    flux = np.diff(ph) / h
    src = -h * lam * (1.0 - g.midpoints) * np.cos(0.5 * (ph[:-1] + ph[1:]))
    out = np.zeros_like(ph)
    out[1:] += flux + 0.5 * src
    out[:-1] += -flux + 0.5 * src
    out[0] = 0.0
    return out


def reconstruct_chi(theta: ArrayLike, g: Grid) -> PlanarCurve:
    """Integrate ``chi' = (cos theta, sin theta)`` from ``chi(0) = 0``."""
    th = _values(theta, g.n_cells, "theta")
    steps = np.column_stack([np.cos(th), np.sin(th)]) * g.widths[:, None]
    pts = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    return PlanarCurve(pts, g)
