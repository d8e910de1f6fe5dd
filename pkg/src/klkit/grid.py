"""Quadrature grids on a compact interval [a, b].

Every integral in the package is a composite-trapezoid sum over one of
these grids. Nodes always include both endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# nodes closer than this fraction of (b - a) are merged
MERGE_TOL = 1e-14


class DomainError(ValueError):
    """Invalid interval, node count or out-of-range point."""


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Composite-trapezoid weights for sorted, possibly non-uniform nodes."""
    nodes = np.asarray(nodes, dtype=float)
    w = np.empty_like(nodes)
    w[0] = 0.5 * (nodes[1] - nodes[0])
    w[-1] = 0.5 * (nodes[-1] - nodes[-2])
    w[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    a: float
    b: float
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError(f"need a < b, got a={self.a}, b={self.b}")
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise DomainError("nodes and weights must be 1-d arrays of equal length")
        if nodes.size < 2:
            raise DomainError("a grid needs at least 2 nodes")
        if nodes[0] != self.a or nodes[-1] != self.b:
            raise DomainError("first and last nodes must be the interval endpoints")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise DomainError("weights must be positive")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    @property
    def length(self) -> float:
        return self.b - self.a

    def same_as(self, other: "Grid") -> bool:
        return (
            self.a == other.a
            and self.b == other.b
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def midpoint_refinement(self) -> "Grid":
        """Grid with the midpoint of every cell inserted."""
        return refine_with(self, 0.5 * (self.nodes[1:] + self.nodes[:-1]))

    @classmethod
    def from_nodes(cls, nodes) -> "Grid":
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("a grid needs at least 2 nodes")
        return cls(nodes[0], nodes[-1], nodes, trapezoid_weights(nodes))


def uniform_grid(a: float, b: float, n: int) -> Grid:
    """``n`` equispaced nodes on [a, b] with composite-trapezoid weights."""
    if int(n) != n or n < 2:
        raise DomainError(f"need at least 2 nodes, got {n}")
    if not a < b:
        raise DomainError(f"need a < b, got a={a}, b={b}")
    n = int(n)
    nodes = np.linspace(a, b, n)
    h = (b - a) / (n - 1)
    weights = np.full(n, h)
    weights[0] = weights[-1] = 0.5 * h
    return Grid(a, b, nodes, weights)


def merge_nodes(nodes, extra, a: float, b: float) -> np.ndarray:
    """Sorted union of two node sets, dropping near-duplicates.

    Original nodes win over extra points when the two collide.
    """
    nodes = np.asarray(nodes, dtype=float)
    extra = np.asarray(extra, dtype=float).ravel()
    if extra.size == 0:
        return nodes
    if np.any(extra < a) or np.any(extra > b):
        raise DomainError(f"refinement points must lie in [{a}, {b}]")
    tol = MERGE_TOL * (b - a)
    extra = np.unique(extra)
    # drop extras within tol of an existing node
    pos = np.searchsorted(nodes, extra)
    left = np.abs(extra - nodes[np.clip(pos - 1, 0, nodes.size - 1)])
    right = np.abs(nodes[np.clip(pos, 0, nodes.size - 1)] - extra)
    extra = extra[np.minimum(left, right) > tol]
    if extra.size == 0:
        return nodes
    # and extras within tol of each other
    keep = np.concatenate(([True], np.diff(extra) > tol))
    merged = np.concatenate((nodes, extra[keep]))
    merged.sort(kind="mergesort")
    return merged


def refine_with(grid: Grid, extra) -> Grid:
    """Insert ``extra`` points into ``grid`` and recompute trapezoid weights."""
    merged = merge_nodes(grid.nodes, extra, grid.a, grid.b)
    if merged is grid.nodes:
        return grid
    return Grid(grid.a, grid.b, merged, trapezoid_weights(merged))


def integrate(grid: Grid, values) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.nodes.size:
        raise ValueError(
            f"expected {grid.nodes.size} samples, got {values.shape[-1]}"
        )
    return float(np.dot(grid.weights, values)) if values.ndim == 1 else values @ grid.weights
