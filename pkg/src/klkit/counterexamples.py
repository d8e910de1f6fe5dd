"""Analytic orthonormal families with exact evaluators.

Tent families live on [0, 1] with centers ``2^-n`` and widths
``4^-(n+1)`` for ``n = 2, 3, ...``; the supports are pairwise disjoint, so
orthonormality is exact. The *failing* coefficients keep every tent's
contribution to ``v`` at height 3, which destroys equicontinuity at the
origin. The *passing* coefficients shrink those heights geometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import polygamma

from .eigensolve import Spectrum
from .grid import Grid, merge_nodes, trapezoid_weights, uniform_grid

FIRST_INDEX = 2
REGIMES = ("failing", "passing")


@dataclass(frozen=True)
class TentFamily:
    regime: str
    n_terms: int
    n0: int = FIRST_INDEX

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}")
        if int(self.n_terms) != self.n_terms or self.n_terms < 1:
            raise ValueError("need at least one tent")

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.n0, self.n0 + self.n_terms)

    @property
    def centers(self) -> np.ndarray:
        return 2.0 ** -self.index.astype(float)

    @property
    def widths(self) -> np.ndarray:
        return 4.0 ** -(self.index + 1.0)

    @property
    def apexes(self) -> np.ndarray:
        return self.centers + 0.5 * self.widths

    @property
    def peaks(self) -> np.ndarray:
        return np.sqrt(3.0 / self.widths)

    @property
    def lambdas(self) -> np.ndarray:
        if self.regime == "failing":
            return self.widths.copy()
        return 8.0 ** -self.index.astype(float)

    @property
    def sup_sq(self) -> np.ndarray:
        return self.peaks ** 2

    @property
    def features(self) -> np.ndarray:
        c, h = self.centers, self.widths
        return np.sort(np.concatenate((c, c + 0.5 * h, c + h)))

    def tail_beyond(self) -> float:
        """``sum lambda_j sup t_j^2`` over the tents not held by this family."""
        if self.regime == "failing":
            return math.inf  # every further tent adds 3
        last = self.n0 + self.n_terms - 1
        return 12.0 * 2.0 ** -last

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        half = 0.5 * self.widths[:, None]
        shape = 1.0 - np.abs(x[None, :] - self.apexes[:, None]) / half
        return self.peaks[:, None] * np.maximum(shape, 0.0)

    def truncate(self, n: int) -> "TentFamily":
        return TentFamily(self.regime, n, self.n0)

    def to_dict(self) -> dict:
        return {"family": "tent", "regime": self.regime, "n0": self.n0, "n_terms": self.n_terms}


@dataclass(frozen=True)
class SineFamily:
    """Eigenfunctions ``sqrt(2) sin((k - 1/2) pi x)`` of the min-kernel on [0, 1]."""

    n_terms: int

    @property
    def frequencies(self) -> np.ndarray:
        return (np.arange(1, self.n_terms + 1) - 0.5) * np.pi

    @property
    def lambdas(self) -> np.ndarray:
        return self.frequencies ** -2.0

    @property
    def sup_sq(self) -> np.ndarray:
        return np.full(self.n_terms, 2.0)

    @property
    def features(self) -> np.ndarray:
        return np.empty(0)

    def tail_beyond(self) -> float:
        # sum_{k > N} 2 / ((k - 1/2) pi)^2 = 2 psi'(N + 1/2) / pi^2
        return float(2.0 * polygamma(1, self.n_terms + 0.5) / np.pi ** 2)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return math.sqrt(2.0) * np.sin(self.frequencies[:, None] * x[None, :])

    def truncate(self, n: int) -> "SineFamily":
        return SineFamily(n)

    def to_dict(self) -> dict:
        return {"family": "brownian_sine", "n_terms": self.n_terms}


@dataclass(frozen=True)
class ConstantFamily:
    """The single normalized constant ``1 / sqrt(b - a)``."""

    a: float = 0.0
    b: float = 1.0
    n_terms: int = 1

    @property
    def sup_sq(self) -> np.ndarray:
        return np.array([1.0 / (self.b - self.a)])

    @property
    def features(self) -> np.ndarray:
        return np.empty(0)

    def tail_beyond(self) -> float:
        return 0.0

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.full((1, x.size), 1.0 / math.sqrt(self.b - self.a))

    def truncate(self, n: int) -> "ConstantFamily":
        return self

    def to_dict(self) -> dict:
        return {"family": "constant", "a": self.a, "b": self.b}


def family_from_dict(d: dict):
    kind = d.get("family")
    if kind == "tent":
        return TentFamily(d["regime"], int(d["n_terms"]), int(d.get("n0", FIRST_INDEX)))
    if kind == "brownian_sine":
        return SineFamily(int(d["n_terms"]))
    if kind == "constant":
        return ConstantFamily(float(d["a"]), float(d["b"]))
    raise ValueError(f"unknown analytic family {kind!r}")


def tent_grid(family: TentFamily, base_nodes: int = 257, resolution: int = 1024) -> Grid:
    """Uniform base grid plus ``resolution`` cells on each half of every tent.

    Trapezoid quadrature of a squared tent half with ``m`` cells has
    relative error ``1 / (2 m^2)``, so the default keeps discrete
    orthonormality well inside 1e-6.
    """
    base = uniform_grid(0.0, 1.0, base_nodes)
    s = np.linspace(0.0, 1.0, 2 * resolution + 1)
    inner = family.centers[:, None] + family.widths[:, None] * s[None, :]
    nodes = merge_nodes(base.nodes, inner.ravel(), 0.0, 1.0)
    # exact apexes and endpoints win over the linspace copies
    nodes = merge_nodes(np.unique(np.concatenate(([0.0, 1.0], family.features))), nodes, 0.0, 1.0)
    return Grid(0.0, 1.0, nodes, trapezoid_weights(nodes))


def _family_spectrum(family, grid: Grid, source: str) -> Spectrum:
    lam = family.lambdas if not isinstance(family, ConstantFamily) else np.ones(1)
    return Spectrum(
        grid,
        lam,
        family.evaluate(grid.nodes),
        source=source,
        analytic=family,
        tail_bound=family.tail_beyond(),
    )


def failing_family(N: int, base_nodes: int = 257, resolution: int = 1024) -> Spectrum:
    """Tents with ``lambda_n = 4^-(n+1)``: each adds a spike of height 3 to ``v``."""
    fam = TentFamily("failing", N)
    return _family_spectrum(fam, tent_grid(fam, base_nodes, resolution), "counterexample")


def passing_family(N: int, base_nodes: int = 257, resolution: int = 1024) -> Spectrum:
    """Tents with ``lambda_n = 8^-n``: spike heights ``12 * 2^-n`` vanish."""
    fam = TentFamily("passing", N)
    return _family_spectrum(fam, tent_grid(fam, base_nodes, resolution), "counterexample")


def analytic_brownian_spectrum(N: int, grid: Grid | None = None) -> Spectrum:
    if int(N) != N or N < 1:
        raise ValueError("need at least one term")
    grid = grid if grid is not None else uniform_grid(0.0, 1.0, 513)
    if grid.a < 0.0 or grid.b > 1.0:
        raise ValueError("the min-kernel family lives on [0, 1]")
    return _family_spectrum(SineFamily(int(N)), grid, "analytic")


def constant_spectrum(grid: Grid | None = None, c: float = 1.0) -> Spectrum:
    """Rank-one spectrum of ``K = c`` on the grid's interval.

    For ``c = 1`` on [0, 1] this is the pair ``(1, f = 1)``.
    """
    grid = grid if grid is not None else uniform_grid(0.0, 1.0, 65)
    fam = ConstantFamily(grid.a, grid.b)
    s = _family_spectrum(fam, grid, "analytic")
    return s.scaled(c * (grid.b - grid.a)) if c * (grid.b - grid.a) != 1.0 else s
