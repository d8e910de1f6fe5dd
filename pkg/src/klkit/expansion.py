"""Partial sums of ``sum_j lambda_j f_j(x) f_j(y)`` and their diagonals.

Sums always run over ascending ``j`` and every term is formed as
``(lambda_j * f_j(x)) * f_j(y)``, so the diagonal of a partial kernel is
bitwise identical to the matching ``v_n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .eigensolve import Spectrum
from .grid import Grid, integrate


@dataclass(frozen=True, eq=False)
class PartialKernel:
    spectrum: Spectrum
    n_terms: int
    nodes: np.ndarray
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class VnSequence:
    """``table[n - 1]`` holds ``v_n = sum_{j <= n} lambda_j f_j^2`` at ``nodes``."""

    spectrum: Spectrum
    nodes: np.ndarray
    table: np.ndarray

    def __getitem__(self, n: int) -> np.ndarray:
        return self.table[n - 1]

    def __len__(self):
        return self.table.shape[0]


def _samples(s: Spectrum, n: int, nodes) -> tuple[np.ndarray, np.ndarray]:
    if nodes is None:
        return s.grid.nodes, s.values[:n]
    if isinstance(nodes, Grid):
        nodes = nodes.nodes
    nodes = np.asarray(nodes, dtype=float)
    return nodes, s.sample(nodes, n)


def partial_kernel(s: Spectrum, n: int, nodes=None) -> PartialKernel:
    n = s.check_count(n)
    x, f = _samples(s, n, nodes)
    k = np.zeros((x.size, x.size))
    for lam, fj in zip(s.lambdas[:n], f):
        k += np.outer(lam * fj, fj)
    # (lam f_i) f_j and (lam f_j) f_i can differ in the last bit
    iu = np.triu_indices(x.size, 1)
    k.T[iu] = k[iu]
    return PartialKernel(s, n, x, k)


def vn_sequence(s: Spectrum, N: Optional[int] = None, nodes=None) -> VnSequence:
    N = len(s) if N is None else s.check_count(N)
    x, f = _samples(s, N, nodes)
    table = np.empty((N, x.size))
    v = np.zeros(x.size)
    for j, (lam, fj) in enumerate(zip(s.lambdas[:N], f)):
        v = v + (lam * fj) * fj
        table[j] = v
    return VnSequence(s, x, table)


def _gap_range(s: Spectrum, n: int, m: int) -> tuple[int, int]:
    n = s.check_count(n, allow_zero=True)
    m = s.check_count(m, allow_zero=True)
    return min(n, m), max(n, m)


def _vn(s: Spectrum, n: int, nodes) -> np.ndarray:
    if n == 0:
        return np.zeros(_samples(s, 0, nodes)[0].size)
    return vn_sequence(s, n, nodes)[n]


def l1_gap(s: Spectrum, n: int, m: int, grid: Optional[Grid] = None) -> tuple[float, float]:
    """``(quadrature of |v_n - v_m|, sum of lambda_j over the index gap)``.

    By orthonormality the two agree up to quadrature error.
    """
    lo, hi = _gap_range(s, n, m)
    grid = s.grid if grid is None else grid
    if lo == hi:
        return 0.0, 0.0
    nodes = None if grid is s.grid else grid.nodes
    diff = np.abs(_vn(s, hi, nodes) - _vn(s, lo, nodes))
    return integrate(grid, diff), float(np.sum(s.lambdas[lo:hi]))


def sup_gap(s: Spectrum, n: int, m: int, nodes=None) -> tuple[float, float]:
    """``(max |K_n - K_m| over node pairs, max |v_n - v_m| over nodes)``.

    The first never exceeds the second (Cauchy-Schwarz on the gap terms).
    """
    lo, hi = _gap_range(s, n, m)
    if lo == hi:
        return 0.0, 0.0
    x, f = _samples(s, hi, nodes)
    gap = np.zeros((x.size, x.size))
    for lam, fj in zip(s.lambdas[lo:hi], f[lo:hi]):
        gap += np.outer(lam * fj, fj)
    vgap = np.abs(_vn(s, hi, nodes) - _vn(s, lo, nodes))
    return float(np.max(np.abs(gap))), float(np.max(vgap))


def gap_record(s: Spectrum, n: int, m: int, nodes=None, grid: Optional[Grid] = None) -> dict:
    sup, vgap = sup_gap(s, n, m, nodes)
    quad, exact = l1_gap(s, n, m, grid)
    return {
        "n": int(n),
        "m": int(m),
        "sup_gap": sup,
        "vn_gap": vgap,
        "l1_quadrature": quad,
        "l1_exact": exact,
    }


def default_gap_schedule(N: int, count: int = 20) -> list[tuple[int, int]]:
    """Up to ``count`` distinct ``(n, m)`` pairs spread over ``1..N``, diagonal first."""
    pairs = [(N, N)] if N >= 1 else []
    rng = np.random.default_rng(N)
    seen = set(pairs)
    candidates = [(n, m) for n in range(1, N + 1) for m in range(0, n)]
    order = rng.permutation(len(candidates))
    for i in order:
        if len(pairs) >= count:
            break
        if candidates[i] not in seen:
            seen.add(candidates[i])
            pairs.append(candidates[i])
    return pairs
