"""Eigenpairs of covariance operators: Jacobi solver, Nyström, Spectrum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np

from .grid import Grid, refine_with
from .kernels import KernelSpec, gram_matrix

SOURCES = ("nystrom", "analytic", "counterexample")


class JacobiNotConverged(RuntimeError):
    def __init__(self, offdiag_norm: float, sweeps: int):
        super().__init__(
            f"Jacobi did not converge in {sweeps} sweeps "
            f"(off-diagonal norm {offdiag_norm:.3e})"
        )
        self.offdiag_norm = offdiag_norm
        self.sweeps = sweeps


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    sweeps_used: int
    offdiag_norm: float


@numba.njit(cache=True)
def _offdiag(a):
    acc = 0.0
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += a[i, j] * a[i, j]
    return math.sqrt(acc)


def _round_robin(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tournament schedule: rows are rounds of disjoint pairs (p < q); -1 pads."""
    m = n + (n % 2)
    players = list(range(m))
    rp = np.full((max(m - 1, 0), m // 2), -1, dtype=np.int64)
    rq = rp.copy()
    for r in range(m - 1):
        for i in range(m // 2):
            u, v = players[i], players[m - 1 - i]
            if u < n and v < n:
                rp[r, i], rq[r, i] = min(u, v), max(u, v)
        players = [players[0], players[-1]] + players[1:-1]
    return rp, rq


@numba.njit(cache=True)
def _rotate_rows(a, P, Q, C, S, m):
    n = a.shape[1]
    for i in range(m):
        ap = a[P[i]]
        aq = a[Q[i]]
        c = C[i]
        s = S[i]
        for k in range(n):
            x = ap[k]
            y = aq[k]
            ap[k] = c * x - s * y
            aq[k] = s * x + c * y


@numba.njit(cache=True)
def _rotate_cols(a, P, Q, C, S, m):
    # walk rows so every access stays inside one contiguous row
    for k in range(a.shape[0]):
        row = a[k]
        for i in range(m):
            p = P[i]
            q = Q[i]
            x = row[p]
            y = row[q]
            row[p] = C[i] * x - S[i] * y
            row[q] = S[i] * x + C[i] * y


@numba.njit(cache=True)
def _sweep(a, vt, rp, rq, floor):
    # One cyclic sweep in round-robin order. The rotations of one round act
    # on disjoint index pairs, so they commute and are applied together as
    # J^T A J. ``vt`` holds eigenvectors as rows. Entries at or below
    # ``floor`` are left alone. Returns the number of rotations applied.
    eps = 2.220446049250313e-16
    n_rounds, half = rp.shape
    P = np.empty(half, np.int64)
    Q = np.empty(half, np.int64)
    C = np.empty(half)
    S = np.empty(half)
    PP = np.empty(half)
    QQ = np.empty(half)
    rotations = 0
    for r in range(n_rounds):
        m = 0
        for i in range(half):
            p = rp[r, i]
            q = rq[r, i]
            if p < 0:
                continue
            apq = a[p, q]
            app = a[p, p]
            aqq = a[q, q]
            if abs(apq) <= floor:
                continue
            # already diagonal to working precision
            if abs(apq) <= eps * math.sqrt(abs(app * aqq)):
                a[p, q] = 0.0
                a[q, p] = 0.0
                continue
            tau = (aqq - app) / (2.0 * apq)
            if abs(tau) > 1e150:
                t = 0.5 / tau
            else:
                t = 1.0 / (abs(tau) + math.sqrt(1.0 + tau * tau))
                if tau < 0.0:
                    t = -t
            c = 1.0 / math.sqrt(1.0 + t * t)
            P[m] = p
            Q[m] = q
            C[m] = c
            S[m] = t * c
            PP[m] = app - t * apq
            QQ[m] = aqq + t * apq
            m += 1
        if m == 0:
            continue
        rotations += m
        _rotate_rows(a, P, Q, C, S, m)
        _rotate_cols(a, P, Q, C, S, m)
        for i in range(m):
            a[P[i], P[i]] = PP[i]
            a[Q[i], Q[i]] = QQ[i]
            a[P[i], Q[i]] = 0.0
            a[Q[i], P[i]] = 0.0
        _rotate_rows(vt, P, Q, C, S, m)
    return rotations


def jacobi_eigen(A, tol: float = 1e-12, max_sweeps: int = 60) -> EigenResult:
    """Cyclic Jacobi eigensolver for a real symmetric matrix.

    Each sweep rotates every off-diagonal pair once, in round-robin order,
    until the off-diagonal Frobenius norm is at most ``tol * ||A||_F``.
    Pairs already negligible relative to their diagonal entries are skipped,
    which keeps small eigenvalues accurate to high relative precision.

    Eigenvalues come back sorted non-increasing, eigenvectors as columns.
    Raises :class:`JacobiNotConverged` after ``max_sweeps``.
    """
    a = np.array(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    n = a.shape[0]
    # work at unit scale so norms neither underflow nor overflow
    scale = float(np.max(np.abs(a), initial=0.0)) or 1.0
    a = a / scale
    norm = float(np.linalg.norm(a))
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * max(norm, 1.0):
        raise ValueError("matrix is not symmetric")
    a = np.ascontiguousarray(0.5 * (a + a.T))
    vt = np.eye(n)
    # entries this small cannot keep the off-diagonal norm above target
    floor = tol * norm / (2.0 * max(n, 1))

    rp, rq = _round_robin(n)
    off = _offdiag(a)
    sweeps = 0
    while off > tol * norm:
        if sweeps >= max_sweeps:
            raise JacobiNotConverged(off * scale, sweeps)
        rotated = _sweep(a, vt, rp, rq, floor)
        sweeps += 1
        off = _offdiag(a)
        if rotated == 0:
            break

    w = np.diag(a) * scale
    order = np.argsort(-w, kind="stable")
    return EigenResult(w[order], vt[order].T.copy(), sweeps, off * scale)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ordered eigenpairs ``(lambda_n, f_n)`` with ``f_n`` sampled on ``grid``.

    ``values[j]`` holds ``f_{j+1}`` at the grid nodes. Analytic families
    carry an ``analytic`` object able to evaluate every ``f_n`` anywhere,
    with exact ``sup f_n^2`` and feature points. ``tail_bound`` bounds
    ``sum_{j > len} lambda_j sup f_j^2`` for the terms not stored.
    ``grid_tail_bound`` bounds the truncation error at grid nodes only.
    """

    grid: Grid
    lambdas: np.ndarray
    values: np.ndarray
    source: str = "nystrom"
    analytic: Optional[object] = None
    tail_bound: Optional[float] = None
    grid_tail_bound: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float).ravel()
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[None, :]
        if lam.size == 0:
            raise ValueError("spectrum must hold at least one pair")
        if vals.shape != (lam.size, len(self.grid)):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"({lam.size} pairs, {len(self.grid)} nodes)"
            )
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise ValueError("eigenvalues must be strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        lam.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.lambdas.size

    @property
    def features(self) -> np.ndarray:
        if self.analytic is None:
            return np.empty(0)
        return np.asarray(self.analytic.features, dtype=float)

    @property
    def sup_sq(self) -> Optional[np.ndarray]:
        if self.analytic is None:
            return None
        return np.asarray(self.analytic.sup_sq, dtype=float)[: len(self)]

    def check_count(self, n: int, allow_zero: bool = False):
        lo = 0 if allow_zero else 1
        if int(n) != n or not lo <= n <= len(self):
            raise ValueError(f"term count {n} outside [{lo}, {len(self)}]")
        return int(n)

    def tail_after(self, n: int) -> Optional[float]:
        """``sum_{j > n} lambda_j sup f_j^2``, or ``None`` without analytic sups."""
        n = self.check_count(n, allow_zero=True)
        if self.analytic is None or self.tail_bound is None:
            return None
        stored = float(np.sum(self.lambdas[n:] * self.sup_sq[n:]))
        return stored + self.tail_bound

    def sample(self, nodes=None, n: Optional[int] = None) -> np.ndarray:
        """``f_1..f_n`` at ``nodes`` (grid nodes by default), shape (n, len(nodes))."""
        n = len(self) if n is None else self.check_count(n, allow_zero=True)
        if nodes is None:
            return self.values[:n]
        nodes = np.asarray(nodes, dtype=float)
        if self.analytic is not None:
            return self.analytic.evaluate(nodes)[:n]
        if nodes.shape == self.grid.nodes.shape and np.array_equal(nodes, self.grid.nodes):
            return self.values[:n]
        raise ValueError(
            "spectrum has no analytic evaluators; only its own grid nodes are available"
        )

    def truncate(self, n: int) -> "Spectrum":
        n = self.check_count(n)
        tail = self.tail_after(n) if self.tail_bound is not None else None
        analytic = self.analytic.truncate(n) if self.analytic is not None else None
        grid_tail = None
        if self.grid_tail_bound is not None:
            dropped = np.sum(self.lambdas[n:] * np.max(self.values[n:] ** 2, axis=1, initial=0.0))
            grid_tail = self.grid_tail_bound + float(dropped)
        return replace(
            self,
            lambdas=self.lambdas[:n],
            values=self.values[:n],
            analytic=analytic,
            tail_bound=tail,
            grid_tail_bound=grid_tail,
        )

    def scaled(self, c: float) -> "Spectrum":
        """Same functions with every coefficient multiplied by ``c > 0``."""
        if not c > 0:
            raise ValueError("scale must be positive")
        return replace(
            self,
            lambdas=self.lambdas * c,
            tail_bound=None if self.tail_bound is None else self.tail_bound * c,
            grid_tail_bound=None if self.grid_tail_bound is None else self.grid_tail_bound * c,
        )

    def on_grid(self, grid: Grid) -> "Spectrum":
        """Re-sample an analytic spectrum on another grid."""
        if self.analytic is None:
            raise ValueError("only analytic spectra can be moved to another grid")
        return replace(self, grid=grid, values=self.analytic.evaluate(grid.nodes)[: len(self)])

    def refined(self, extra=None) -> "Spectrum":
        """Analytic spectrum on a refined grid (midpoints inserted by default)."""
        grid = self.grid.midpoint_refinement() if extra is None else refine_with(self.grid, extra)
        return self.on_grid(grid)

    def orthonormality_error(self) -> float:
        """``max |<f_i, f_j> - delta_ij|`` under the grid quadrature."""
        f = self.values
        gram = (f * self.grid.weights) @ f.T
        return float(np.max(np.abs(gram - np.eye(len(self)))))


def _fix_sign(f: np.ndarray, thresh: float = 1e-8) -> np.ndarray:
    for row in f:
        big = np.flatnonzero(np.abs(row) > thresh)
        if big.size and row[big[0]] < 0:
            row *= -1.0
    return f


def nystrom_decompose(
    k: KernelSpec,
    g: Grid,
    n_terms: int,
    drop_tol: Optional[float] = None,
    tol: float = 1e-12,
    max_sweeps: int = 60,
) -> Spectrum:
    """Eigenpairs of ``f -> integral K(., y) f(y) dy`` by trapezoid Nyström.

    Solves the symmetrized problem ``W^1/2 K W^1/2 u = lambda u`` and maps
    back with ``f = u / sqrt(w)``. Pairs with ``lambda <= drop_tol``
    (default ``1e-12 * lambda_max``) are discarded; at most ``n_terms``
    are kept.
    """
    if int(n_terms) != n_terms or n_terms < 1:
        raise ValueError(f"n_terms must be >= 1, got {n_terms}")
    if drop_tol is not None and not drop_tol > 0:
        raise ValueError("drop_tol must be positive")
    k.check_domain(g.a, g.b)
    sw = np.sqrt(g.weights)
    b = gram_matrix(k, g) * np.outer(sw, sw)
    res = jacobi_eigen(b, tol=tol, max_sweeps=max_sweeps)
    mu = res.eigenvalues
    thresh = drop_tol if drop_tol is not None else 1e-12 * max(mu[0], 0.0)
    keep = np.flatnonzero(mu > thresh)
    if keep.size == 0:
        raise ValueError("no eigenvalue survives drop_tol")

    f = (res.eigenvectors / sw[:, None]).T
    norms = np.sqrt((f * f) @ g.weights)
    f = f / norms[:, None]

    kept = keep[: int(n_terms)]
    dropped = np.setdiff1d(np.arange(mu.size), kept)
    grid_tail = float(np.sum(np.abs(mu[dropped]) * np.max(f[dropped] ** 2, axis=1, initial=0.0)))
    vals = _fix_sign(f[kept].copy())
    return Spectrum(
        g,
        mu[kept],
        vals,
        source="nystrom",
        grid_tail_bound=grid_tail,
        meta={"kernel": k.name, "params": dict(k.params), "sweeps": res.sweeps_used},
    )


def eigen_residual(s: Spectrum, k: KernelSpec, n: int) -> float:
    """Max over nodes of ``|lambda_n f_n(x_i) - sum_k w_k K(x_i, x_k) f_n(x_k)|``.

    ``n`` is 1-based.
    """
    n = s.check_count(n)
    f = s.values[n - 1]
    applied = gram_matrix(k, s.grid) @ (s.grid.weights * f)
    return float(np.max(np.abs(s.lambdas[n - 1] * f - applied)))
