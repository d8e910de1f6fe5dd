"""Finite-scale equicontinuity diagnostics for ``v_n = sum_{j<=n} lambda_j f_j^2``.

Equicontinuity quantifies over every ``n`` and every ``delta``, so no
finite computation decides it. Reports carry a three-valued verdict:

* ``fail``: the envelope of moduli at the smallest ladder step is at
  least ``fail_threshold`` and stays there after one grid refinement;
* ``pass``: envelope plus the analytic tail bound is at most
  ``pass_threshold``;
* ``inconclusive``: anything else, including every spectrum without an
  analytic tail bound that does not fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .eigensolve import Spectrum
from .expansion import vn_sequence
from .grid import MERGE_TOL, merge_nodes
from .kernels import KernelSpec, gram_matrix

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
PASS_FRACTION = 1e-3
FAIL_FACTOR = 10.0


class _RangeExtrema:
    """Sparse tables answering max/min (with position) over index ranges."""

    def __init__(self, values: np.ndarray):
        v = np.asarray(values, dtype=float)
        n = v.size
        self.values = v
        levels = max(1, n.bit_length())
        self.max_idx = np.zeros((levels, n), dtype=np.intp)
        self.min_idx = np.zeros((levels, n), dtype=np.intp)
        self.max_idx[0] = np.arange(n)
        self.min_idx[0] = np.arange(n)
        for k in range(1, levels):
            span = 1 << (k - 1)
            prev_max, prev_min = self.max_idx[k - 1], self.min_idx[k - 1]
            right = np.minimum(np.arange(n) + span, n - 1)
            a, b = prev_max, prev_max[right]
            self.max_idx[k] = np.where(v[b] > v[a], b, a)
            a, b = prev_min, prev_min[right]
            self.min_idx[k] = np.where(v[b] < v[a], b, a)

    def query(self, lo: np.ndarray, hi: np.ndarray):
        """Positions of the max and min over each inclusive range ``[lo, hi]``."""
        length = hi - lo + 1
        k = np.frexp(length.astype(float))[1] - 1
        right = hi - (1 << k) + 1
        v = self.values
        a, b = self.max_idx[k, lo], self.max_idx[k, right]
        imax = np.where(v[b] > v[a], b, a)
        a, b = self.min_idx[k, lo], self.min_idx[k, right]
        imin = np.where(v[b] < v[a], b, a)
        return imax, imin


def _reach(nodes: np.ndarray, delta: float, slack: float) -> np.ndarray:
    """Last index ``j >= i`` with ``nodes[j] - nodes[i] <= delta``."""
    return np.searchsorted(nodes, nodes + delta + slack, side="right") - 1


def _modulus_on(nodes, table: _RangeExtrema, delta: float, slack: float):
    v = table.values
    lo = np.arange(v.size)
    hi = _reach(nodes, delta, slack)
    imax, imin = table.query(lo, hi)
    up = v[imax] - v
    down = v - v[imin]
    i_up, i_down = int(np.argmax(up)), int(np.argmax(down))
    if up[i_up] >= down[i_down]:
        return float(up[i_up]), i_up, int(imax[i_up])
    return float(down[i_down]), i_down, int(imin[i_down])


def modulus(nodes, values, delta: float, with_pair: bool = False):
    """Discrete modulus of continuity.

    Max of ``|v(x_i) - v(x_j)|`` over node pairs with ``|x_i - x_j| <= delta``.
    With ``with_pair`` also returns the attaining node indices.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    nodes = getattr(nodes, "nodes", nodes)
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.shape != values.shape:
        raise ValueError("nodes and values differ in length")
    slack = MERGE_TOL * (nodes[-1] - nodes[0]) if nodes.size > 1 else 0.0
    omega, i, j = _modulus_on(nodes, _RangeExtrema(values), delta, slack)
    return (omega, i, j) if with_pair else omega


@dataclass(frozen=True, eq=False)
class ModulusReport:
    deltas: np.ndarray
    moduli: np.ndarray  # moduli[n - 1, k] = omega_n(deltas[k])
    envelope: np.ndarray
    tail_bound: Optional[float]
    verdict: str
    witness: Optional[dict] = None
    pass_threshold: float = 0.0
    fail_threshold: float = 0.0
    scale: float = 0.0
    n_nodes: int = 0
    notes: list = field(default_factory=list)

    @property
    def n_terms(self) -> int:
        return self.moduli.shape[0]


def dyadic_ladder(a: float, b: float, depth: int) -> np.ndarray:
    return (b - a) / 2.0 ** np.arange(1, depth + 1)


def evaluation_nodes(s: Spectrum, deltas: np.ndarray) -> np.ndarray:
    """Nodes on which the modulus table is filled.

    Analytic spectra get their feature points, plus shifted copies at every
    ladder distance so pairs exactly ``delta`` apart exist. Feature points
    are the breakpoints of piecewise-linear families, where extremal pairs
    sit; smooth families have none and every grid node is shifted instead.
    """
    nodes = s.grid.nodes
    if s.analytic is None:
        return nodes
    a, b = s.grid.a, s.grid.b
    feats = s.features
    nodes = merge_nodes(nodes, feats, a, b)
    anchors = feats if feats.size else s.grid.nodes
    shifted = np.concatenate([anchors + d for d in deltas] + [anchors - d for d in deltas])
    shifted = shifted[(shifted >= a) & (shifted <= b)]
    return merge_nodes(nodes, shifted, a, b)


def _moduli_table(nodes, vtable, deltas, slack):
    n_terms = vtable.shape[0]
    moduli = np.empty((n_terms, deltas.size))
    pairs = np.empty((n_terms, 2), dtype=np.intp)
    for r in range(n_terms):
        ext = _RangeExtrema(vtable[r])
        for k, d in enumerate(deltas):
            omega, i, j = _modulus_on(nodes, ext, d, slack)
            moduli[r, k] = omega
        pairs[r] = (i, j)  # attained at the smallest delta
    return moduli, pairs


def _persistent(s: Spectrum, N: int, nodes: np.ndarray, row: int, delta: float, threshold: float) -> bool:
    """Does row ``row`` keep a modulus >= threshold at ``delta`` on another resolution?"""
    a, b = s.grid.a, s.grid.b
    slack = MERGE_TOL * (b - a)
    if s.analytic is not None:
        finer = merge_nodes(nodes, 0.5 * (nodes[1:] + nodes[:-1]), a, b)
        v = vn_sequence(s, row + 1, finer)[row + 1]
    else:
        # grid-only spectra cannot be evaluated off-grid; use the coarser
        # half-resolution subgrid as the second resolution instead
        keep = np.zeros(nodes.size, dtype=bool)
        keep[::2] = True
        keep[-1] = True
        finer = nodes[keep]
        v = vn_sequence(s, row + 1)[row + 1][keep]
    omega, _, _ = _modulus_on(finer, _RangeExtrema(v), delta, slack)
    return omega >= threshold


def equicontinuity_report(
    s: Spectrum,
    N: Optional[int] = None,
    ladder_depth: int = 8,
    pass_threshold: Optional[float] = None,
    fail_threshold: Optional[float] = None,
) -> ModulusReport:
    """Modulus table of ``v_1..v_N`` on the dyadic ladder ``(b - a) / 2^k``.

    Default thresholds: ``pass = 1e-3 * max v_N`` and ``fail = 10 * pass``.
    """
    N = len(s) if N is None else s.check_count(N)
    if int(ladder_depth) != ladder_depth or ladder_depth < 2:
        raise ValueError("ladder_depth must be >= 2")
    a, b = s.grid.a, s.grid.b
    deltas = dyadic_ladder(a, b, int(ladder_depth))
    nodes = evaluation_nodes(s, deltas)
    vseq = vn_sequence(s, N, nodes if s.analytic is not None else None)
    slack = MERGE_TOL * (b - a)
    moduli, pairs = _moduli_table(nodes, vseq.table, deltas, slack)
    envelope = moduli.max(axis=0)

    scale = float(np.max(vseq.table[-1]))
    if pass_threshold is None:
        pass_threshold = PASS_FRACTION * scale
    if fail_threshold is None:
        fail_threshold = FAIL_FACTOR * pass_threshold
    if pass_threshold < 0 or fail_threshold < pass_threshold:
        raise ValueError("need 0 <= pass_threshold <= fail_threshold")
    tail = s.tail_after(N)

    notes = []
    witness = None
    last = envelope[-1]
    if last >= fail_threshold and last > 0:
        row = int(np.argmax(moduli[:, -1]))
        if _persistent(s, N, nodes, row, deltas[-1], fail_threshold):
            verdict = FAIL
            i, j = sorted(pairs[row])
            witness = {"x": float(nodes[i]), "y": float(nodes[j]), "n": row + 1}
        else:
            verdict = INCONCLUSIVE
            notes.append("failing modulus did not persist under refinement")
    elif tail is not None and math.isfinite(tail) and last + tail <= pass_threshold:
        verdict = PASS
    else:
        verdict = INCONCLUSIVE
        if tail is None:
            notes.append("no analytic tail bound; pass is unreachable")
    return ModulusReport(
        deltas=deltas,
        moduli=moduli,
        envelope=envelope,
        tail_bound=tail,
        verdict=verdict,
        witness=witness,
        pass_threshold=float(pass_threshold),
        fail_threshold=float(fail_threshold),
        scale=scale,
        n_nodes=int(nodes.size),
        notes=notes,
    )


def epsilon_delta_certificate(report: ModulusReport, epsilon: float) -> Optional[float]:
    """Largest ladder ``delta`` with ``envelope(delta) + tail <= epsilon``.

    A missing tail bound counts as zero: the certificate then covers the
    computed terms only. An infinite tail never certifies.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    tail = 0.0 if report.tail_bound is None else report.tail_bound
    if not math.isfinite(tail):
        return None
    ok = np.flatnonzero(report.envelope + tail <= epsilon)
    return float(report.deltas[ok[0]]) if ok.size else None


def necessity_bound_residuals(s: Spectrum, k: KernelSpec, ns, nodes=None) -> np.ndarray:
    """Min over node pairs of ``RHS - LHS`` in the increment bound, for each n.

    ``LHS = |v_n(x) - v_n(y)|`` and
    ``RHS = 2 sqrt(||K||_inf) sqrt(K(x,x) - 2K(x,y) + K(y,y))``.
    """
    ns = [s.check_count(n) for n in np.atleast_1d(ns)]
    x = s.grid.nodes if nodes is None else np.asarray(getattr(nodes, "nodes", nodes), float)
    sup, _ = k.sup_norm_on(x)
    g = gram_matrix(k, x)
    diag = np.diag(g)
    second = np.maximum(diag[:, None] - 2.0 * g + diag[None, :], 0.0)
    rhs = 2.0 * math.sqrt(sup) * np.sqrt(second)
    vseq = vn_sequence(s, max(ns), None if nodes is None else x)
    out = np.empty(len(ns))
    for i, n in enumerate(ns):
        v = vseq[n]
        out[i] = np.min(rhs - np.abs(v[:, None] - v[None, :]))
    return out


def necessity_bound_residual(s: Spectrum, k: KernelSpec, n: int, nodes=None) -> float:
    return float(necessity_bound_residuals(s, k, [n], nodes)[0])
