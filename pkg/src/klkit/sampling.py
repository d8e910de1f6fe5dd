"""Truncated Karhunen-Loève sample paths with addressable randomness.

The coefficient ``xi[p, j]`` of path ``p`` and term ``j`` depends only on
``(seed, p, j)``:

1. Philox4x64-10 keyed with the 128-bit value ``seed + p * 2**64``;
2. the ``j``-th 64-bit output word of that stream;
3. its top 53 bits mapped to the open interval midpoint
   ``u = ((w >> 11) + 0.5) * 2**-53``;
4. ``xi = ndtri(u)``, the inverse standard normal CDF.

Paths can therefore be split across any number of workers and still come
out bitwise identical. Other implementations are expected to match the
distribution, not the bits.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .eigensolve import Spectrum

THREADS_ENV = "KLKIT_THREADS"
_SEED_LIMIT = 1 << 64


def standard_normals(seed: int, path: int, n_terms: int) -> np.ndarray:
    """The coefficients ``xi[path, 0:n_terms]``."""
    key = np.array([seed, path], dtype=np.uint64)
    words = np.random.Philox(key=key).random_raw(n_terms)
    u = ((words >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53
    return ndtri(u)


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(workers))


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    spectrum: Spectrum
    n_terms: int
    n_paths: int
    seed: int
    nodes: np.ndarray
    paths: np.ndarray  # (n_paths, n_nodes)


def _block(s: Spectrum, n_terms: int, seed: int, start: int, stop: int) -> np.ndarray:
    xi = np.stack([standard_normals(seed, p, n_terms) for p in range(start, stop)])
    coef = xi * np.sqrt(s.lambdas[:n_terms])
    # elementwise accumulation in fixed term order: no BLAS blocking effects
    z = np.zeros((stop - start, len(s.grid)))
    for j in range(n_terms):
        z += coef[:, j, None] * s.values[j]
    return z


def sample_paths(
    s: Spectrum,
    n_terms: Optional[int] = None,
    n_paths: int = 1,
    seed: int = 0,
    workers: Optional[int] = None,
) -> PathEnsemble:
    """Draw ``Z_p(x_i) = sum_j sqrt(lambda_j) xi[p, j] f_j(x_i)``."""
    n_terms = len(s) if n_terms is None else s.check_count(n_terms)
    if int(n_paths) != n_paths or n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if int(seed) != seed or not 0 <= seed < _SEED_LIMIT:
        raise ValueError("seed must be an unsigned 64-bit integer")
    n_paths, seed = int(n_paths), int(seed)

    workers = min(worker_count(workers), n_paths)
    bounds = np.linspace(0, n_paths, workers + 1).astype(int)
    if workers == 1:
        paths = _block(s, n_terms, seed, 0, n_paths)
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = pool.map(
                lambda ab: _block(s, n_terms, seed, ab[0], ab[1]),
                zip(bounds[:-1], bounds[1:]),
            )
            paths = np.concatenate(list(parts))
    return PathEnsemble(s, n_terms, n_paths, seed, s.grid.nodes, paths)


def empirical_covariance(e: PathEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased sample covariance and its asymptotic standard error.

    ``stderr_ij = sqrt((C_ii C_jj + C_ij^2) / M)`` for ``M`` Gaussian paths.
    """
    m = e.paths.shape[0]
    if m < 2:
        raise ValueError("need at least 2 paths")
    centered = e.paths - e.paths.mean(axis=0)
    cov = centered.T @ centered / (m - 1)
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov)
    stderr = np.sqrt((np.outer(d, d) + cov * cov) / m)
    return cov, stderr


def z_scores(estimate: np.ndarray, target: np.ndarray, stderr: np.ndarray) -> np.ndarray:
    """``|estimate - target| / stderr``; entries with zero stderr score 0 when exact."""
    diff = np.abs(estimate - target)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / stderr
    tiny = diff <= 1e-12 * max(1.0, float(np.max(np.abs(target))))
    return np.where(stderr > 0, z, np.where(tiny, 0.0, np.inf))
