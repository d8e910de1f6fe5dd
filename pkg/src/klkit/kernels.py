"""Closed-form continuous covariance kernels on an interval."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import Grid


class SupNormEstimateWarning(UserWarning):
    """Raised when a kernel's sup-norm had to be estimated from grid samples."""


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric bivariate kernel ``K(x, y)``.

    ``eval`` must broadcast over numpy arrays. ``sup_norm`` is the exact
    value of ``max |K|`` over the domain when known, else ``None``.
    ``domain`` restricts where the kernel is meaningful (``None`` = any).
    """

    name: str
    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup_norm: Optional[float] = None
    continuous: bool = True
    domain: Optional[tuple] = None
    params: tuple = ()

    def __call__(self, x, y):
        return self.eval(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def check_domain(self, a: float, b: float):
        if self.domain is not None:
            lo, hi = self.domain
            if a < lo or b > hi:
                raise ValueError(
                    f"kernel {self.name!r} is defined on [{lo}, {hi}], "
                    f"not on [{a}, {b}]"
                )

    def sup_norm_on(self, nodes) -> tuple[float, bool]:
        """Return ``(sup_norm, is_estimate)``.

        Falls back to the max of ``|K|`` over all node pairs.
        """
        if self.sup_norm is not None:
            return self.sup_norm, False
        nodes = _as_nodes(nodes)
        warnings.warn(
            f"sup-norm of kernel {self.name!r} estimated from {nodes.size} nodes",
            SupNormEstimateWarning,
            stacklevel=2,
        )
        return float(np.max(np.abs(gram_matrix(self, nodes)))), True


def _positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return float(value)


def brownian() -> KernelSpec:
    """Covariance ``min(x, y)`` of standard Brownian motion on [0, 1]."""
    return KernelSpec("brownian", np.minimum, sup_norm=1.0, domain=(0.0, 1.0))


def exponential(ell: float) -> KernelSpec:
    ell = _positive("length-scale", ell)
    return KernelSpec(
        "exponential",
        lambda x, y: np.exp(-np.abs(x - y) / ell),
        sup_norm=1.0,
        params=(("ell", ell),),
    )


def squared_exponential(ell: float) -> KernelSpec:
    ell = _positive("length-scale", ell)
    scale = 2.0 * ell * ell
    return KernelSpec(
        "squared_exponential",
        lambda x, y: np.exp(-((x - y) ** 2) / scale),
        sup_norm=1.0,
        params=(("ell", ell),),
    )


def constant(c: float = 1.0) -> KernelSpec:
    """Rank-one kernel ``K(x, y) = c``."""
    c = _positive("constant", c)
    return KernelSpec(
        "constant",
        lambda x, y: np.full(np.broadcast(x, y).shape, c),
        sup_norm=c,
        params=(("c", c),),
    )


def custom(name: str, fn, sup_norm=None, continuous=True) -> KernelSpec:
    return KernelSpec(name, fn, sup_norm=sup_norm, continuous=continuous)


CATALOG = {
    "brownian": lambda **kw: brownian(),
    "exponential": lambda ell=1.0, **kw: exponential(ell),
    "squared_exponential": lambda ell=1.0, **kw: squared_exponential(ell),
    "constant": lambda c=1.0, **kw: constant(c),
}


def by_name(name: str, **params) -> KernelSpec:
    key = name.replace("-", "_")
    if key not in CATALOG:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(CATALOG)}")
    return CATALOG[key](**params)


def _as_nodes(g) -> np.ndarray:
    if isinstance(g, Grid):
        return g.nodes
    return np.atleast_1d(np.asarray(g, dtype=float))


def gram_matrix(k: KernelSpec, g) -> np.ndarray:
    """Kernel matrix over the nodes of ``g`` (a Grid or a node array).

    Each unordered pair is evaluated once, so the result is exactly
    symmetric.
    """
    x = _as_nodes(g)
    n = x.size
    iu, ju = np.triu_indices(n)
    vals = np.broadcast_to(k(x[iu], x[ju]), iu.shape)
    m = np.empty((n, n))
    m[iu, ju] = vals
    m[ju, iu] = vals
    return m


def second_difference(k: KernelSpec, x, y):
    """``K(x,x) - 2 K(x,y) + K(y,y)``, the variance of an increment."""
    out = k(x, x) - 2.0 * k(x, y) + k(y, y)
    return float(out) if np.ndim(out) == 0 else out
