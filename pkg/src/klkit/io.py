"""JSON and CSV interchange.

Floats go through ``repr`` in JSON (shortest string that round-trips a
64-bit float) and ``%.17g`` in CSV. Infinite tail bounds are written as
the string ``"inf"``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .counterexamples import family_from_dict
from .diagnostics import ModulusReport
from .eigensolve import SOURCES, Spectrum
from .grid import Grid

FLOAT_FMT = "%.17g"


class SpectrumFormatError(ValueError):
    """Malformed spectrum document; the message names the offending field."""


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return None
    return x


def _list(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def spectrum_to_dict(s: Spectrum) -> dict:
    doc = {
        "domain": {"a": s.grid.a, "b": s.grid.b},
        "grid": {"nodes": _list(s.grid.nodes), "weights": _list(s.grid.weights)},
        "source": s.source,
        "pairs": [
            {"lambda": float(lam), "values": _list(f)} for lam, f in zip(s.lambdas, s.values)
        ],
    }
    if s.tail_bound is not None:
        doc["tail_bound"] = _num(s.tail_bound)
    if s.grid_tail_bound is not None:
        doc["grid_tail_bound"] = _num(s.grid_tail_bound)
    if s.analytic is not None:
        doc["analytic"] = s.analytic.to_dict()
        doc["features"] = _list(s.features)
    if s.meta:
        doc["meta"] = s.meta
    return doc


def _field(doc: dict, name: str, kind, where: str):
    if name not in doc:
        raise SpectrumFormatError(f"{where}: missing field {name!r}")
    value = doc[name]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SpectrumFormatError(f"{where}.{name}: expected {getattr(kind, '__name__', kind)}")
    return value


def _floats(value, where: str) -> np.ndarray:
    if not isinstance(value, list):
        raise SpectrumFormatError(f"{where}: expected a list of numbers")
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise SpectrumFormatError(f"{where}: expected a list of numbers") from None
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise SpectrumFormatError(f"{where}: expected a flat list of finite numbers")
    return arr


def _bound(doc: dict, name: str):
    if name not in doc or doc[name] is None:
        return None
    value = doc[name]
    if value == "inf":
        return math.inf
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise SpectrumFormatError(f"{name}: expected a number, null or \"inf\"")


def spectrum_from_dict(doc) -> Spectrum:
    if not isinstance(doc, dict):
        raise SpectrumFormatError("document root must be an object")
    number = (int, float)
    domain = _field(doc, "domain", dict, "spectrum")
    a = float(_field(domain, "a", number, "domain"))
    b = float(_field(domain, "b", number, "domain"))
    grid_doc = _field(doc, "grid", dict, "spectrum")
    nodes = _floats(_field(grid_doc, "nodes", list, "grid"), "grid.nodes")
    weights = _floats(_field(grid_doc, "weights", list, "grid"), "grid.weights")
    try:
        grid = Grid(a, b, nodes, weights)
    except ValueError as exc:
        raise SpectrumFormatError(f"grid: {exc}") from None
    source = _field(doc, "source", str, "spectrum")
    if source not in SOURCES:
        raise SpectrumFormatError(f"spectrum.source: must be one of {SOURCES}")
    pairs = _field(doc, "pairs", list, "spectrum")
    if not pairs:
        raise SpectrumFormatError("spectrum.pairs: must hold at least one pair")
    lambdas, values = [], []
    for i, pair in enumerate(pairs):
        where = f"pairs[{i}]"
        if not isinstance(pair, dict):
            raise SpectrumFormatError(f"{where}: expected an object")
        lambdas.append(float(_field(pair, "lambda", number, where)))
        vals = _floats(_field(pair, "values", list, where), f"{where}.values")
        if vals.size != nodes.size:
            raise SpectrumFormatError(f"{where}.values: expected {nodes.size} samples, got {vals.size}")
        values.append(vals)
    analytic = None
    if doc.get("analytic") is not None:
        try:
            analytic = family_from_dict(doc["analytic"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpectrumFormatError(f"analytic: {exc}") from None
        if analytic.n_terms < len(pairs):
            raise SpectrumFormatError("analytic: family holds fewer terms than pairs")
        if analytic.n_terms > len(pairs):
            analytic = analytic.truncate(len(pairs))
    try:
        return Spectrum(
            grid,
            np.array(lambdas),
            np.array(values),
            source=source,
            analytic=analytic,
            tail_bound=_bound(doc, "tail_bound"),
            grid_tail_bound=_bound(doc, "grid_tail_bound"),
            meta=doc.get("meta") or {},
        )
    except ValueError as exc:
        raise SpectrumFormatError(f"pairs: {exc}") from None


def write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, allow_nan=False)
        fh.write("\n")


def save_spectrum(s: Spectrum, path):
    write_json(path, spectrum_to_dict(s))


def load_spectrum(path) -> Spectrum:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpectrumFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return spectrum_from_dict(doc)


def report_to_dict(r: ModulusReport) -> dict:
    return {
        "deltas": _list(r.deltas),
        "moduli": [_list(row) for row in r.moduli],
        "envelope": _list(r.envelope),
        "tail_bound": _num(r.tail_bound),
        "verdict": r.verdict,
        "witness": r.witness,
        "pass_threshold": r.pass_threshold,
        "fail_threshold": r.fail_threshold,
        "scale": r.scale,
        "n_nodes": r.n_nodes,
        "notes": list(r.notes),
    }


def _writer(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")


def _fmt(values) -> list[str]:
    return [FLOAT_FMT % v for v in np.asarray(values, dtype=float).ravel()]


def write_matrix_csv(path, nodes, matrix):
    """Row-major matrix with a header row of node coordinates."""
    with _writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(_fmt(nodes))
        for row in np.asarray(matrix, dtype=float):
            w.writerow(_fmt(row))


def read_matrix_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return data[0], data[1:]


def write_columns_csv(path, nodes, columns, names):
    """First column node coordinates, then one column per entry of ``columns``."""
    with _writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(["x", *names])
        cols = np.asarray(columns, dtype=float)
        for i, x in enumerate(nodes):
            w.writerow(_fmt(np.concatenate(([x], cols[:, i]))))


def write_moduli_csv(path, r: ModulusReport):
    with _writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(["n", "delta", "omega"])
        for n, row in enumerate(r.moduli, start=1):
            for d, omega in zip(r.deltas, row):
                w.writerow([n, FLOAT_FMT % d, FLOAT_FMT % omega])
