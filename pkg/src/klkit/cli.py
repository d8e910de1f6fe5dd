"""Command-line entry point: ``klkit <command> [flags]``.

Exit codes: 0 ok / pass, 1 criterion failed, 2 bad input,
3 numerical failure, 4 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import counterexamples, diagnostics, expansion, kernels, sampling
from . import io as kio
from .eigensolve import JacobiNotConverged, nystrom_decompose
from .grid import DomainError, uniform_grid

EXIT_OK = 0
EXIT_CRITERION_FAIL = 1
EXIT_BAD_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_INCONCLUSIVE = 4

VERDICT_EXIT = {
    diagnostics.PASS: EXIT_OK,
    diagnostics.FAIL: EXIT_CRITERION_FAIL,
    diagnostics.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}
BOUND_TOL = 1e-8
GAP_NODE_LIMIT = 1025

log = logging.getLogger("klkit")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    knobs: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.knobs[name]
        except KeyError:
            raise AttributeError(name) from None


# per-command defaults; also the set of keys a --config file may carry
DEFAULTS = {
    "decompose": dict(
        kernel=None, ell=1.0, c=1.0, a=0.0, b=1.0, grid=512, terms=10,
        drop_tol=None, tol=1e-12, max_sweeps=60, out=None, gram_csv=None, figure=None,
    ),
    "synthesize": dict(
        spectrum=None, terms=None, out=None, vn_csv=None, gaps=None,
        reference=None, figure=None,
    ),
    "check": dict(
        spectrum=None, terms=None, depth=8, pass_threshold=None,
        fail_threshold=None, out=None, csv=None, figure=None,
    ),
    "counterexample": dict(
        family=None, terms=12, grid=257, resolution=1024, out=None, figure=None,
    ),
    "sample": dict(
        spectrum=None, terms=None, paths=1000, seed=0, workers=None, out=None,
        cov_csv=None, stderr_csv=None, figure=None,
    ),
    "verify-bounds": dict(
        spectrum=None, kernel=None, ell=1.0, c=1.0, terms=None, pairs=20, out=None,
    ),
}
REQUIRED = {
    "decompose": ("kernel", "out"),
    "synthesize": ("spectrum",),
    "check": ("spectrum",),
    "counterexample": ("family", "out"),
    "sample": ("spectrum",),
    "verify-bounds": ("spectrum", "kernel"),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="klkit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS  # unset flags stay absent so --config can fill them

    def cmd(name, help_):
        c = sub.add_parser(name, help=help_, argument_default=S)
        c.add_argument("--config", help="JSON file with the same keys as the flags")
        return c

    c = cmd("decompose", "Nyström eigenpairs of a catalog kernel")
    c.add_argument("--kernel", choices=sorted(k.replace("_", "-") for k in kernels.CATALOG))
    c.add_argument("--ell", type=float, help="length-scale (exponential kernels)")
    c.add_argument("--c", type=float, help="value of the constant kernel")
    c.add_argument("--a", type=float)
    c.add_argument("--b", type=float)
    c.add_argument("--grid", type=int, help="number of quadrature nodes")
    c.add_argument("--terms", type=int)
    c.add_argument("--drop-tol", type=float)
    c.add_argument("--tol", type=float)
    c.add_argument("--max-sweeps", type=int)
    c.add_argument("--out", help="spectrum JSON")
    c.add_argument("--gram-csv")
    c.add_argument("--figure")

    c = cmd("synthesize", "partial-sum kernel, v_n table and gap records")
    c.add_argument("--spectrum")
    c.add_argument("--terms", type=int)
    c.add_argument("--out", help="partial kernel CSV")
    c.add_argument("--vn-csv")
    c.add_argument("--gaps", help="gap records JSON")
    c.add_argument("--reference", help="Gram CSV to compare against")
    c.add_argument("--figure")

    c = cmd("check", "equicontinuity report and verdict")
    c.add_argument("--spectrum")
    c.add_argument("--terms", type=int)
    c.add_argument("--depth", type=int)
    c.add_argument("--pass-threshold", type=float)
    c.add_argument("--fail-threshold", type=float)
    c.add_argument("--out", help="report JSON")
    c.add_argument("--csv", help="flat (n, delta, omega) table")
    c.add_argument("--figure")

    c = cmd("counterexample", "tent families and closed-form spectra")
    c.add_argument("--family", choices=["failing", "passing", "brownian", "constant"])
    c.add_argument("--terms", type=int)
    c.add_argument("--grid", type=int, help="uniform base nodes")
    c.add_argument("--resolution", type=int, help="cells per tent half")
    c.add_argument("--out")
    c.add_argument("--figure")

    c = cmd("sample", "truncated Karhunen-Loève paths")
    c.add_argument("--spectrum")
    c.add_argument("--terms", type=int)
    c.add_argument("--paths", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--workers", type=int, help=f"defaults to ${sampling.THREADS_ENV} or 1")
    c.add_argument("--out", help="paths CSV")
    c.add_argument("--cov-csv")
    c.add_argument("--stderr-csv")
    c.add_argument("--figure")

    c = cmd("verify-bounds", "increment bound and uniform-Cauchy gap residuals")
    c.add_argument("--spectrum")
    c.add_argument("--kernel", choices=sorted(k.replace("_", "-") for k in kernels.CATALOG))
    c.add_argument("--ell", type=float)
    c.add_argument("--c", type=float)
    c.add_argument("--terms", type=int, help="largest n checked (default min(len, 50))")
    c.add_argument("--pairs", type=int, help="number of (n, m) gap pairs")
    c.add_argument("--out")
    return p


def build_config(args: argparse.Namespace) -> RunConfig:
    command = args.command
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    knobs = dict(DEFAULTS[command])
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config: root must be an object")
        doc = {k.replace("-", "_"): v for k, v in doc.items()}
        unknown = sorted(set(doc) - set(knobs))
        if unknown:
            raise ConfigError(f"config: unknown fields for {command}: {unknown}")
        knobs.update(doc)
    knobs.update(given)
    for key in REQUIRED[command]:
        if knobs.get(key) is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required")
    cfg = RunConfig(command, knobs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    k = cfg.knobs

    def positive_int(name, minimum=1):
        v = k.get(name)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < minimum):
            raise ConfigError(f"--{name.replace('_', '-')} must be an integer >= {minimum}")

    def positive(name):
        v = k.get(name)
        if v is not None and not (isinstance(v, (int, float)) and v > 0):
            raise ConfigError(f"--{name.replace('_', '-')} must be positive")

    positive_int("grid", 2)
    for name in ("terms", "max_sweeps", "paths", "resolution", "pairs"):
        positive_int(name)
    positive_int("depth", 2)
    positive_int("seed", 0)
    for name in ("ell", "c", "tol", "drop_tol"):
        positive(name)
    for name in ("pass_threshold", "fail_threshold"):
        v = k.get(name)
        if v is not None and not (isinstance(v, (int, float)) and v >= 0):
            raise ConfigError(f"--{name.replace('_', '-')} must be >= 0")
    if cfg.command == "decompose" and not k["a"] < k["b"]:
        raise ConfigError("need --a < --b")
    if k.get("seed") is not None and k["seed"] >= 1 << 64:
        raise ConfigError("--seed must fit in 64 bits")


def _kernel(cfg: RunConfig) -> kernels.KernelSpec:
    return kernels.by_name(cfg.kernel, ell=cfg.ell, c=cfg.c)


def _emit(doc):
    print(json.dumps(doc, allow_nan=False))


def cmd_decompose(cfg: RunConfig) -> int:
    k = _kernel(cfg)
    g = uniform_grid(cfg.a, cfg.b, cfg.grid)
    s = nystrom_decompose(k, g, cfg.terms, cfg.drop_tol, tol=cfg.tol, max_sweeps=cfg.max_sweeps)
    kio.save_spectrum(s, cfg.out)
    if cfg.gram_csv:
        kio.write_matrix_csv(cfg.gram_csv, g.nodes, kernels.gram_matrix(k, g))
    if cfg.figure:
        from .plotting import plot_spectrum

        plot_spectrum(s, cfg.figure)
    _emit({"pairs": len(s), "lambdas": [float(v) for v in s.lambdas[:10]], "sweeps": s.meta["sweeps"]})
    return EXIT_OK


def _truncation_bound(s, n):
    if s.analytic is not None:
        return s.tail_after(n)
    if s.grid_tail_bound is not None:
        return s.truncate(n).grid_tail_bound
    return None


def _gap_nodes(s):
    """Node set for pairwise gap matrices; large analytic grids are thinned."""
    nodes = s.grid.nodes
    if nodes.size <= GAP_NODE_LIMIT or s.analytic is None:
        return None
    step = int(math.ceil(nodes.size / GAP_NODE_LIMIT))
    keep = np.unique(np.concatenate((nodes[::step], [nodes[-1]], s.features)))
    return keep


def cmd_synthesize(cfg: RunConfig) -> int:
    s = kio.load_spectrum(cfg.spectrum)
    n = len(s) if cfg.terms is None else s.check_count(cfg.terms)
    summary = {"terms": n}
    pk = None
    if cfg.out or cfg.reference or cfg.figure:
        pk = expansion.partial_kernel(s, n)
    if cfg.out:
        kio.write_matrix_csv(cfg.out, pk.nodes, pk.values)
    if cfg.vn_csv:
        vseq = expansion.vn_sequence(s, n)
        kio.write_columns_csv(cfg.vn_csv, vseq.nodes, vseq.table, [f"v_{j}" for j in range(1, n + 1)])
    if cfg.gaps:
        nodes = _gap_nodes(s)
        records = [expansion.gap_record(s, a, b, nodes) for a, b in expansion.default_gap_schedule(n)]
        kio.write_json(cfg.gaps, records)
    code = EXIT_OK
    if cfg.reference:
        ref_nodes, ref = kio.read_matrix_csv(cfg.reference)
        if ref.shape != pk.values.shape or not np.allclose(ref_nodes, pk.nodes, rtol=0, atol=1e-15):
            raise ValueError("reference matrix does not live on the spectrum grid")
        err = float(np.max(np.abs(pk.values - ref)))
        bound = _truncation_bound(s, n)
        summary.update(max_error=err, bound=bound)
        if bound is not None and err > bound + BOUND_TOL:
            code = EXIT_NUMERICAL
    if cfg.figure:
        from .plotting import plot_matrix

        plot_matrix(pk.nodes, pk.values, cfg.figure, label=f"$K_{{{n}}}$")
    _emit(summary)
    return code


def cmd_check(cfg: RunConfig) -> int:
    s = kio.load_spectrum(cfg.spectrum)
    r = diagnostics.equicontinuity_report(
        s, cfg.terms, cfg.depth, cfg.pass_threshold, cfg.fail_threshold
    )
    doc = kio.report_to_dict(r)
    if cfg.out:
        kio.write_json(cfg.out, doc)
    if cfg.csv:
        kio.write_moduli_csv(cfg.csv, r)
    if cfg.figure:
        from .plotting import plot_report

        plot_report(r, cfg.figure)
    _emit({"verdict": r.verdict, "envelope_min_delta": doc["envelope"][-1],
           "tail_bound": doc["tail_bound"], "witness": r.witness})
    return VERDICT_EXIT[r.verdict]


def cmd_counterexample(cfg: RunConfig) -> int:
    fam = cfg.family
    if fam == "failing":
        s = counterexamples.failing_family(cfg.terms, cfg.grid, cfg.resolution)
    elif fam == "passing":
        s = counterexamples.passing_family(cfg.terms, cfg.grid, cfg.resolution)
    elif fam == "brownian":
        s = counterexamples.analytic_brownian_spectrum(cfg.terms, uniform_grid(0.0, 1.0, cfg.grid))
    else:
        s = counterexamples.constant_spectrum(uniform_grid(0.0, 1.0, cfg.grid))
    kio.save_spectrum(s, cfg.out)
    if cfg.figure:
        from .plotting import plot_vn

        plot_vn(expansion.vn_sequence(s), cfg.figure)
    _emit({"family": fam, "pairs": len(s), "nodes": len(s.grid), "tail_bound": kio._num(s.tail_bound)})
    return EXIT_OK


def cmd_sample(cfg: RunConfig) -> int:
    s = kio.load_spectrum(cfg.spectrum)
    e = sampling.sample_paths(s, cfg.terms, cfg.paths, cfg.seed, cfg.workers)
    if cfg.out:
        kio.write_columns_csv(cfg.out, e.nodes, e.paths, [f"path_{p}" for p in range(e.n_paths)])
    summary = {"paths": e.n_paths, "terms": e.n_terms, "seed": e.seed}
    if cfg.cov_csv or cfg.stderr_csv:
        cov, err = sampling.empirical_covariance(e)
        if cfg.cov_csv:
            kio.write_matrix_csv(cfg.cov_csv, e.nodes, cov)
        if cfg.stderr_csv:
            kio.write_matrix_csv(cfg.stderr_csv, e.nodes, err)
        target = expansion.partial_kernel(s, e.n_terms).values
        z = sampling.z_scores(cov, target, err)
        summary["fraction_z_above_3"] = float(np.mean(z > 3))
    if cfg.figure:
        from .plotting import plot_paths

        plot_paths(e, cfg.figure)
    _emit(summary)
    return EXIT_OK


def cmd_verify_bounds(cfg: RunConfig) -> int:
    s = kio.load_spectrum(cfg.spectrum)
    k = _kernel(cfg)
    try:
        k.check_domain(s.grid.a, s.grid.b)
    except ValueError as exc:
        raise ValueError(f"kernel/spectrum mismatch: {exc}") from None
    top = min(len(s), 50) if cfg.terms is None else s.check_count(cfg.terms)
    sup, estimated = k.sup_norm_on(s.grid)
    ns = list(range(1, top + 1))
    margins = diagnostics.necessity_bound_residuals(s, k, ns)
    nodes = _gap_nodes(s)
    gaps = []
    for n, m in expansion.default_gap_schedule(top, cfg.pairs):
        sup_gap, vn_gap = expansion.sup_gap(s, n, m, nodes)
        gaps.append({"n": n, "m": m, "sup_gap": sup_gap, "vn_gap": vn_gap, "margin": vn_gap - sup_gap})
    doc = {
        "kernel": k.name,
        "sup_norm": sup,
        "sup_norm_estimated": estimated,
        "necessity": [{"n": n, "margin": float(v)} for n, v in zip(ns, margins)],
        "min_necessity_margin": float(np.min(margins)),
        "gaps": gaps,
        "min_gap_margin": float(min(g["margin"] for g in gaps)),
    }
    if cfg.out:
        kio.write_json(cfg.out, doc)
    ok = doc["min_necessity_margin"] >= -BOUND_TOL and doc["min_gap_margin"] >= -BOUND_TOL
    _emit({k_: doc[k_] for k_ in ("min_necessity_margin", "min_gap_margin", "sup_norm_estimated")})
    return EXIT_OK if ok else EXIT_CRITERION_FAIL


COMMANDS = {
    "decompose": cmd_decompose,
    "synthesize": cmd_synthesize,
    "check": cmd_check,
    "counterexample": cmd_counterexample,
    "sample": cmd_sample,
    "verify-bounds": cmd_verify_bounds,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = build_config(args)
        return COMMANDS[cfg.command](cfg)
    except JacobiNotConverged as exc:
        print(f"klkit: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (kio.SpectrumFormatError, ConfigError, DomainError, ValueError, OSError) as exc:
        print(f"klkit: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
