"""Command-line harness: single solves, iteration-count sweeps, spectra and the oracle suite.

Exit codes: 0 success, 1 config/usage error, 2 non-convergence,
3 oracle property failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .abac import build_preconditioner
from .minres import RESIDUAL_CONVENTIONS, MinresConfig, solve
from .operator import symmetrized_matvec, time_reverse
from .problems import FAMILIES, ProblemSpec, build_problem
from .spectral import SpectralBlttOperator

log = logging.getLogger("abacminres")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_PROPERTY = 0, 1, 2, 3

CSV_COLUMNS = ["N", "m_plus_1", "DoF", "solver", "iterations", "wall_time_s", "converged", "true_rel_residual"]
SOLVERS = ("abac", "block-circulant", "none")
SENTINEL = "-"
DEFAULT_ALPHA = 1e-8


class ConfigError(Exception):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    problem: dict
    solver: MinresConfig
    preconditioner: str = "abac"
    alpha: float = DEFAULT_ALPHA
    outputs: dict = field(default_factory=dict)
    sizes: list = field(default_factory=list)  # bench: list of (N, m_plus_1)
    solvers: tuple = SOLVERS
    cap: int = 1000
    delta: float = 0.5


class _Lines:
    """Key path -> line number, read off the YAML node tree."""

    def __init__(self, text: str):
        self.map: dict[tuple, int] = {}
        try:
            node = yaml.compose(text)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.map[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.map[path + (k.value,)] = k.start_mark.line + 1
                self._walk(v, path + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def __call__(self, *path) -> int | None:
        while path and path not in self.map:
            path = path[:-1]
        return self.map.get(path)


def load_config(path) -> RunConfig:
    """Parse and validate a YAML run configuration; errors carry the file line."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", path,
                          mark.line + 1 if mark else None) from None
    return parse_config(data or {}, path, _Lines(text))


def _num(value, kind, where, path, lines, key):
    try:
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if isinstance(value, bool):
            raise ValueError
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be {'an integer' if kind is int else 'a number'}, got {value!r}",
                          path, lines(*key)) from None


def parse_config(data: dict, path: str = "<config>", lines=None) -> RunConfig:
    lines = lines or (lambda *k: None)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", path, lines())
    known = {"problem", "solver", "preconditioner", "outputs", "bench"}
    for k in data:
        if k not in known:
            raise ConfigError(f"unknown section {k!r}; expected one of {sorted(known)}", path, lines(k))

    prob = dict(data.get("problem") or {})
    if "family" not in prob:
        raise ConfigError("problem.family is required", path, lines("problem"))
    fam = prob["family"]
    if fam not in FAMILIES + ("identity",):
        raise ConfigError(f"unknown problem.family {fam!r}; choose from {FAMILIES + ('identity',)}", path,
                          lines("problem", "family"))
    if "m_plus_1" in prob:
        prob["m"] = _num(prob.pop("m_plus_1"), int, "problem.m_plus_1", path, lines, ("problem", "m_plus_1")) - 1
    for key, kind in (("m", int), ("N", int), ("d", int), ("T", float), ("gamma", float), ("diffusion", float)):
        if key in prob and prob[key] is not None:
            prob[key] = _num(prob[key], kind, f"problem.{key}", path, lines, ("problem", key))
    if "domain" in prob and prob["domain"] is not None:
        dom = prob["domain"]
        if not (isinstance(dom, (list, tuple)) and len(dom) == 2):
            raise ConfigError("problem.domain must be a two-element list [lo, hi]", path, lines("problem", "domain"))
        prob["domain"] = tuple(_num(x, float, "problem.domain", path, lines, ("problem", "domain")) for x in dom)
    allowed = {"family", "m", "N", "T", "domain", "gamma", "coefficient", "d", "diffusion"}
    for k in prob:
        if k not in allowed:
            raise ConfigError(f"unknown problem key {k!r}", path, lines("problem", k))

    sol = dict(data.get("solver") or {})
    skw = {}
    for key, kind in (("tol", float), ("max_iter", int)):
        if key in sol:
            skw[key] = _num(sol.pop(key), kind, f"solver.{key}", path, lines, ("solver", key))
    if "residual_convention" in sol:
        conv = sol.pop("residual_convention")
        if conv not in RESIDUAL_CONVENTIONS:
            raise ConfigError(f"solver.residual_convention must be one of {RESIDUAL_CONVENTIONS}", path,
                              lines("solver", "residual_convention"))
        skw["residual_convention"] = conv
    for k in sol:
        raise ConfigError(f"unknown solver key {k!r}", path, lines("solver", k))
    try:
        solver = MinresConfig(**skw)
    except ValueError as exc:
        raise ConfigError(str(exc), path, lines("solver")) from None

    pre = data.get("preconditioner", {}) or {}
    if isinstance(pre, str):
        pre = {"kind": pre}
    kind = pre.get("kind", "abac")
    if kind not in SOLVERS:
        raise ConfigError(f"preconditioner.kind must be one of {SOLVERS}, got {kind!r}", path,
                          lines("preconditioner", "kind"))
    alpha = _num(pre.get("alpha", DEFAULT_ALPHA), float, "preconditioner.alpha", path, lines, ("preconditioner", "alpha"))
    if not (0.0 < alpha <= 1.0):
        raise ConfigError(f"preconditioner.alpha must lie in (0, 1], got {alpha!r}", path,
                          lines("preconditioner", "alpha"))
    delta = _num(pre.get("delta", 0.5), float, "preconditioner.delta", path, lines, ("preconditioner", "delta"))

    outputs = data.get("outputs") or {}
    if not isinstance(outputs, dict):
        raise ConfigError("outputs must be a mapping", path, lines("outputs"))

    bench = data.get("bench") or {}
    sizes = []
    for i, s in enumerate(bench.get("sizes") or []):
        if not (isinstance(s, (list, tuple)) and len(s) == 2):
            raise ConfigError("bench.sizes entries must be [N, m_plus_1]", path, lines("bench", "sizes", i))
        n_, m1 = (_num(x, int, "bench.sizes entry", path, lines, ("bench", "sizes", i)) for x in s)
        if n_ < 1 or m1 < 2:
            raise ConfigError(f"bench.sizes entry {s!r} needs N >= 1 and m_plus_1 >= 2", path, lines("bench", "sizes", i))
        sizes.append((n_, m1))
    solvers = tuple(bench.get("solvers") or SOLVERS)
    for s in solvers:
        if s not in SOLVERS:
            raise ConfigError(f"unknown bench solver {s!r}; choose from {SOLVERS}", path, lines("bench", "solvers"))
    cap = _num(bench.get("cap", 1000), int, "bench.cap", path, lines, ("bench", "cap"))
    if cap < 1:
        raise ConfigError("bench.cap must be positive", path, lines("bench", "cap"))

    cfg = RunConfig(prob, solver, kind, alpha, dict(outputs), sizes, solvers, cap, delta)
    if fam != "identity" and (sizes or ("m" in prob and "N" in prob)):
        try:
            problem_spec(cfg, *(sizes[0] if sizes else (None, None)))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), path, lines("problem")) from None
    return cfg


def problem_spec(cfg: RunConfig, N: int | None = None, m_plus_1: int | None = None) -> ProblemSpec:
    kw = dict(cfg.problem)
    if N is not None:
        kw["N"] = N
    if m_plus_1 is not None:
        kw["m"] = m_plus_1 - 1
    missing = [k for k in ("m", "N") if k not in kw]
    if missing:
        raise ValueError(f"problem needs {' and '.join(missing)} (or m_plus_1)")
    return ProblemSpec(**kw)


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    skw = {}
    if getattr(args, "tol", None) is not None:
        skw["tol"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        skw["max_iter"] = args.max_iter
    try:
        solver = replace(cfg.solver, **skw) if skw else cfg.solver
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    alpha = cfg.alpha
    if getattr(args, "alpha", None) is not None:
        alpha = args.alpha
        if not (0.0 < alpha <= 1.0):
            raise ConfigError(f"--alpha must lie in (0, 1], got {alpha!r}")
    cap = cfg.cap if getattr(args, "max_iter", None) is None else args.max_iter
    return replace(cfg, solver=solver, alpha=alpha, cap=cap)


# ---------------------------------------------------------------- solving


@dataclass
class BenchRow:
    N: int
    m_plus_1: int
    DoF: int
    solver: str
    iterations: int | None
    wall_time_s: float
    converged: bool
    true_rel_residual: float

    def csv_fields(self, cap: int) -> list:
        it = SENTINEL if (self.iterations is None or not self.converged or self.iterations > cap) else self.iterations
        return [self.N, self.m_plus_1, self.DoF, self.solver, it, f"{self.wall_time_s:.6g}",
                str(self.converged).lower(), f"{self.true_rel_residual:.6e}"]


def run_solver(problem, kind: str, alpha: float, solver_cfg: MinresConfig):
    """Symmetrize, precondition and solve; timing covers the solve only."""
    prec = None
    if kind == "abac":
        prec = build_preconditioner(problem.surrogate, alpha)
    elif kind == "block-circulant":
        prec = build_preconditioner(problem.surrogate, 1.0)
    op = problem.operator
    rhs = time_reverse(problem.rhs, op.M, op.N)
    return solve(lambda v: symmetrized_matvec(op, v), prec, rhs, solver_cfg)


def _bench_row(args) -> BenchRow:
    cfg, N, m1, kind = args
    spec = problem_spec(cfg, N, m1)
    dof = spec.M * spec.N
    try:
        problem = build_problem(spec)
        solver_cfg = replace(cfg.solver, max_iter=cfg.cap, record_history=False)
        _, rep = run_solver(problem, kind, cfg.alpha, solver_cfg)
        return BenchRow(N, m1, dof, kind, rep.iterations, rep.wall_time, rep.converged, rep.final_true_residual)
    except Exception as exc:  # a failed row must not abort the sweep
        log.error("row N=%d m+1=%d solver=%s failed: %s", N, m1, kind, exc)
        return BenchRow(N, m1, dof, kind, None, float("nan"), False, float("nan"))


def bench_rows(cfg: RunConfig, parallel: int = 1) -> list[BenchRow]:
    jobs = [(cfg, N, m1, kind) for (N, m1) in cfg.sizes for kind in cfg.solvers]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            return list(ex.map(_bench_row, jobs))
    return [_bench_row(j) for j in jobs]


def write_bench_csv(rows, cap: int, out) -> None:
    fh = sys.stdout if out in (None, "-") else open(out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(r.csv_fields(cap))
    finally:
        if fh is not sys.stdout:
            fh.close()


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: RunConfig, out: str | None) -> int:
    spec = problem_spec(cfg)
    problem = build_problem(spec)
    x, rep = run_solver(problem, cfg.preconditioner, cfg.alpha, cfg.solver)
    report = {
        "family": spec.family,
        "N": spec.N,
        "m_plus_1": spec.m + 1,
        "DoF": spec.M * spec.N,
        "solver": cfg.preconditioner,
        "alpha": cfg.alpha if cfg.preconditioner == "abac" else (1.0 if cfg.preconditioner == "block-circulant" else None),
        "tol": cfg.solver.tol,
        "residual_convention": rep.convention,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "true_rel_residual": rep.final_true_residual,
        "wall_time_s": rep.wall_time,
    }
    if problem.exact is not None and rep.converged:
        ref = problem.exact_at_steps()
        report["max_error_vs_exact"] = float(np.abs(x - ref).max())
    report_path = out or cfg.outputs.get("report")
    text = json.dumps(report, indent=2)
    if report_path:
        Path(report_path).write_text(text + "\n")
    print(text)
    if cfg.outputs.get("history"):
        with open(cfg.outputs["history"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "residual"])
            for i, r in enumerate(rep.residual_history, 1):
                w.writerow([i, f"{r:.6e}"])
    if cfg.outputs.get("solution"):
        np.save(cfg.outputs["solution"], x.reshape(spec.N, spec.M))
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_bench(cfg: RunConfig, out: str | None, parallel: int) -> int:
    rows = bench_rows(cfg, parallel)
    write_bench_csv(rows, cfg.cap, out or cfg.outputs.get("table"))
    return EXIT_OK


def _spectrum_operators(cfg: RunConfig):
    if cfg.problem["family"] == "identity":
        p = cfg.problem
        op = SpectralBlttOperator.identity(int(p.get("m", 1)), int(p.get("N", 1)), int(p.get("d", 1)))
        return op, op
    problem = build_problem(problem_spec(cfg))
    return problem.surrogate, problem.operator


def cmd_spectrum(cfg: RunConfig, out: str | None) -> int:
    from . import oracle

    surrogate, true_op = _spectrum_operators(cfg)
    if surrogate.M * surrogate.N > oracle.MAX_DENSE_ORDER:
        raise ConfigError(
            f"spectrum needs M*N <= {oracle.MAX_DENSE_ORDER} (got {surrogate.M * surrogate.N}); "
            "reduce problem.m or problem.N"
        )
    bundle = oracle.dense_bundle(surrogate, cfg.alpha, true_operator=true_op)
    eigs = bundle.preconditioned_spectrum
    bounds = None
    try:
        bounds = oracle.theory_bounds(surrogate, cfg.alpha, cfg.delta, bundle=None if true_op is not surrogate else bundle)
    except ValueError as exc:
        log.warning("theory bounds unavailable: %s", exc)
    rows = [("alpha", cfg.alpha)]
    if bounds is not None:
        hw = bounds.interval_halfwidth
        applies = bounds.spectrum_bound_applies
        inside = bool(np.all(np.abs(np.abs(eigs) - 1) <= hw * (1 + 1e-9) + 1e-12))
        rows += [
            ("c0", bounds.c0), ("mu", bounds.mu), ("mu_modewise", bounds.mu_modewise), ("nu", bounds.nu),
            ("delta", bounds.delta), ("zeta", bounds.zeta), ("E_norm", bounds.E_norm),
            ("neg_interval_lo", -1 - hw), ("neg_interval_hi", -1 + hw),
            ("pos_interval_lo", 1 - hw), ("pos_interval_hi", 1 + hw),
            ("interval_bound_applicable", str(applies).lower()),
            ("iteration_bound_applicable", str(bounds.alpha_admissible).lower()),
            ("all_inside_intervals", str(inside).lower()),
        ]
    else:
        rows.append(("interval_bound_applicable", "false"))
    if true_op is not surrogate:
        rows.append(("note", "matrix uses the true operator; bounds refer to the surrogate"))

    out = out or cfg.outputs.get("spectrum")
    fh = sys.stdout if out in (None, "-") else open(out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for i, e in enumerate(eigs):
            w.writerow([i, repr(float(e))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    bpath = cfg.outputs.get("bounds") or (None if out in (None, "-") else str(Path(out).with_suffix("")) + "_bounds.csv")
    fh = sys.stdout if bpath is None else open(bpath, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for k, v in rows:
            w.writerow([k, repr(float(v)) if isinstance(v, float) else v])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_oracle_check(seed: int, sizes=None, faults=(), out=None) -> int:
    from . import oracle

    results = oracle.run_property_suite(seed, sizes or oracle.DEFAULT_SIZES, faults)
    lines = [
        f"{'PASS' if r.passed else 'FAIL'} {r.name} value={r.value:.3e} threshold={r.threshold:.1e} [{r.detail}]"
        for r in results
    ]
    failed = [r.name for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} properties passed" +
                 (f"; failing: {', '.join(failed)}" if failed else ""))
    text = "\n".join(lines)
    print(text)
    if out:
        Path(out).write_text(text + "\n")
    return EXIT_OK if not failed else EXIT_PROPERTY


# ---------------------------------------------------------------- entry point


def _parse_sizes(text: str):
    sizes = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [int(x) for x in chunk.split(",")]
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("sizes are 'm,d,N' triples separated by ';'")
        sizes.append(tuple(parts))
    return tuple(sizes)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--alpha", type=float, help="ABAC parameter in (0, 1] (default 1e-8)")
    common.add_argument("--tol", type=float, help="MINRES tolerance")
    common.add_argument("--max-iter", type=int, dest="max_iter", help="MINRES iteration cap")
    common.add_argument("--out", help="output path ('-' for stdout)")
    common.add_argument("--parallel", type=int, default=1, help="worker processes for bench rows")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="abacminres", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="run one preconditioned MINRES solve")
    sub.add_parser("bench", parents=[common], help="sweep grid sizes and solvers, write CSV")
    sub.add_parser("spectrum", parents=[common], help="dense preconditioned spectrum and theory bounds")
    oc = sub.add_parser("oracle-check", parents=[common], help="run the dense property suite")
    oc.add_argument("--sizes", type=_parse_sizes, help="'m,d,N;m,d,N;...' (default: built-in set)")
    oc.add_argument("--inject-fault", action="append", default=[], dest="faults",
                    help="deliberately break a kernel (dft-normalization, dst-normalization)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "oracle-check":
            from .oracle import FAULTS

            for f in args.faults:
                if f not in FAULTS:
                    raise ConfigError(f"unknown fault {f!r}; choose from {sorted(FAULTS)}")
            return cmd_oracle_check(args.seed, args.sizes, tuple(args.faults), args.out)
        if not args.config:
            raise ConfigError(f"{args.command} needs --config PATH")
        if args.parallel < 1:
            raise ConfigError("--parallel must be at least 1")
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        if args.command == "bench":
            return cmd_bench(cfg, args.out, args.parallel)
        return cmd_spectrum(cfg, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
