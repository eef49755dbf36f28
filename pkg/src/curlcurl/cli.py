"""
Command line front end.

    curlcurl solve       --config run.toml [--out DIR]
    curlcurl verify      --config run.toml --suite {hardy,embedding,decay,rearrange,coercivity,all} [--out DIR]
    curlcurl symmetrize  --in field.csv --out field_star.csv [--config run.toml]
    curlcurl reconstruct --in field.csv --out DIR [--config run.toml] [--L 3] [--n 41] [--levels 61,121,241]
    curlcurl spectrum    --config run.toml

Exit codes: 0 success, 2 solver did not converge, 64 bad usage or config,
65 a structural hypothesis failed (non-coercive V, V not reversed
Steiner-symmetric, f failing a validator, checks failing, bad input data).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .config import DEFAULTS_HELP, ConfigError, RunConfig, load_config
from .corpus import field_corpus
from .fields import Potential, power_nonlinearity, validate_nonlinearity
from .grid import gaussian, read_field_csv, repr_float, write_field_csv
from .nehari import ground_state_solve, write_trace_csv
from .reconstruct3d import consistency_error, curlcurl_residual, interior_mask, reconstruct, write_slice_csv, write_vtk
from .symmetry import check_rearrangement, is_reversed_steiner, steiner_symmetrize

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64
EXIT_HYPOTHESIS = 65

SUITES = ("hardy", "embedding", "decay", "rearrange", "coercivity")


class HypothesisError(RuntimeError):
    pass


def worker_count() -> int:
    """CURLCURL_THREADS if set to a positive integer, else the CPU count."""
    try:
        return max(1, int(os.environ["CURLCURL_THREADS"]))
    except (KeyError, ValueError):
        return os.cpu_count() or 1


def _pmap(fn, items):
    """Ordered map over a thread pool capped by CURLCURL_THREADS."""
    n = worker_count()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr_float(v)
    return str(v)


def _print_kv(pairs, stream=None):
    stream = sys.stdout if stream is None else stream
    for k, v in pairs:
        print(f"{k}={_fmt(v)}", file=stream)


def gate(cfg: RunConfig) -> float:
    """Check the hypotheses of the existence theory on this grid; returns lambda_min."""
    rep = validate_nonlinearity(cfg.nonlinearity, cfg.grid)
    if not rep.all_passed:
        raise HypothesisError("nonlinearity fails assumption(s) " + ", ".join(rep.failed()) + ": " + "; ".join(rep.lines()))
    if not is_reversed_steiner(cfg.potential):
        raise HypothesisError("potential is not reversed Steiner-symmetric (max V - V must be symmetric decreasing in z)")
    try:
        lam = analysis.coercivity_lambda_min(cfg.potential)
    except analysis.CoercivityError as exc:
        raise HypothesisError(f"coercivity check did not converge: {exc}") from None
    if not lam > 0.0:
        raise HypothesisError(
            f"lambda_min = {lam!r} <= 0: int(|grad u|^2 + V u^2) r^3 is not an equivalent norm "
            "(equivalent-norm hypothesis on V violated); refusing to solve"
        )
    return lam


# -- subcommands -----------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else cfg.output
    lam = gate(cfg)
    rep = ground_state_solve(cfg.solver)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(rep, out / "trace.csv")
    if rep.u is not None:
        write_field_csv(rep.u, out / "field.csv")
    pairs = [("lambda_min", lam)] + list(rep.summary().items())
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        _print_kv(pairs, fh)
    _print_kv(pairs)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _suite_rows(cfg: RunConfig, suite: str) -> list[analysis.InequalityReport]:
    g, V, f = cfg.grid, cfg.potential, cfg.nonlinearity
    n = cfg.verify["corpus_size"]
    seed = cfg.seed
    rows: list[analysis.InequalityReport] = []
    if suite == "hardy":
        fields = [gaussian(g)] + field_corpus(g, seed, n)
        rows += _pmap(analysis.check_hardy, fields)
        for i, r in enumerate(rows):
            r.id = f"hardy_{i}"
    elif suite == "embedding":
        fields = [gaussian(g)] + field_corpus(g, seed, n)
        for q in (2.0, 3.0, 4.0, 5.0, 6.0):
            part = _pmap(lambda u, q=q: analysis.check_embedding(u, q), fields)
            for i, r in enumerate(part):
                r.id = f"embedding_q{q:g}_{i}"
            rows += part
    elif suite == "decay":
        fields = [gaussian(g)] + field_corpus(g, seed, n, centered=True)
        for i, u in enumerate(fields):
            try:
                d = analysis.decay_constant(steiner_symmetrize(u))
                ok = math.isfinite(d.constant)
                rows.append(analysis.InequalityReport(
                    f"decay_{i}", d.constant * math.sqrt(d.grad_r_norm * d.l2_norm),
                    math.sqrt(d.grad_r_norm * d.l2_norm), d.constant, ok, 0.0))
            except analysis.PreconditionError:
                rows.append(analysis.InequalityReport(f"decay_{i}", math.nan, math.nan, math.nan, False, math.nan))
    elif suite == "rearrange":
        fields = field_corpus(g, seed, n)
        reps = _pmap(lambda u: check_rearrangement(u, V, f, validate_f=False), fields)
        for i, rep in enumerate(reps):
            for key, lhs, rhs in (
                ("norm", rep.norm_after, rep.norm_before),
                ("I", rep.I_before, rep.I_after),
                ("Iprime", rep.Iprime_before, rep.Iprime_after),
            ):
                tol = 1e-10 * (1.0 + abs(lhs))
                rows.append(analysis.InequalityReport(f"rearrange_{key}_{i}", lhs, rhs, 1.0, lhs - rhs <= tol, lhs - rhs))
            rows.append(analysis.InequalityReport(
                f"rearrange_polya_szego_z_{i}", rep.slacks["polya_szego_z"], 0.0, 1.0, rep.polya_szego_z,
                rep.slacks["polya_szego_z"]))
        pairs = list(zip(fields[0::2], fields[1::2]))
        part = _pmap(lambda uv: analysis.check_nonexpansivity(*uv), pairs)
        for i, r in enumerate(part):
            r.id = f"nonexpansivity_{i}"
        rows += part
    elif suite == "coercivity":
        lam = analysis.coercivity_lambda_min(V)
        rows.append(analysis.InequalityReport("coercivity_lambda_min", 0.0, lam, 1.0, lam > 0.0, -lam))
    return rows


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    suites = SUITES if args.suite == "all" else (args.suite,)
    rows = []
    for s in suites:
        rows += _suite_rows(cfg, s)
    out = Path(args.out) if args.out else cfg.output
    out.mkdir(parents=True, exist_ok=True)
    lines = ["id,lhs,rhs,constant,pass,slack"] + [r.csv_row() for r in rows]
    (out / f"verify_{args.suite}.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
    n_fail = sum(not r.passed for r in rows)
    for line in lines:
        print(line)
    _print_kv([("checks", len(rows)), ("failed", n_fail)])
    return EXIT_OK if n_fail == 0 else EXIT_HYPOTHESIS


def _optional_model(args):
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        return cfg.potential, cfg.nonlinearity
    return None, power_nonlinearity(3.0)


def cmd_symmetrize(args) -> int:
    u = read_field_csv(args.inp)
    V, f = _optional_model(args)
    if V is None:
        V = Potential.constant(u.grid, 1.0)
    if np.any(u.values < 0):
        i, j = np.argwhere(u.values < 0)[0]
        raise HypothesisError(f"input field has negative value {u.values[i, j]!r} at node ({i},{j})")
    us = steiner_symmetrize(u)
    write_field_csv(us, args.out)
    rep = check_rearrangement(u, V, f)
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.passed else EXIT_HYPOTHESIS


def cmd_reconstruct(args) -> int:
    u = read_field_csv(args.inp)
    V, f = _optional_model(args)
    if V is None:
        V = Potential.constant(u.grid, 1.0)
    elif V.grid != u.grid:
        raise ConfigError("configured grid does not match the grid of the input field", None, args.config)
    L = args.L
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    U = reconstruct(u, L, args.n, args.method)
    res = curlcurl_residual(U, V, f)
    mask = interior_mask(U)
    res_out = np.where(mask, res, 0.0)
    write_vtk(U, out / "field3d.vtk", res_out)
    write_slice_csv(U, out / "slice.csv")
    pairs = [("L", L), ("n", args.n), ("method", args.method), ("max_abs_U", float(U.magnitude().max())),
             ("max_interior_residual", float(res[mask].max()) if mask.any() else 0.0)]
    if args.levels:
        levels = [int(x) for x in args.levels.split(",")]
        errs = [consistency_error(u, L, m, V, f, args.method, workers=worker_count()) for m in levels]
        for m, (d, c) in zip(levels, errs):
            pairs += [(f"div_max_n{m}", d), (f"consistency_max_n{m}", c)]
        for (m0, e0), (m1, e1) in zip(zip(levels, errs), zip(levels[1:], errs[1:])):
            ratio = math.log((m1 - 1) / (m0 - 1))
            pairs += [(f"order_div_{m0}_{m1}", math.log(e0[0] / e1[0]) / ratio),
                      (f"order_consistency_{m0}_{m1}", math.log(e0[1] / e1[1]) / ratio)]
    _print_kv(pairs)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    lam = analysis.coercivity_lambda_min(cfg.potential)
    _print_kv([("lambda_min", lam), ("coercive", lam > 0.0), ("V_min", cfg.potential.essinf),
               ("V_max", cfg.potential.esssup)])
    return EXIT_OK if lam > 0.0 else EXIT_HYPOTHESIS


# -- entry -----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    epilog = "config keys and defaults:\n" + DEFAULTS_HELP + (
        "\n\nexit codes: 0 ok, 2 not converged, 64 usage/config error, 65 hypothesis or check failure"
        "\nenvironment: CURLCURL_THREADS caps the worker threads of the check suites and 3D slabs"
    )
    p = _Parser(prog="curlcurl", description="Nehari ground states of the reduced curl-curl equation.",
                epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="compute a Steiner-symmetric ground-state candidate")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (default: config 'output')")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("verify", help="run inequality and coercivity checks")
    s.add_argument("--config", required=True)
    s.add_argument("--suite", required=True, choices=SUITES + ("all",))
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("symmetrize", help="Steiner-symmetrize a field CSV in z")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="supplies V and f for the report (default V=1, power p=3)")
    s.set_defaults(func=cmd_symmetrize)

    s = sub.add_parser("reconstruct", help="lift a profile to the 3D vector field and export it")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="supplies V and f for the residual (default V=1, power p=3)")
    s.add_argument("--L", type=float, default=3.0, help="half-width of the cube (default 3)")
    s.add_argument("--n", type=int, default=41, help="nodes per direction, odd (default 41)")
    s.add_argument("--method", choices=("quintic", "bilinear"), default="quintic")
    s.add_argument("--levels", help="comma-separated node counts for a consistency study, e.g. 61,121,241")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("spectrum", help="smallest eigenvalue of the quadratic form (coercivity)")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_spectrum)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS if isinstance(exc, ValueError) else EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
