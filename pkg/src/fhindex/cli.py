"""Command-line entry point: ``fhindex <subcommand> ...``.

Exit codes: 0 success, 1 a numeric cross-check failed, 2 bad input.
Set FHINDEX_THREADS to cap the BLAS thread pool.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .calibration import LambdaGrid, calibrate_index
from .countable import beta_index_curve, rag_from_initial
from .fileio import InputError, RunManifest, load_instance, load_model, write_csv, write_json
from .model import BetaState, SparseBanditModel, beta_bernoulli_spec
from .oracle import ENUM_BUDGET, oracle_table_bisect, oracle_table_enumerate
from .policy import compare_policies
from .rag import ag_reference, block_rag_full, rag_full, rag_full_sparse

EXIT_OK, EXIT_CHECK, EXIT_INPUT = 0, 1, 2
THREADS_ENV = "FHINDEX_THREADS"
ORACLE_TOL = 1e-9
BISECT_LIMIT = 20000  # (d, i) lanes


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated {kind.__name__} values") from None
    return parse


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _discount(text):
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError("discount factor must be in (0, 1]")
    return v


def _thread_limit():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def _manifest(args, inputs=(), seed=None) -> RunManifest:
    skip = {"func", "handler"}
    argd = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}
    man = RunManifest(args.command if args.command != "policy" else f"policy {args.action}",
                      argd, seed, _version())
    for p in inputs:
        man.add_input(p)
    return man


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(man: RunManifest, out: Path, stem: str, files) -> None:
    man.outputs = [p.name for p in files] + [f"{stem}.manifest.json"]
    man.write(out, stem)
    for p in files:
        print(p)


# index ---------------------------------------------------------------------

def _run_finite(model, T, algo):
    if algo == "sparse":
        return rag_full_sparse(model if isinstance(model, SparseBanditModel) else model.to_sparse(), T)
    dense = model.to_dense() if isinstance(model, SparseBanditModel) else model
    return {"ag": ag_reference, "rag": rag_full, "block": block_rag_full}[algo](dense, T)


def _oracle_check(model, table):
    """Max abs difference to an oracle, or None when the instance is too large."""
    dense = model.to_dense() if isinstance(model, SparseBanditModel) else model
    T = table.shape[0]
    if (T + 1) ** dense.n <= ENUM_BUDGET:
        ref, how = oracle_table_enumerate(dense, T), "enumeration"
    elif T * dense.n <= BISECT_LIMIT:
        ref, how = oracle_table_bisect(dense, T, tol=1e-11), "bisection"
    else:
        return None, "skipped (instance too large)"
    return float(np.max(np.abs(ref - table))), how


def cmd_index(args) -> int:
    loaded = load_model(args.model)
    out = _out_dir(args)
    man = _manifest(args, [args.model])
    files = []
    if isinstance(loaded, tuple):
        spec, i0 = loaded
        tab = rag_from_initial(spec, i0, args.horizon, block=args.algo == "block")
        rows = [(d, s.key(), v) for d, s, v in tab.rows()]
        files.append(write_csv(out / "index.csv", ["d", "i_key", "lambda"], rows))
        table = None
    else:
        tab = _run_finite(loaded, args.horizon, args.algo)
        table = tab.table()
        rows = [(d, i, table[d - 1, i]) for d in range(1, args.horizon + 1) for i in range(loaded.n)]
        files.append(write_csv(out / "index.csv", ["d", "i", "lambda"], rows))
    if args.order:
        seq = [(k, s, i.key() if isinstance(i, BetaState) else i, lam)
               for k, (s, i, lam) in enumerate(tab.order(), start=1)]
        files.append(write_csv(out / "order.csv", ["k", "s", "i", "lambda"], seq))
    ops = {"refresh_ops": tab.ops.refresh_ops, "rank1_ops": tab.ops.rank1_ops,
           "block_products": tab.ops.block_products, "total_ops": tab.ops.total,
           "peak_slots": tab.peak_slots, "manifest": "index.manifest.json"}
    files.append(write_json(out / "ops.json", ops))
    status = EXIT_OK
    if args.check_oracle:
        if table is None:
            man.extra["oracle"] = "not available for countable models"
        else:
            diff, how = _oracle_check(loaded, table)
            man.extra["oracle"] = {"method": how, "max_abs_diff": diff, "tol": ORACLE_TOL}
            if diff is not None and diff > ORACLE_TOL:
                print(f"oracle mismatch: max |diff| = {diff:.3e} > {ORACLE_TOL}", file=sys.stderr)
                status = EXIT_CHECK
    if args.plot and table is not None:
        from .plotting import plot_index_table

        files.append(plot_index_table(table, out / "index.png"))
    _finish(man, out, "index", files)
    return status


# calibrate -----------------------------------------------------------------

def cmd_calibrate(args) -> int:
    if args.digits is not None and args.digits < 1:
        raise InputError("--digits must be >= 1 (the grid needs at least 2 points)")
    if args.grid_size is not None and args.grid_size < 2:
        raise InputError("--grid-size must be >= 2")
    loaded = load_model(args.model)
    if isinstance(loaded, tuple):
        raise InputError("calibration needs a finite model")
    model = loaded.to_dense() if isinstance(loaded, SparseBanditModel) else loaded
    grid = LambdaGrid.for_model(model, args.grid_size) if args.grid_size else LambdaGrid.digits(model, args.digits or 3)
    out = _out_dir(args)
    man = _manifest(args, [args.model])
    vals = calibrate_index(model, grid, args.horizon, eps=args.eps)
    rows = [(d, i, vals[d - 1, i]) for d in range(1, args.horizon + 1) for i in range(model.n)]
    files = [write_csv(out / "calibrate.csv", ["d", "i", "lambda_hat"], rows)]
    meta = {"grid_lo": float(grid.values[0]), "grid_hi": float(grid.values[-1]), "L": grid.L,
            "spacing": grid.spacing, "eps": args.eps, "manifest": "calibrate.manifest.json"}
    files.append(write_json(out / "calibrate.meta.json", meta))
    man.extra.update(meta)
    _finish(man, out, "calibrate", files)
    return EXIT_OK


# bernoulli -----------------------------------------------------------------

def cmd_bernoulli(args) -> int:
    out = _out_dir(args)
    man = _manifest(args)
    files = []
    if args.sweep_beta:
        rows = []
        for beta in args.sweep_beta:
            if not 0.0 < beta <= 1.0:
                raise InputError(f"discount factor {beta} outside (0, 1]")
        for beta in args.sweep_beta:
            curve = beta_index_curve(beta, args.horizon, (args.i0, args.j0))
            rows += [(beta, s, v) for s, v in enumerate(curve, start=1)]
        files.append(write_csv(out / "bernoulli_sweep.csv", ["beta", "s", "lambda"], rows))
        if args.plot:
            from .plotting import plot_beta_sweep

            files.append(plot_beta_sweep(rows, out / "bernoulli_sweep.png"))
        _finish(man, out, "bernoulli_sweep", files)
        return EXIT_OK
    spec = beta_bernoulli_spec(args.beta)
    tab = rag_from_initial(spec, BetaState(args.i0, args.j0), args.horizon, block=args.block)
    rows = [(d, s.key(), v) for d, s, v in tab.rows()]
    files.append(write_csv(out / "bernoulli.csv", ["d", "i_key", "lambda"], rows))
    man.extra["relevant_pairs"] = len(rows)
    man.extra["ops"] = tab.ops.as_dict()
    if args.plot:
        from .plotting import plot_beta_sweep

        curve = [(args.beta, d, tab.values[d - 1][0]) for d in range(1, args.horizon + 1)]
        files.append(plot_beta_sweep(curve, out / "bernoulli.png"))
    _finish(man, out, "bernoulli", files)
    return EXIT_OK


# bench ---------------------------------------------------------------------

def cmd_bench(args) -> int:
    bad = [a for a in args.algos if a not in bench_mod.ALGOS]
    if bad:
        raise InputError(f"unknown algorithms {bad}; choose from {', '.join(bench_mod.ALGOS)}")
    out = _out_dir(args)
    seeds = args.seeds or [args.seed]
    man = _manifest(args, seed=args.seed)
    cfg = bench_mod.SweepConfig(tuple(args.algos), tuple(args.n), args.horizon, tuple(seeds),
                                args.beta, args.digits, workers=args.workers)
    records = bench_mod.run_scaling_sweep(cfg)
    files = [write_csv(out / "bench.csv", list(bench_mod.CSV_FIELDS), [r.csv_row() for r in records])]
    fits = {}
    if args.fit:
        reports = []
        best = {}
        for algo in args.algos:
            axis = "T" if algo == "rag_i0" else "n"
            try:
                order, reps = bench_mod.fit_records(records, algo, axis)
            except bench_mod.RankDeficient as e:
                man.extra.setdefault("fit_skipped", {})[algo] = str(e)
                continue
            best[algo] = order
            reports += reps
            fits[algo] = next(r for r in reps if r["order"] == order)
        files.append(write_json(out / "fit.json", {"fits": reports, "best_order": best,
                                                   "manifest": "bench.manifest.json"}))
    if args.plot:
        from .plotting import plot_memory, plot_scaling

        files.append(plot_scaling(records, fits, out / "bench_ops.png"))
        files.append(plot_memory(records, out / "bench_memory.png"))
    _finish(man, out, "bench", files)
    return EXIT_OK


# policy --------------------------------------------------------------------

def cmd_policy(args) -> int:
    inst = load_instance(args.instance)
    out = _out_dir(args)
    man = _manifest(args, [args.instance])
    rows = compare_policies(inst)
    files = [write_csv(out / "policy_compare.csv", ["policy", "value", "gap"], rows)]
    if args.plot:
        from .plotting import plot_policy_values

        files.append(plot_policy_values(rows, out / "policy_compare.png"))
    status = EXIT_OK
    if any(gap < -1e-9 for _, _, gap in rows):
        print("a heuristic beat the optimum: numeric check failed", file=sys.stderr)
        status = EXIT_CHECK
    _finish(man, out, "policy_compare", files)
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fhindex", description="Finite-horizon bandit index tools.")
    ap.add_argument("--version", action="version", version=_version())
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="out", help="directory for CSV/JSON artifacts (default: out)")
    common.add_argument("--plot", action="store_true", help="also render PNG figures into --out-dir")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[common], help="exact index table")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--horizon", "-T", required=True, type=_positive)
    p.add_argument("--algo", choices=["ag", "rag", "block", "sparse"], default="rag")
    p.add_argument("--order", action="store_true", help="also write the emission sequence k,s,i,lambda")
    p.add_argument("--check-oracle", action="store_true", help="compare with a brute-force oracle if small")
    p.set_defaults(handler=cmd_index)

    p = sub.add_parser("calibrate", parents=[common], help="approximate index on a grid")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--horizon", "-T", required=True, type=_positive)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--digits", type=int, help="grid of 10^m + 1 points (default 3)")
    g.add_argument("--grid-size", type=int, help="explicit number of grid points L")
    p.add_argument("--eps", type=float, default=1e-9)
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("bernoulli", parents=[common], help="Beta-Bernoulli project from one prior")
    p.add_argument("--i0", type=_positive, default=1)
    p.add_argument("--j0", type=_positive, default=1)
    p.add_argument("--horizon", "-T", required=True, type=_positive)
    p.add_argument("--beta", type=_discount, default=1.0)
    p.add_argument("--sweep-beta", type=_csv_list(float), help="comma-separated discount factors")
    p.add_argument("--block", action="store_true", help="use the block variant")
    p.set_defaults(handler=cmd_bernoulli)

    p = sub.add_parser("bench", parents=[common], help="operation-count scaling sweep")
    p.add_argument("--algos", type=_csv_list(str), default=["rag"])
    p.add_argument("--n", type=_csv_list(int), required=True, help="sizes (horizons for rag_i0)")
    p.add_argument("--horizon", "-T", type=_positive, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--seeds", type=_csv_list(int), help="several seeds (overrides --seed)")
    p.add_argument("--beta", type=_discount, default=1.0)
    p.add_argument("--digits", type=_positive, default=3)
    p.add_argument("--workers", type=_positive, default=1, help="processes for sweep cells")
    p.add_argument("--fit", action="store_true", help="write polynomial fit report fit.json")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("policy", parents=[common], help="scheduling policies on toy instances")
    p.add_argument("action", choices=["compare"])
    p.add_argument("--instance", required=True, type=Path)
    p.set_defaults(handler=cmd_policy)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code not in (0, None) else EXIT_OK
    try:
        with _thread_limit():
            return args.handler(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
