"""Command-line runners: ``l12prox {cs,matcomp,tv,proxcheck}``.

Every run writes into ``--out-dir`` a ``manifest.txt`` recording the command
line, seed, library version, configuration and timestamps. Result CSVs hold
only quantities that are reproducible bit for bit from the seed, except for
the ``seconds`` column of ``cs`` ``runs.csv``; other wall-clock measurements
go to ``timing.csv`` and the trace CSVs.

Exit codes: 0 success, 1 a check failed, 2 bad usage or unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import logging
import os
import shlex
import sys

import numpy as np

from . import __version__
from .cs import SOLVERS, CsConfig, make_rng, run_cs_experiment, summarize
from .matcomp import (
    ObservedMatrix,
    default_lambda,
    rmse_matrix,
    solve_mc_nmapg,
    synthetic_low_rank,
)
from .oracle import run_prox_checks
from .pgm import read_pgm, write_pgm
from .solvers import SolverConfig
from .tv import TvConfig, altmin_denoise, image_rmse, piecewise_constant_image

log = logging.getLogger("l12prox")

DEFAULT_TV_GRID = [0.02 * 2**k for k in range(7)]


class InputError(Exception):
    """Unreadable or malformed input; maps to exit code 2."""


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


def _write_rows(path, rows, fields):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in fields})


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_manifest(out_dir, args, argv, started, config):
    lines = [
        f"command: {args.command}",
        f"version: {__version__}",
        f"seed: {args.seed}",
        f"argv: l12prox {shlex.join(argv)}",
        f"started: {started}",
        f"finished: {_now()}",
        "config:",
    ]
    lines += [f"  {k}: {v}" for k, v in config.items()]
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _solver_list(text):
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SOLVERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown solver(s) {bad}; choose from {', '.join(SOLVERS)}")
    return names


def _synthetic_spec(text, count):
    try:
        parts = [float(v) for v in text.split(":", 1)[1].split(",")]
    except (IndexError, ValueError):
        parts = []
    if len(parts) != count:
        raise InputError(f"malformed synthetic descriptor {text!r}")
    return parts


def cmd_cs(args, argv) -> int:
    started = _now()
    cfg = CsConfig(d=args.d, noise_std=args.noise_std, lambda_grid=args.lambda_grid,
                   repeats=args.repeats,
                   solver_cfg=SolverConfig(max_iters=args.max_iters, tol=args.tol))
    os.makedirs(args.out_dir, exist_ok=True)
    log.info("cs: d=%d, %d repeats, solvers %s", cfg.d, cfg.repeats, ",".join(args.solvers))
    rows, traces = run_cs_experiment(cfg, args.solvers, seed=args.seed, keep_traces=args.traces)
    _write_rows(os.path.join(args.out_dir, "runs.csv"), rows,
                ["solver", "lambda_index", "lambda", "repeat", "rmse", "seconds", "iters",
                 "final_objective", "status"])
    table = summarize(rows, "rmse")
    cols = ["solver", "lambda_index", "lambda", "metric", "mean", "std", "repeats"]
    _write_rows(os.path.join(args.out_dir, "results.csv"), table, cols)
    _write_rows(os.path.join(args.out_dir, "timing.csv"),
                summarize(rows, "seconds") + summarize(rows, "iters"), cols)
    if args.traces:
        tdir = os.path.join(args.out_dir, "traces")
        os.makedirs(tdir, exist_ok=True)
        for (s, li, r), tr in traces.items():
            tr.write_csv(os.path.join(tdir, f"{s}_lambda{li}_repeat{r}.csv"))
    for row in table:
        log.info("%-16s lambda[%d]=%.3g  rmse %.4f +- %.4f", row["solver"], row["lambda_index"],
                 row["lambda"], row["mean"], row["std"])
    _write_manifest(args.out_dir, args, argv, started, {
        "d": cfg.d, "noise_std": cfg.noise_std, "lambda_grid": cfg.lambda_grid,
        "repeats": cfg.repeats, "solvers": ",".join(args.solvers),
        "max_iters": args.max_iters, "tol": args.tol, "traces": args.traces,
        "instance_seeds": f"{args.seed}..{args.seed + cfg.repeats - 1}"})
    return 0


def _load_image(path):
    try:
        return read_pgm(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {path!r}: {exc}")


def cmd_matcomp(args, argv) -> int:
    started = _now()
    rng = make_rng(args.seed)
    if args.input.startswith("synthetic:"):
        m, n, rank, frac, noise = _synthetic_spec(args.input, 5)
        if min(m, n, rank) < 1 or not 0 < frac <= 1 or noise < 0:
            raise InputError(f"invalid synthetic descriptor {args.input!r}")
        O, obs = synthetic_low_rank(int(m), int(n), int(rank), frac, noise, rng)
        train, test = obs.split(args.holdout, rng)
        image = False
    else:
        O = _load_image(args.input)
        m, n = O.shape
        k = int(round(args.sample_frac * m * n))
        flat = np.sort(rng.choice(m * n, size=k, replace=False))
        r, c = np.divmod(flat, n)
        train, test = ObservedMatrix((m, n), r, c, O[r, c]), None
        image = True
    lam = default_lambda(train) if args.lam is None else args.lam
    os.makedirs(args.out_dir, exist_ok=True)
    log.info("matcomp: %dx%d, %d observed, lambda=%.4g", *train.shape, train.nnz, lam)
    cfg = SolverConfig(max_iters=args.max_iters, tol=args.tol)
    X, trace = solve_mc_nmapg(train, lam, k_max=args.k_max, cfg=cfg)
    row = {"input": args.input, "lambda": lam, "rank": X.rank, "iters": trace.n_iters,
           "status": "ok" if trace.converged else "max_iters",
           "rmse": rmse_matrix(X, O), "heldout_rmse": float("nan")}
    if test is not None and test.nnz:
        e = X.entries(test.rows, test.cols) - test.values
        row["heldout_rmse"] = float(np.sqrt(np.mean(e * e)))
    _write_rows(os.path.join(args.out_dir, "metrics.csv"), [row], list(row))
    trace.write_csv(os.path.join(args.out_dir, "trace.csv"))
    if image:
        write_pgm(os.path.join(args.out_dir, "recovered.pgm"), X.to_dense())
    else:
        np.savetxt(os.path.join(args.out_dir, "factor_U.csv"), X.U, delimiter=",", fmt="%.17g")
        np.savetxt(os.path.join(args.out_dir, "factor_V.csv"), X.V, delimiter=",", fmt="%.17g")
    for w in trace.warnings:
        log.warning("%s", w)
    log.info("rank %d, rmse %.4g, held-out rmse %.4g", row["rank"], row["rmse"], row["heldout_rmse"])
    _write_manifest(args.out_dir, args, argv, started, {
        "input": args.input, "lambda": lam, "k_max": args.k_max, "max_iters": args.max_iters,
        "tol": args.tol, "holdout": args.holdout, "sample_frac": args.sample_frac})
    return 0


def cmd_tv(args, argv) -> int:
    started = _now()
    rng = make_rng(args.seed)
    if args.input.startswith("synthetic:"):
        m, n = _synthetic_spec(args.input, 2)
        if min(m, n) < 2:
            raise InputError(f"invalid synthetic descriptor {args.input!r}")
        clean = piecewise_constant_image(int(m), int(n))
    else:
        clean = _load_image(args.input)
    noisy = clean + args.noise_std * rng.standard_normal(clean.shape)
    noisy_rmse = image_rmse(noisy, clean)
    os.makedirs(args.out_dir, exist_ok=True)
    tdir = os.path.join(args.out_dir, "traces")
    os.makedirs(tdir, exist_ok=True)
    write_pgm(os.path.join(args.out_dir, "clean.pgm"), clean)
    write_pgm(os.path.join(args.out_dir, "noisy.pgm"), noisy)
    rows = []
    for k, lam in enumerate(args.lambda_grid):
        cfg = TvConfig(lam, cgd_tol=args.cgd_tol, cgd_max_iters=args.cgd_max_iters,
                       outer_iters=args.outer_iters)
        x, trace = altmin_denoise(noisy, cfg)
        rows.append({"lambda_index": k, "lambda": lam, "rmse": image_rmse(x, clean),
                     "noisy_rmse": noisy_rmse, "outer_iters": trace.n_iters,
                     "final_objective": trace.final_objective,
                     "status": "ok" if trace.converged else "max_iters"})
        write_pgm(os.path.join(args.out_dir, f"denoised_lambda{k}.pgm"), x)
        trace.write_csv(os.path.join(tdir, f"trace_lambda{k}.csv"))
        for w in trace.warnings:
            log.warning("lambda %g: %s", lam, w)
        log.info("lambda %.4g: rmse %.5f (noisy %.5f)", lam, rows[-1]["rmse"], noisy_rmse)
    _write_rows(os.path.join(args.out_dir, "rmse.csv"), rows, list(rows[0]))
    _write_manifest(args.out_dir, args, argv, started, {
        "input": args.input, "shape": "x".join(map(str, clean.shape)),
        "noise_std": args.noise_std, "lambda_grid": args.lambda_grid, "mu": "100*lambda",
        "cgd_tol": args.cgd_tol, "cgd_max_iters": args.cgd_max_iters,
        "outer_iters": args.outer_iters})
    return 0


def cmd_proxcheck(args, argv) -> int:
    if args.trials < 0:
        raise InputError("--trials must be nonnegative")
    if not args.dims or any(d not in (1, 2, 3) for d in args.dims):
        raise InputError("--dims entries must be 1, 2 or 3")
    report = run_prox_checks(args.trials, dims=args.dims, seed=args.seed,
                             points=args.points, perturb=args.perturb)
    for f in report.failures[:20]:
        print(f"FAIL trial {f['trial']}: z={f['z']} lam={f['lam']!r}: {'; '.join(f['problems'])}")
    print(f"proxcheck: {report.trials} checks, {report.passed} passed, {report.failed} failed")
    return 1 if report.failed else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="base random seed (default 42)")
    common.add_argument("--out-dir", default="./out", help="output directory (default ./out)")
    common.add_argument("--quiet", action="store_true", help="only print warnings and errors")

    p = argparse.ArgumentParser(prog="l12prox", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    cs = sub.add_parser("cs", parents=[common], help="compressed sensing benchmark")
    cs.add_argument("--d", type=int, default=500, help="measurements; the dictionary is d x 4d")
    cs.add_argument("--lambda-grid", type=_float_list, default=CsConfig(d=1).lambda_grid)
    cs.add_argument("--repeats", type=int, default=10)
    cs.add_argument("--solvers", type=_solver_list, default=list(SOLVERS),
                    help=f"comma-separated subset of {','.join(SOLVERS)}")
    cs.add_argument("--noise-std", type=float, default=0.01)
    cs.add_argument("--max-iters", type=int, default=10000)
    cs.add_argument("--tol", type=float, default=1e-8)
    cs.add_argument("--traces", action="store_true", help="write per-run trace CSVs")
    cs.set_defaults(func=cmd_cs)

    mc = sub.add_parser("matcomp", parents=[common], help="low-rank matrix completion")
    mc.add_argument("--input", required=True,
                    help="PGM image or synthetic:m,n,rank,frac,noise")
    mc.add_argument("--lambda", dest="lam", type=float, default=None,
                    help="penalty weight (default 0.1 * max |observed|)")
    mc.add_argument("--k-max", type=int, default=100)
    mc.add_argument("--max-iters", type=int, default=500)
    mc.add_argument("--tol", type=float, default=1e-6)
    mc.add_argument("--holdout", type=float, default=0.1,
                    help="fraction of synthetic observations withheld for validation")
    mc.add_argument("--sample-frac", type=float, default=0.5,
                    help="fraction of image pixels observed")
    mc.set_defaults(func=cmd_matcomp)

    tv = sub.add_parser("tv", parents=[common], help="TV l1-2 image denoising")
    tv.add_argument("--input", default="synthetic:64,64", help="PGM image or synthetic:m,n")
    tv.add_argument("--noise-std", type=float, default=0.05)
    tv.add_argument("--lambda-grid", type=_float_list, default=DEFAULT_TV_GRID)
    tv.add_argument("--cgd-tol", type=float, default=1e-8)
    tv.add_argument("--cgd-max-iters", type=int, default=200)
    tv.add_argument("--outer-iters", type=int, default=100)
    tv.set_defaults(func=cmd_tv)

    pc = sub.add_parser("proxcheck", parents=[common], help="randomized prox self-check")
    pc.add_argument("--trials", type=int, default=100)
    pc.add_argument("--dims", type=_int_list, default=[1, 2, 3])
    pc.add_argument("--points", type=int, default=401, help="grid points per axis (odd)")
    pc.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    pc.set_defaults(func=cmd_proxcheck)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args, argv)
    except InputError as exc:
        print(f"l12prox {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"l12prox {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"l12prox {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
