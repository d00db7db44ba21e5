"""Command line entry point: ``lowrank-sdp <command> [options]``."""

from __future__ import annotations

import argparse
import sys

from . import bench
from .conic import export_sdpa
from .problem import CompletionInstance, load_instance, save_instance
from .solver import NUMERICAL_FAILURE, SolverSettings


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _gamma(text: str):
    return None if text.lower() in ("none", "inf") else float(text)


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--rank", type=int, default=2)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--gamma", type=_gamma, default=100.0)
    sp.add_argument("--gammas", type=_floats, default=None)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.0)
    sp.add_argument("--relaxation", default=None,
                    help="relaxation name, or a comma list for sweep/scale")
    sp.add_argument("--seeds", type=_ints, default=[0])
    sp.add_argument("--sizes", type=_ints, default=None, help="n values for scale")
    sp.add_argument("--instance", default=None, help="instance file (solve, export-sdpa)")
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iters", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lowrank-sdp", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("gen", "generate a synthetic completion instance file"),
        ("solve", "solve one relaxation and print a CSV row"),
        ("example1", "bounds on the shipped 7x5 example"),
        ("sweep", "gap versus gamma"),
        ("scale", "bounds versus n with gamma = 1e4/n^2"),
        ("export-sdpa", "write a relaxation in SDPA sparse format"),
    ]:
        _common(sub.add_parser(name, help=help_))
    return ap


def _settings(args) -> SolverSettings:
    s = SolverSettings(verbose=args.verbose)
    return bench.with_tolerance(s, args.tol, args.max_iters)


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _instance(args) -> CompletionInstance:
    if args.instance:
        return load_instance(args.instance)
    m = args.m if args.m is not None else args.n
    obs = bench.generate_instance(args.n, m, args.rank, args.eps, args.p, args.seeds[0])
    k = args.k if args.k is not None else args.rank
    return CompletionInstance(obs, args.lam, k, args.gamma)


def _relaxations(args, default):
    if args.relaxation is None:
        return list(default)
    return [r.strip() for r in args.relaxation.split(",") if r.strip()]


def _exit_code(rows) -> int:
    return 2 if any(r["status"] == NUMERICAL_FAILURE for r in rows) else 0


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return _dispatch(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "gen":
        inst = _instance(args)
        if args.out:
            save_instance(inst, args.out)
        else:
            from .problem import format_instance
            sys.stdout.write(format_instance(inst))
        return 0

    if cmd == "example1":
        rows = bench.example1_report(_settings(args))
        _emit(bench.format_csv(rows), args.out)
        return _exit_code(rows)

    if cmd == "solve":
        inst = _instance(args)
        names = _relaxations(args, ["compact"])
        n, m = inst.obs.shape
        p = len(inst.obs.omega) / (n * m)
        ub = bench.upper_bound(inst.obs, inst.gamma, inst.k, inst.lam)
        rows = []
        for name in names:
            cell = bench.solve_cell(name, inst.obs, inst.gamma, inst.k, inst.lam, _settings(args))
            rows.append(bench._row(args.seeds[0], n, m, p, inst.gamma, name, cell, ub))
        _emit(bench.format_csv(rows), args.out)
        return _exit_code(rows)

    if cmd in ("sweep", "scale"):
        cfg = bench.ExperimentConfig(
            n=args.n, m=args.m, r=args.rank, eps=args.eps, p=args.p,
            gammas=args.gammas if args.gammas else bench.default_gammas(),
            k=args.k, lam=args.lam, seeds=args.seeds, solver=_settings(args),
            relaxations=_relaxations(args, ["mprt", "compact"] if cmd == "sweep" else ["reduced"]),
            out_path=args.out,
        )
        if cmd == "scale" and args.sizes:
            cfg.sizes = args.sizes
        rows = bench.run_gamma_sweep(cfg) if cmd == "sweep" else bench.run_scaling(cfg)
        _emit(bench.format_csv(rows), args.out)
        return _exit_code(rows)

    if cmd == "export-sdpa":
        inst = _instance(args)
        name = _relaxations(args, ["compact"])[0]
        P = bench.build_relaxation(name, inst.obs, inst.gamma, inst.k, inst.lam)
        _emit(export_sdpa(P, lower=True), args.out)
        return 0
    return 1  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
