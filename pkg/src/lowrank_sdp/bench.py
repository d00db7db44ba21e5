"""Synthetic instances and experiment drivers producing CSV rows."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .heuristics import AMSettings, alternating_minimization, gap
from .library import (build_bp_full, build_bp_reduced, build_mc_grouped, build_mc_reduced,
                      encode_matrix_completion)
from .problem import CompletionInstance, ObservedMatrix, example1_instance
from .relaxations import StrengtheningOptions, build_compact_lifted, build_full_lifted, build_mprt, decode
from .solver import NUMERICAL_FAILURE, SolverSettings, solve

MC_RELAXATIONS = ("mprt", "full", "full-perm", "compact", "reduced", "grouped", "bp-full", "bp-reduced")
RELAXATIONS = MC_RELAXATIONS + ("rrr-lifted", "rrr-compact")
HEADER = ("seed", "n", "m", "p", "gamma", "relaxation", "lower_bound", "upper_bound", "gap",
          "status", "iterations", "build_time_s", "solve_time_s")
LOSS_SCALE = 0.5


def default_gammas() -> list[float]:
    return [float(g) for g in np.logspace(-1, 5, 13)]


@dataclass
class ExperimentConfig:
    n: int = 8
    m: int | None = None
    r: int = 2
    eps: float = 0.1
    p: float = 0.5
    gammas: list = field(default_factory=default_gammas)
    k: int | None = None
    lam: float = 0.0
    relaxations: list = field(default_factory=lambda: ["mprt", "compact"])
    seeds: list = field(default_factory=lambda: list(range(10)))
    solver: SolverSettings = field(default_factory=SolverSettings)
    sizes: list = field(default_factory=lambda: [4, 8, 12, 16, 18])
    out_path: str | None = None

    def __post_init__(self):
        if self.m is None:
            self.m = self.n
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.relaxations:
            raise ValueError("at least one relaxation is required")
        for name in self.relaxations:
            if name not in RELAXATIONS:
                raise ValueError(f"unknown relaxation {name!r}")


# -- instances --------------------------------------------------------------------------


def _normals(rng: np.random.Generator, count: int) -> np.ndarray:
    """Box-Muller transform of uniforms from the Philox stream."""
    half = (count + 1) // 2
    u1 = 1.0 - rng.random(half)  # in (0, 1]
    u2 = rng.random(half)
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])
    return z[:count]


def generate_instance(n: int, m: int, r: int, eps: float, p: float, seed: int) -> ObservedMatrix:
    """``A = U V + eps Z`` with standard normal entries drawn from a Philox4x64
    stream keyed by ``seed``; the first ``round(p n m)`` pairs of a seeded
    shuffle are observed."""
    if not 1 <= r <= min(n, m):
        raise ValueError("rank must lie in [1, min(n, m)]")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    rng = np.random.Generator(np.random.Philox(key=seed))
    U = _normals(rng, n * r).reshape(n, r)
    V = _normals(rng, r * m).reshape(r, m)
    Z = _normals(rng, n * m).reshape(n, m)
    A = U @ V + eps * Z
    order = rng.permutation(n * m)[: int(round(p * n * m))]
    omega = [(int(q // m), int(q % m)) for q in order]
    return ObservedMatrix(A, tuple(omega))


# -- single cell ------------------------------------------------------------------------


def build_relaxation(name: str, obs: ObservedMatrix, gamma, k=None, lam: float = 0.0,
                     loss_scale: float = LOSS_SCALE):
    """Build a matrix-completion relaxation by name."""
    if name == "reduced":
        return build_mc_reduced(obs, lam, k, gamma, loss_scale)
    if name == "grouped":
        return build_mc_grouped(obs, lam, k, gamma, loss_scale)
    if name == "bp-full":
        return build_bp_full(obs)
    if name == "bp-reduced":
        return build_bp_reduced(obs)
    p = encode_matrix_completion(obs, lam, k, gamma, loss_scale)
    if name == "mprt":
        return build_mprt(p)
    if name == "compact":
        return build_compact_lifted(p)
    if name == "full":
        return build_full_lifted(p)
    if name == "full-perm":
        return build_full_lifted(p, StrengtheningOptions(symmetry_y=True))
    raise ValueError(f"relaxation {name!r} does not apply to matrix completion")


@dataclass
class CellResult:
    lower_bound: float
    status: str
    iterations: int
    build_time: float
    solve_time: float
    solution: object = None


def solve_cell(name, obs, gamma, k, lam, settings: SolverSettings) -> CellResult:
    t0 = time.perf_counter()
    P = build_relaxation(name, obs, gamma, k, lam)
    build_time = time.perf_counter() - t0
    t1 = time.perf_counter()
    sol = solve(P, settings)
    solve_time = time.perf_counter() - t1
    if sol.status == NUMERICAL_FAILURE:
        return CellResult(float("nan"), sol.status, sol.iterations, build_time, solve_time)
    dec = decode(P, sol)
    return CellResult(dec.lower_bound, sol.status, sol.iterations, build_time, solve_time, dec)


def upper_bound(obs, gamma, k, lam) -> float:
    n, m = obs.shape
    rank = k if k is not None else min(n, m)
    return alternating_minimization(obs, AMSettings(rank, gamma), LOSS_SCALE, lam).upper_bound


def _row(seed, n, m, p, gamma, name, cell: CellResult, ub, scale=1.0) -> dict:
    lb = cell.lower_bound
    g = float("nan")
    if np.isfinite(lb) and ub > 0:
        g = gap(ub, lb)
    return dict(seed=seed, n=n, m=m, p=p, gamma=gamma, relaxation=name, lower_bound=lb / scale,
                upper_bound=ub / scale, gap=g, status=cell.status, iterations=cell.iterations,
                build_time_s=cell.build_time, solve_time_s=cell.solve_time)


def _sorted(rows):
    order = {name: i for i, name in enumerate(RELAXATIONS)}
    return sorted(rows, key=lambda r: (r["seed"], r["n"], r["gamma"], order[r["relaxation"]]))


# -- drivers ----------------------------------------------------------------------------


def run_gamma_sweep(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for seed in cfg.seeds:
        obs = generate_instance(cfg.n, cfg.m, cfg.r, cfg.eps, cfg.p, seed)
        for gamma in cfg.gammas:
            ub = upper_bound(obs, gamma, cfg.k if cfg.k is not None else cfg.r, cfg.lam)
            for name in cfg.relaxations:
                cell = solve_cell(name, obs, gamma, cfg.k if cfg.k is not None else cfg.r, cfg.lam, cfg.solver)
                rows.append(_row(seed, cfg.n, cfg.m, cfg.p, gamma, name, cell, ub))
    return _sorted(rows)


def run_scaling(cfg: ExperimentConfig) -> list[dict]:
    """n = m over ``cfg.sizes`` with gamma = 1e4 / n^2; bounds reported divided by n^2."""
    for name in cfg.relaxations:
        if name not in ("compact", "reduced"):
            raise ValueError("scaling study supports the compact and reduced relaxations")
    rows = []
    k = cfg.k if cfg.k is not None else cfg.r
    for n in cfg.sizes:
        gamma = 1e4 / n ** 2
        for seed in cfg.seeds:
            obs = generate_instance(n, n, cfg.r, cfg.eps, cfg.p, seed)
            ub = upper_bound(obs, gamma, k, cfg.lam)
            for name in cfg.relaxations:
                cell = solve_cell(name, obs, gamma, k, cfg.lam, cfg.solver)
                rows.append(_row(seed, n, n, cfg.p, gamma, name, cell, ub, scale=float(n * n)))
    return _sorted(rows)


def example1_report(settings: SolverSettings | None = None,
                    instance: CompletionInstance | None = None) -> list[dict]:
    """Lower bounds of the MPRT, full lifted with symmetry cuts, and compact
    relaxations on the shipped 7 x 5 example."""
    settings = settings or SolverSettings()
    inst = instance or example1_instance()
    n, m = inst.obs.shape
    p = len(inst.obs.omega) / (n * m)
    ub = upper_bound(inst.obs, inst.gamma, inst.k, inst.lam)
    rows = []
    for name in ("mprt", "full-perm", "compact"):
        cell = solve_cell(name, inst.obs, inst.gamma, inst.k, inst.lam, settings)
        rows.append(_row(0, n, m, p, inst.gamma, name, cell, ub))
    return rows


# -- output -----------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if np.isfinite(v) else ("nan" if np.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in HEADER])
    return buf.getvalue()


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(rows))


def with_tolerance(settings: SolverSettings, tol: float | None, max_iters: int | None) -> SolverSettings:
    kw = {}
    if tol is not None:
        kw.update(eps_primal=tol, eps_dual=tol, eps_gap=tol)
    if max_iters is not None:
        kw["max_iterations"] = max_iters
    return replace(settings, **kw)
