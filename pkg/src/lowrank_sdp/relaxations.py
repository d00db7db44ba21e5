"""Lifted relaxations of low-rank quadratic problems.

Three generic formulations are built here:

* the full lifted relaxation with moment matrix over ``(1, vec_t(X), vec(Y))``,
* the compact relaxation that keeps only ``X``, ``Y`` and ``W_xx`` and couples
  them through ``[[sum_i W_xx^(i,i), X^T], [X, Y]] >= 0``,
* the matrix perspective baseline for Frobenius-separable objectives.

The full form accepts extra valid cuts (transposition symmetry of ``Y`` and
``X``, triangle inequalities on ``diag(Y)``, RLT products of linear
constraints).  :func:`reconstruct_eliminated` rebuilds ``W_xy`` and ``W_yy``
from a compact solution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conic import ConicProgram, Lin, ProgramError, VarRef, add_square_epigraph, lin_sum
from .matrix_core import DimensionError, block_diag_sum, commutation_matrix, eig_sym, pseudoinverse, vec_t
from .problem import COL, ROW, LowRankQuadraticProblem, QuadraticConstraint, RelaxationSolution, SolverInfo
from .solver import ConicSolution, NUMERICAL_FAILURE, SolverSettings, solve


class MissingVariableError(ProgramError):
    pass


class NotSeparableError(ValueError):
    pass


class InfeasibleInputError(ValueError):
    pass


@dataclass(frozen=True)
class StrengtheningOptions:
    symmetry_y: bool = False
    symmetry_x: bool = False
    triangle: bool = False
    triplet_budget: int = 200
    rlt: Optional[tuple] = None  # (A, b) with A x <= b on x = vec_t(X)


# -- helpers -------------------------------------------------------------------


def _canonical(p: LowRankQuadraticProblem) -> tuple[LowRankQuadraticProblem, bool]:
    """Row-oriented copy of ``p``; column orientation is handled on ``X^T``."""
    if p.orientation == ROW:
        return p, False
    cons = tuple(QuadraticConstraint(c.Q, c.E.T, c.b) for c in p.constraints)
    q = LowRankQuadraticProblem(
        p.m, p.n, p.H, p.D.T, cons, p.lam, p.k, p.constant, ROW, None
    )
    return q, True


def _upper(n: int) -> np.ndarray:
    return np.triu(np.ones((n, n), dtype=bool))


def _add_projection_hull(P: ConicProgram, Y: VarRef, k: int) -> VarRef:
    """``Y <= I`` through a slack PSD block ``Z = I - Y``, plus ``tr(Y) <= k``.

    ``Y >= 0`` is the caller's business (Y always sits inside a PSD block).
    """
    n = Y.shape[0]
    Z = P.add_psd_block("Z", n)
    P.add_equalities([(Y, 1.0), (Z, 1.0)], np.eye(n), where=_upper(n))
    if k < n:
        P.add_inequality(Y.trace(), float(k))
    return Z


def _add_objective_and_constraints(P: ConicProgram, q: LowRankQuadraticProblem, X: VarRef,
                                   Wxx: VarRef, Y: VarRef) -> None:
    P.add_objective(q.lam * Y.trace() + Wxx.inner(q.H) + X.inner(q.D) + q.constant)
    for c in q.constraints:
        P.add_inequality(Wxx.inner(c.Q) + X.inner(c.E), c.b)


def _finish(P: ConicProgram, kind: str, q, transposed: bool, views: dict) -> ConicProgram:
    P.meta.update(kind=kind, n=q.n, m=q.m, k=q.k, transposed=transposed, views=views)
    return P


# -- full lifted -------------------------------------------------------------------


def build_full_lifted(p: LowRankQuadraticProblem, opts: StrengtheningOptions | None = None) -> ConicProgram:
    """Moment relaxation over ``(1, vec_t(X), vec(Y))`` with optional cuts."""
    opts = opts or StrengtheningOptions()
    q, transposed = _canonical(p)
    n, m = q.n, q.m
    nm, nn = n * m, n * n
    P = ConicProgram()
    M = P.add_psd_block("M", 1 + nm + nn)
    x = M[0, 1:1 + nm]
    X = x.reshape(n, m)
    Wxx = M[1:1 + nm, 1:1 + nm]
    Wxy = M[1:1 + nm, 1 + nm:]
    Wyy = M[1 + nm:, 1 + nm:]
    vecY = M[0, 1 + nm:]
    Y = P.add_psd_block("Y", n)
    _add_projection_hull(P, Y, q.k)

    P.add_equality(M.entry(0, 0), 1.0)
    # vec(Y) inside the moment matrix equals the Y block (column stacking)
    P.add_equalities([(vecY.reshape(n, n, order="F"), 1.0), (Y, -1.0)], 0.0)
    P.add_equalities([(Wyy.block(i, i, n), 1.0) for i in range(n)] + [(Y, -1.0)], 0.0, where=_upper(n))
    P.add_equalities([(Wxy.block(i, i, m, n), 1.0) for i in range(n)] + [(X.T, -1.0)], 0.0)
    _add_objective_and_constraints(P, q, X, Wxx, Y)
    _finish(P, "full", q, transposed, dict(X=X, Y=Y, Wxx=Wxx, Wxy=Wxy, Wyy=Wyy, x=x))

    if opts.symmetry_y:
        add_symmetry_constraints(P)
    if opts.symmetry_x:
        add_x_symmetry_constraints(P)
    if opts.triangle:
        add_triangle_inequalities(P, opts.triplet_budget)
    if opts.rlt is not None:
        add_rlt_inequalities(P, *opts.rlt)
    return P


def _transposition(n: int, m: int | None = None) -> np.ndarray:
    """Permutation ``pi`` with ``K v == v[pi]`` for the commutation matrix."""
    K = commutation_matrix(n, m)
    return np.argmax(K, axis=1)


def _require(P: ConicProgram, *names):
    views = P.meta.get("views", {})
    missing = [nm for nm in names if nm not in views]
    if missing:
        raise MissingVariableError(f"program has no {', '.join(missing)} (needs the full lifted form)")
    return [views[nm] for nm in names]


def _tie_pairs(P: ConicProgram, ref: VarRef, pairs) -> int:
    """Add ``ref[a] == ref[b]`` for each pair, skipping pairs that already share a column."""
    added, seen = 0, set()
    for a, b in pairs:
        ca, cb = int(ref.cols[a]), int(ref.cols[b])
        if ca == cb:
            continue
        key = (min(ca, cb), max(ca, cb))
        if key in seen:
            continue
        seen.add(key)
        P.add_equality(ref.entry(*a) - ref.entry(*b), 0.0)
        added += 1
    return added


def add_symmetry_constraints(P: ConicProgram) -> int:
    """``W_yy = K W_yy K^T`` and ``W_xy = W_xy K^T`` entrywise, orbit-deduplicated.

    Returns the number of rows added.
    """
    Wxy, Wyy = _require(P, "Wxy", "Wyy")
    n = P.meta["n"]
    pi = _transposition(n)
    nn = n * n
    pairs_yy = (((a, b), (pi[a], pi[b])) for a in range(nn) for b in range(a, nn))
    added = _tie_pairs(P, Wyy, pairs_yy)
    pairs_xy = (((r, q), (r, pi[q])) for r in range(Wxy.shape[0]) for q in range(nn) if q < pi[q])
    added += _tie_pairs(P, Wxy, pairs_xy)
    return added


def add_x_symmetry_constraints(P: ConicProgram) -> int:
    """Constraints for a symmetric ``X``: ``x = K x``, ``W_xx = K W_xx K^T``,
    ``W_xy = K W_xy``."""
    x, Wxx, Wxy = _require(P, "x", "Wxx", "Wxy")
    n, m = P.meta["n"], P.meta["m"]
    if n != m:
        raise DimensionError("symmetric X requires a square matrix")
    pi = _transposition(n)
    nm = n * m
    added = _tie_pairs(P, x, (((a,), (pi[a],)) for a in range(nm) if a < pi[a]))
    added += _tie_pairs(P, Wxx, (((a, b), (pi[a], pi[b])) for a in range(nm) for b in range(a, nm)))
    added += _tie_pairs(P, Wxy, (((r, q), (pi[r], q)) for r in range(nm) for q in range(Wxy.shape[1]) if r < pi[r]))
    return added


def triangle_triplets(n: int, budget: int) -> list[tuple[int, int, int]]:
    return list(itertools.islice(itertools.combinations(range(n), 3), max(budget, 0)))


def triangle_cuts(n: int, budget: int) -> list[tuple[str, tuple]]:
    """Cut descriptors ``(family, (i, j, l))``; T2 rotates the leading index.

    T1 linearizes ``1 - y_i - y_j - y_l + y_i y_j + y_i y_l + y_j y_l >= 0`` and
    T2 linearizes ``y_i - y_i y_j - y_i y_l + y_j y_l >= 0`` for diagonal
    entries ``y`` of Y.  Both are multilinear and hold on the 0/1 vertices,
    hence on the whole cube that contains ``diag(Y)``.
    """
    cuts = []
    for i, j, l in triangle_triplets(n, budget):
        cuts.append(("T1", (i, j, l)))
        cuts.extend(("T2", t) for t in ((i, j, l), (j, i, l), (l, i, j)))
    return cuts


def triangle_cut_value(family: str, triplet, Y: np.ndarray, Wyy: np.ndarray) -> float:
    n = Y.shape[0]
    i, j, l = triplet
    P = lambda a, b: Wyy[a * n + a, b * n + b]  # noqa: E731
    if family == "T1":
        return 1 - Y[i, i] - Y[j, j] - Y[l, l] + P(i, j) + P(i, l) + P(j, l)
    return Y[i, i] - P(i, j) - P(i, l) + P(j, l)


def add_triangle_inequalities(P: ConicProgram, triplet_budget: int = 200) -> int:
    Y, Wyy = _require(P, "Y", "Wyy")
    n = P.meta["n"]
    Pe = lambda a, b: Wyy.entry(a * n + a, b * n + b)  # noqa: E731
    cuts = triangle_cuts(n, triplet_budget)
    for family, (i, j, l) in cuts:
        if family == "T1":
            expr = 1.0 - Y.entry(i, i) - Y.entry(j, j) - Y.entry(l, l) + Pe(i, j) + Pe(i, l) + Pe(j, l)
        else:
            expr = Y.entry(i, i) - Pe(i, j) - Pe(i, l) + Pe(j, l)
        P.add_inequality(-expr, 0.0)
    return len(cuts)


def rlt_cut_values(A, b, x, W) -> np.ndarray:
    """``A W A^T + b b^T - b x^T A^T - A x b^T`` (each entry must be >= 0)."""
    A, b = np.atleast_2d(A), np.asarray(b, dtype=float)
    Ax = A @ x
    return A @ W @ A.T + np.outer(b, b) - np.outer(b, Ax) - np.outer(Ax, b)


def add_rlt_inequalities(P: ConicProgram, A, b) -> int:
    """RLT products of ``A vec_t(X) <= b``, one cut per unordered row pair."""
    x, Wxx = _require(P, "x", "Wxx")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[1] != x.shape[0] or A.shape[0] != b.size:
        raise DimensionError(f"RLT system must be r x {x.shape[0]} with matching b")
    count = 0
    for r in range(A.shape[0]):
        for s in range(r, A.shape[0]):
            C = 0.5 * (np.outer(A[r], A[s]) + np.outer(A[s], A[r]))
            expr = Wxx.inner(C) - b[r] * x.inner(A[s]) - b[s] * x.inner(A[r]) + b[r] * b[s]
            P.add_inequality(-expr, 0.0)
            count += 1
    return count


# -- compact -----------------------------------------------------------------------


def build_compact_lifted(p: LowRankQuadraticProblem, opts: StrengtheningOptions | None = None) -> ConicProgram:
    """``W_xx >= vec_t(X) vec_t(X)^T`` plus the (n+m) coupling block."""
    q, transposed = _canonical(p)
    n, m = q.n, q.m
    nm = n * m
    P = ConicProgram()
    Ar = P.add_psd_block("arrow", 1 + nm)
    x = Ar[0, 1:]
    X = x.reshape(n, m)
    Wxx = Ar[1:, 1:]
    C = P.add_psd_block("coupling", n + m)
    Y = C[m:, m:]
    P.add_equality(Ar.entry(0, 0), 1.0)
    P.add_equalities([(Wxx.block(i, i, m), 1.0) for i in range(n)] + [(C[:m, :m], -1.0)], 0.0,
                     where=_upper(m))
    P.add_equalities([(C[m:, :m], 1.0), (X, -1.0)], 0.0)
    _add_projection_hull(P, Y, q.k)
    _add_objective_and_constraints(P, q, X, Wxx, Y)
    _finish(P, "compact", q, transposed, dict(X=X, Y=Y, Wxx=Wxx, x=x))
    if opts is not None and opts.rlt is not None:
        add_rlt_inequalities(P, *opts.rlt)
    return P


# -- matrix perspective baseline -------------------------------------------------------


def build_mprt(p: LowRankQuadraticProblem) -> ConicProgram:
    """Matrix perspective relaxation: ``[[theta, X^T], [X, Y]] >= 0`` with
    objective ``lam tr(Y) + tr(theta) / (2 gamma) + h(X)``.

    ``h`` (a weighted sum of squares) goes through a second-order cone epigraph.
    """
    split = p.split
    if split is None or not split.gamma > 0:
        raise NotSeparableError("matrix perspective relaxation needs a Frobenius split")
    if p.constraints:
        raise NotSeparableError("constrained problems are not supported by the perspective baseline")
    q, transposed = _canonical(p)
    W, T = (split.weights, split.targets) if not transposed else (split.weights.T, split.targets.T)
    n, m = q.n, q.m
    P = ConicProgram()
    C = P.add_psd_block("coupling", n + m)
    theta, X, Y = C[:m, :m], C[m:, :m], C[m:, m:]
    _add_projection_hull(P, Y, q.k)
    terms = [np.sqrt(W[i, j]) * (X.entry(i, j) - T[i, j])
             for i in range(n) for j in range(m) if W[i, j] > 0]
    h = add_square_epigraph(P, "h", terms) if terms else Lin()
    P.add_objective(q.lam * Y.trace() + (0.5 / split.gamma) * theta.trace() + h + split.offset)
    return _finish(P, "mprt", q, transposed, dict(X=X, Y=Y, theta=theta))


# -- decoding ------------------------------------------------------------------------


def decode(P: ConicProgram, sol: ConicSolution, labels=None) -> RelaxationSolution:
    """Read named matrices back from a solution.

    ``labels`` restricts which lifted views are returned; X and Y are always
    decoded (transposed back for column-oriented problems).
    """
    if sol.status == NUMERICAL_FAILURE:
        raise ValueError("cannot decode a failed solve")
    views = P.meta.get("views", {})
    wanted = list(views) if labels is None else list(labels)
    for name in wanted:
        if name not in views:
            raise ProgramError(f"unknown label {name!r}")
    vals = {name: views[name].value(sol.x) for name in set(wanted) | {"X", "Y"} if name in views}
    X, Y = vals.pop("X"), vals.pop("Y")
    if P.meta.get("transposed"):
        X = X.T
    lifted = {k: v for k, v in vals.items() if k in wanted and k not in ("x",)}
    info = SolverInfo(sol.status, sol.primal_residual, sol.dual_residual, sol.gap_residual,
                      sol.iterations, sol.wall_time)
    return RelaxationSolution(sol.primal_objective + P.constant, X, Y, lifted, info)


def solve_relaxation(P: ConicProgram, settings: SolverSettings | None = None) -> RelaxationSolution:
    return decode(P, solve(P, settings))


# -- reconstruction ----------------------------------------------------------------------


def compact_residuals(p: LowRankQuadraticProblem, X, Y, Wxx) -> dict:
    """Constraint violations of a point for the compact relaxation (row-oriented)."""
    q, transposed = _canonical(p)
    X = np.asarray(X).T if transposed else np.asarray(X)
    n, m = q.n, q.m
    x = vec_t(X)
    arrow = np.block([[np.ones((1, 1)), x[None, :]], [x[:, None], Wxx]])
    S = block_diag_sum(Wxx, num_blocks=n)
    coupling = np.block([[S, X.T], [X, Y]])
    res = {
        "arrow_psd": max(0.0, -eig_sym(arrow)[0][0]),
        "coupling_psd": max(0.0, -eig_sym(coupling)[0][0]),
        "y_upper": max(0.0, eig_sym(Y)[0][-1] - 1.0),
        "trace": max(0.0, float(np.trace(Y)) - q.k),
    }
    for t, c in enumerate(q.constraints):
        res[f"quad{t}"] = max(0.0, float(np.sum(c.Q * Wxx) + np.sum(c.E * X) - c.b))
    return res


def full_lifted_residuals(p: LowRankQuadraticProblem, X, Y, Wxx, Wxy, Wyy) -> dict:
    """Constraint violations of a point for the full lifted relaxation (no cuts)."""
    q, transposed = _canonical(p)
    X = np.asarray(X).T if transposed else np.asarray(X)
    n, m = q.n, q.m
    x, y = vec_t(X), np.asarray(Y).reshape(-1, order="F")
    M = np.block([
        [np.ones((1, 1)), x[None, :], y[None, :]],
        [x[:, None], Wxx, Wxy],
        [y[:, None], Wxy.T, Wyy],
    ])
    w = eig_sym(Y)[0]
    sum_xy = sum(Wxy[i * m:(i + 1) * m, i * n:(i + 1) * n] for i in range(n))
    res = {
        "moment_psd": max(0.0, -eig_sym(M)[0][0]),
        "y_psd": max(0.0, -w[0]),
        "y_upper": max(0.0, w[-1] - 1.0),
        "trace": max(0.0, float(np.trace(Y)) - q.k),
        "wyy_block_trace": float(np.max(np.abs(block_diag_sum(Wyy, num_blocks=n) - Y))),
        "wxy_block_trace": float(np.max(np.abs(sum_xy - X.T))),
        "y_symmetric": float(np.max(np.abs(Y - Y.T))),
    }
    for t, c in enumerate(q.constraints):
        res[f"quad{t}"] = max(0.0, float(np.sum(c.Q * Wxx) + np.sum(c.E * X) - c.b))
    return res


def reconstruct_eliminated(X, Y, Wxx, k: int | None = None, check_tol: float = 1e-4):
    """Rebuild ``(W_xy, W_yy)`` from a compact-relaxation point.

    ``Y`` is replaced by ``X S^+ X^T`` with ``S`` the block trace of ``W_xx``;
    returns ``(Wxy, Wyy, Y_used)``.  Raises :class:`InfeasibleInputError` when
    the input violates the compact constraints by more than ``check_tol``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Wxx = np.asarray(Wxx, dtype=float)
    n, m = X.shape
    if Wxx.shape != (n * m, n * m) or Y.shape != (n, n):
        raise DimensionError("inconsistent shapes for reconstruction")
    k = n if k is None else k
    probe = LowRankQuadraticProblem(n, m, np.zeros((n * m, n * m)), np.zeros((n, m)), k=k)
    bad = {name: v for name, v in compact_residuals(probe, X, Y, Wxx).items() if v > check_tol}
    if bad:
        raise InfeasibleInputError(f"point violates the compact relaxation: {bad}")
    S = block_diag_sum(Wxx, num_blocks=n)
    U = pseudoinverse(S) @ X.T  # m x n
    Y_used = X @ U
    Y_used = 0.5 * (Y_used + Y_used.T)
    IU = np.kron(np.eye(n), U)
    Wxy = Wxx @ IU
    Wyy = IU.T @ Wxx @ IU
    return Wxy, 0.5 * (Wyy + Wyy.T), Y_used
