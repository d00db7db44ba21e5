"""Problem-specific encoders and reduced relaxations: matrix completion,
reduced-rank regression and low-rank basis pursuit."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .conic import ConicProgram, VarRef
from .matrix_core import DimensionError, as_dense
from .problem import COL, ROW, FrobeniusSplit, LowRankQuadraticProblem, ObservedMatrix, masked
from .relaxations import _add_projection_hull, _finish, _upper, build_compact_lifted


# -- matrix completion -------------------------------------------------------------


def _row_hessians(obs: ObservedMatrix, gamma, loss_scale: float) -> list[np.ndarray]:
    n, m = obs.shape
    ridge = 0.0 if gamma is None else 0.5 / gamma
    mask = obs.mask.astype(float)
    return [np.diag(loss_scale * mask[i]) + ridge * np.eye(m) for i in range(n)]


def _check_mc_args(gamma, loss_scale):
    if gamma is not None and not gamma > 0:
        raise ValueError("gamma must be positive when given")
    if loss_scale <= 0:
        raise ValueError("loss scale must be positive")


def encode_matrix_completion(obs: ObservedMatrix, lam: float = 0.0, k: int | None = None,
                             gamma: float | None = None, loss_scale: float = 1.0) -> LowRankQuadraticProblem:
    """Quadratic encoding of ``loss_scale * sum_omega (X - A)^2 + ||X||^2 / (2 gamma)``.

    ``loss_scale=1`` is the plain squared loss; ``0.5`` the halved loss used in
    the regularized benchmarks.
    """
    _check_mc_args(gamma, loss_scale)
    n, m = obs.shape
    PA = masked(obs)
    H = np.zeros((n * m, n * m))
    for i, Hi in enumerate(_row_hessians(obs, gamma, loss_scale)):
        H[i * m:(i + 1) * m, i * m:(i + 1) * m] = Hi
    split = None
    if gamma is not None:
        split = FrobeniusSplit(gamma, loss_scale * obs.mask.astype(float), PA)
    return LowRankQuadraticProblem(
        n, m, H, -2.0 * loss_scale * PA, (), lam, k, loss_scale * float(np.sum(PA * PA)), ROW, split
    )


def encode_separable(gamma: float, weights, targets, lam: float = 0.0, k: int | None = None,
                     offset: float = 0.0) -> LowRankQuadraticProblem:
    """``||X||^2 / (2 gamma) + sum W * (X - T)^2 + offset`` with nonnegative W."""
    W, T = as_dense(weights, "weights"), as_dense(targets, "targets")
    if W.shape != T.shape:
        raise DimensionError("weights and targets must have the same shape")
    if np.any(W < 0) or not gamma > 0:
        raise ValueError("weights must be nonnegative and gamma positive")
    n, m = W.shape
    H = np.diag(W.ravel() + 0.5 / gamma)  # row-stacked vectorization
    return LowRankQuadraticProblem(
        n, m, H, -2.0 * W * T, (), lam, k, float(np.sum(W * T * T)) + offset, ROW,
        FrobeniusSplit(gamma, W, T, offset),
    )


def _mc_objective(P, obs, Xref, blocks_and_hessians, Y, lam, loss_scale):
    PA = masked(obs)
    obj = Xref.inner(-2.0 * loss_scale * PA) + lam * Y.trace() + loss_scale * float(np.sum(PA * PA))
    for S, Hi in blocks_and_hessians:
        obj = obj + S.inner(Hi)
    P.add_objective(obj)


def _stack_rows(rows: list[VarRef]) -> VarRef:
    return VarRef(np.stack([r.cols for r in rows]), np.stack([r.coef for r in rows]))


def build_mc_reduced(obs: ObservedMatrix, lam: float = 0.0, k: int | None = None,
                     gamma: float | None = None, loss_scale: float = 1.0) -> ConicProgram:
    """Row-wise relaxation: one ``(m+1)`` arrow block per row plus the coupling block."""
    _check_mc_args(gamma, loss_scale)
    n, m = obs.shape
    k = n if k is None else k
    P = ConicProgram()
    arrows = [P.add_psd_block(f"S{i}", 1 + m) for i in range(n)]
    X = _stack_rows([a[0, 1:] for a in arrows])
    C = P.add_psd_block("coupling", n + m)
    Y = C[m:, m:]
    for a in arrows:
        P.add_equality(a.entry(0, 0), 1.0)
    P.add_equalities([(a[1:, 1:], 1.0) for a in arrows] + [(C[:m, :m], -1.0)], 0.0, where=_upper(m))
    P.add_equalities([(C[m:, :m], 1.0), (X, -1.0)], 0.0)
    _add_projection_hull(P, Y, k)
    hess = _row_hessians(obs, gamma, loss_scale)
    _mc_objective(P, obs, X, [(a[1:, 1:], hess[i]) for i, a in enumerate(arrows)], Y, lam, loss_scale)
    views = dict(X=X, Y=Y)
    views.update({f"S{i}": a[1:, 1:] for i, a in enumerate(arrows)})
    P.meta.update(kind="mc-reduced", n=n, m=m, k=k, transposed=False, views=views)
    return P


@dataclass(frozen=True)
class MaskGroup:
    pattern: tuple  # observed column indices
    rows: tuple


def group_masks(obs: ObservedMatrix) -> list[MaskGroup]:
    """Partition rows by identical observed-column sets (first occurrence order)."""
    groups: dict[tuple, list[int]] = {}
    for i, row in enumerate(obs.mask):
        groups.setdefault(tuple(np.nonzero(row)[0]), []).append(i)
    return [MaskGroup(pat, tuple(rows)) for pat, rows in groups.items()]


def build_mc_grouped(obs: ObservedMatrix, lam: float = 0.0, k: int | None = None,
                     gamma: float | None = None, loss_scale: float = 1.0) -> ConicProgram:
    """One aggregated block ``[[I, Z^T], [Z, S_g]]`` per mask group, ``Z`` the
    group's rows of X as columns."""
    _check_mc_args(gamma, loss_scale)
    n, m = obs.shape
    k = n if k is None else k
    groups = group_masks(obs)
    P = ConicProgram()
    blocks = []
    rows: dict[int, VarRef] = {}
    for g, grp in enumerate(groups):
        t = len(grp.rows)
        B = P.add_psd_block(f"G{g}", t + m)
        P.add_equalities([(B[:t, :t], 1.0)], np.eye(t), where=_upper(t))
        for a, i in enumerate(grp.rows):
            rows[i] = B[t:, a]
        blocks.append((B[t:, t:], grp))
    X = _stack_rows([rows[i] for i in range(n)])
    C = P.add_psd_block("coupling", n + m)
    Y = C[m:, m:]
    P.add_equalities([(S, 1.0) for S, _ in blocks] + [(C[:m, :m], -1.0)], 0.0, where=_upper(m))
    P.add_equalities([(C[m:, :m], 1.0), (X, -1.0)], 0.0)
    _add_projection_hull(P, Y, k)
    hess = _row_hessians(obs, gamma, loss_scale)
    _mc_objective(P, obs, X, [(S, hess[grp.rows[0]]) for S, grp in blocks], Y, lam, loss_scale)
    views = dict(X=X, Y=Y)
    views.update({f"G{g}": S for g, (S, _) in enumerate(blocks)})
    P.meta.update(kind="mc-grouped", n=n, m=m, k=k, transposed=False, views=views, groups=groups)
    return P


def coarsen_masks(obs: ObservedMatrix, row_pairs) -> ObservedMatrix:
    """Keep, for each paired rows, only the columns observed in both."""
    n, _ = obs.shape
    mask = obs.mask.copy()
    for i, j in row_pairs:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"invalid row pair {(i, j)}")
        common = mask[i] & mask[j]
        mask[i] = common
        mask[j] = common
    return ObservedMatrix.from_mask(obs.A, mask)


def build_mc_compact(obs: ObservedMatrix, lam: float = 0.0, k: int | None = None,
                     gamma: float | None = None, loss_scale: float = 1.0) -> ConicProgram:
    return build_compact_lifted(encode_matrix_completion(obs, lam, k, gamma, loss_scale))


# -- reduced-rank regression ---------------------------------------------------------


@dataclass(frozen=True)
class RRRInstance:
    """Predictors ``A`` (n x p), responses ``B`` (n x m), rank penalty ``mu``."""

    A: np.ndarray
    B: np.ndarray
    mu: float

    def __post_init__(self):
        A, B = as_dense(self.A, "A"), as_dense(self.B, "B")
        if A.shape[0] != B.shape[0]:
            raise DimensionError("A and B need the same number of rows")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def loss(self, X) -> float:
        return float(np.sum((self.B - self.A @ X) ** 2))


def encode_rrr(inst: RRRInstance) -> LowRankQuadraticProblem:
    """``||B - A X||^2 + mu rank(X)`` over ``X`` (p x m), quadratic in ``vec(X)``."""
    p, m = inst.p, inst.m
    G = inst.A.T @ inst.A
    H = np.kron(np.eye(m), G)
    D = -2.0 * inst.A.T @ inst.B
    return LowRankQuadraticProblem(p, m, H, D, (), inst.mu, m, float(np.sum(inst.B ** 2)), COL)


def build_rrr_lifted(inst: RRRInstance) -> ConicProgram:
    """Lifted relaxation over ``vec(X)``; block traces live in ``S^p``."""
    return build_compact_lifted(encode_rrr(inst))


def build_rrr_compact(inst: RRRInstance) -> ConicProgram:
    """``[[theta, X], [X^T, Y]] >= 0`` with objective ``<A^T A, theta> - 2<AX, B> + ...``."""
    p, m = inst.p, inst.m
    P = ConicProgram()
    C = P.add_psd_block("coupling", p + m)
    theta, X, Y = C[:p, :p], C[:p, p:], C[p:, p:]
    _add_projection_hull(P, Y, m)
    P.add_objective(theta.inner(inst.A.T @ inst.A) + X.inner(-2.0 * inst.A.T @ inst.B)
                    + inst.mu * Y.trace() + float(np.sum(inst.B ** 2)))
    P.meta.update(kind="rrr-compact", n=p, m=m, k=m, transposed=False, views=dict(X=X, Y=Y, theta=theta))
    return P


# -- basis pursuit ---------------------------------------------------------------------

ALL, SAME_ROW = "all", "same_row"


def _parse_mode(mode):
    if isinstance(mode, str):
        if mode not in (ALL, SAME_ROW):
            raise ValueError(f"unknown RLT mode {mode!r}")
        return mode, None, None
    name, count, seed = mode
    if name != "subsample":
        raise ValueError(f"unknown RLT mode {mode!r}")
    return name, int(count), int(seed)


def rlt_pairs(obs: ObservedMatrix, mode, same_row_only: bool = False) -> list[tuple]:
    """Unordered pairs of observed entries (diagonal pairs included) for RLT rows.

    ``mode`` is ``"all"``, ``"same_row"`` or ``("subsample", count, seed)``;
    subsampling draws uniformly without replacement from the eligible pairs.
    """
    name, count, seed = _parse_mode(mode)
    om = list(obs.omega)
    pairs = [(a, b) for a, b in itertools.combinations_with_replacement(om, 2)
             if not (same_row_only or name == SAME_ROW) or a[0] == b[0]]
    if name == "subsample" and count < len(pairs):
        rng = np.random.Generator(np.random.Philox(seed))
        pick = np.sort(rng.choice(len(pairs), size=count, replace=False))
        pairs = [pairs[t] for t in pick]
    return pairs


def _bp_common(P, obs, X, Y):
    n, m = obs.shape
    for i, j in obs.omega:
        P.add_equality(X.entry(i, j), obs.A[i, j])
    _add_projection_hull(P, Y, n)
    P.add_objective(Y.trace())


def build_bp_full(obs: ObservedMatrix, rlt_mode=ALL) -> ConicProgram:
    """Lifted basis-pursuit relaxation with RLT equalities over observed pairs."""
    n, m = obs.shape
    nm = n * m
    P = ConicProgram()
    Ar = P.add_psd_block("arrow", 1 + nm)
    x = Ar[0, 1:]
    X = x.reshape(n, m)
    W = Ar[1:, 1:]
    C = P.add_psd_block("coupling", n + m)
    Y = C[m:, m:]
    P.add_equality(Ar.entry(0, 0), 1.0)
    P.add_equalities([(W.block(i, i, m), 1.0) for i in range(n)] + [(C[:m, :m], -1.0)], 0.0, where=_upper(m))
    P.add_equalities([(C[m:, :m], 1.0), (X, -1.0)], 0.0)
    _bp_common(P, obs, X, Y)
    A = obs.A
    for (i, j), (k, l) in rlt_pairs(obs, rlt_mode):
        expr = W.entry(i * m + j, k * m + l) - A[k, l] * X.entry(i, j) - A[i, j] * X.entry(k, l)
        P.add_equality(expr, -A[i, j] * A[k, l])
    P.meta.update(kind="bp-full", n=n, m=m, k=n, transposed=False, views=dict(X=X, Y=Y, Wxx=W, x=x))
    return P


def build_bp_reduced(obs: ObservedMatrix, rlt_mode=SAME_ROW) -> ConicProgram:
    """Row-wise basis-pursuit relaxation; RLT rows only pair entries of one row."""
    n, m = obs.shape
    P = ConicProgram()
    arrows = [P.add_psd_block(f"S{i}", 1 + m) for i in range(n)]
    X = _stack_rows([a[0, 1:] for a in arrows])
    C = P.add_psd_block("coupling", n + m)
    Y = C[m:, m:]
    for a in arrows:
        P.add_equality(a.entry(0, 0), 1.0)
    P.add_equalities([(a[1:, 1:], 1.0) for a in arrows] + [(C[:m, :m], -1.0)], 0.0, where=_upper(m))
    P.add_equalities([(C[m:, :m], 1.0), (X, -1.0)], 0.0)
    _bp_common(P, obs, X, Y)
    A = obs.A
    for (i, j), (k, l) in rlt_pairs(obs, rlt_mode, same_row_only=True):
        S = arrows[i][1:, 1:]
        expr = S.entry(j, l) - A[k, l] * X.entry(i, j) - A[i, j] * X.entry(k, l)
        P.add_equality(expr, -A[i, j] * A[k, l])
    views = dict(X=X, Y=Y)
    views.update({f"S{i}": a[1:, 1:] for i, a in enumerate(arrows)})
    P.meta.update(kind="bp-reduced", n=n, m=m, k=n, transposed=False, views=views)
    return P
