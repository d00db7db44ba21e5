"""Solver-independent conic programs.

A :class:`ConicProgram` is assembled block by block (free, nonnegative,
second-order and PSD cones) together with linear equality rows, and is frozen
into the standard form

    minimize c^T x  subject to  A x = b,  x in K

that :mod:`lowrank_sdp.solver` consumes.  PSD blocks are stored with the
scaled half-vectorization :func:`svec`, so ``<M, N> = svec(M) @ svec(N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

SQRT2 = math.sqrt(2.0)

FREE, NONNEG, SOC, PSD = "free", "nonneg", "soc", "psd"


class ProgramError(ValueError):
    pass


class UnsupportedConeError(ProgramError):
    pass


# -- svec / smat --------------------------------------------------------------


@lru_cache(maxsize=None)
def _tri(side: int):
    iu = np.triu_indices(side)
    scale = np.where(iu[0] == iu[1], 1.0, SQRT2)
    # position of (i, j) inside svec, for both triangles
    pos = np.empty((side, side), dtype=np.int64)
    pos[iu] = np.arange(iu[0].size)
    pos[(iu[1], iu[0])] = np.arange(iu[0].size)
    for arr in (*iu, scale, pos):
        arr.setflags(write=False)
    return iu, scale, pos


def tri_count(side: int) -> int:
    return side * (side + 1) // 2


def side_from_count(count: int) -> int:
    side = int(round((math.sqrt(8 * count + 1) - 1) / 2))
    if tri_count(side) != count:
        raise ProgramError(f"{count} is not a triangular number")
    return side


def svec(M) -> np.ndarray:
    """Upper triangle, row by row, with off-diagonal entries scaled by sqrt(2)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ProgramError(f"svec needs a square matrix, got {M.shape}")
    iu, scale, _ = _tri(M.shape[0])
    return M[iu] * scale


def smat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    side = side_from_count(v.size)
    iu, scale, _ = _tri(side)
    M = np.zeros((side, side))
    M[iu] = v / scale
    return M + np.triu(M, 1).T


def smat_batch(V: np.ndarray, side: int) -> np.ndarray:
    iu, scale, _ = _tri(side)
    M = np.zeros((V.shape[0], side, side))
    M[:, iu[0], iu[1]] = V / scale
    M[:, iu[1], iu[0]] = V / scale
    return M


def svec_batch(M: np.ndarray) -> np.ndarray:
    iu, scale, _ = _tri(M.shape[-1])
    return M[:, iu[0], iu[1]] * scale


# -- variable views and linear expressions -------------------------------------


@dataclass(frozen=True)
class VarRef:
    """A matrix-shaped view onto program variables.

    Every entry maps to exactly one scalar variable: ``value = coef * x[col]``.
    Symmetric PSD entries share a column between (i, j) and (j, i).
    """

    cols: np.ndarray
    coef: np.ndarray

    @property
    def shape(self):
        return self.cols.shape

    def __getitem__(self, key) -> "VarRef":
        return VarRef(np.asarray(self.cols[key]), np.asarray(self.coef[key]))

    @property
    def T(self) -> "VarRef":
        return VarRef(self.cols.T, self.coef.T)

    def reshape(self, *shape, order="C") -> "VarRef":
        return VarRef(self.cols.reshape(*shape, order=order), self.coef.reshape(*shape, order=order))

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.coef * x[self.cols]

    def entry(self, *idx) -> "Lin":
        return Lin([self.cols[idx]], [self.coef[idx]])

    def inner(self, C) -> "Lin":
        """``<C, self>`` as a linear expression (C broadcast to the view's shape)."""
        C = np.broadcast_to(np.asarray(C, dtype=float), self.shape)
        return Lin(self.cols.ravel(), (C * self.coef).ravel())

    def trace(self) -> "Lin":
        d = np.arange(self.shape[0])
        return Lin(self.cols[d, d], self.coef[d, d])

    def block(self, i: int, j: int, h: int, w: int | None = None) -> "VarRef":
        w = h if w is None else w
        return self[i * h:(i + 1) * h, j * w:(j + 1) * w]


class Lin:
    """Sparse affine expression ``sum vals * x[cols] + const``."""

    __slots__ = ("cols", "vals", "const")

    def __init__(self, cols=(), vals=(), const: float = 0.0):
        self.cols = np.asarray(cols, dtype=np.int64).ravel()
        self.vals = np.asarray(vals, dtype=float).ravel()
        self.const = float(const)

    def __add__(self, other):
        if isinstance(other, Lin):
            return Lin(np.concatenate([self.cols, other.cols]),
                       np.concatenate([self.vals, other.vals]), self.const + other.const)
        return Lin(self.cols, self.vals, self.const + float(other))

    __radd__ = __add__

    def __neg__(self):
        return Lin(self.cols, -self.vals, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, a):
        return Lin(self.cols, self.vals * float(a), self.const * float(a))

    __rmul__ = __mul__

    def value(self, x) -> float:
        return float(self.vals @ x[self.cols] + self.const) if self.cols.size else self.const


def lin_sum(exprs) -> Lin:
    exprs = list(exprs)
    if not exprs:
        return Lin()
    return Lin(np.concatenate([e.cols for e in exprs]),
               np.concatenate([e.vals for e in exprs]), sum(e.const for e in exprs))


# -- program -------------------------------------------------------------------


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    size: int
    offset: int
    label: str

    @property
    def dim(self) -> int:
        return tri_count(self.size) if self.kind == PSD else self.size


@dataclass
class StandardForm:
    """``min c^T x  s.t.  A x = b,  x in K`` with K given by ``cones``."""

    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    cones: list  # list of (kind, size)

    @property
    def num_vars(self) -> int:
        return self.A.shape[1]


class ConicProgram:
    def __init__(self):
        self.blocks: list[ConeBlock] = []
        self.labels: dict[str, VarRef] = {}
        self.block_of: dict[str, ConeBlock] = {}
        self._nvars = 0
        self._rows_i: list[np.ndarray] = []
        self._rows_j: list[np.ndarray] = []
        self._rows_v: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self._nrows = 0
        self._obj_cols: list[np.ndarray] = []
        self._obj_vals: list[np.ndarray] = []
        self.constant = 0.0
        self.meta: dict = {}
        self._frozen: StandardForm | None = None
        self._slack_count = 0

    # blocks
    def _add_block(self, kind: str, size: int, label: str) -> ConeBlock:
        if label in self.labels:
            raise ProgramError(f"duplicate label {label!r}")
        if size < 1:
            raise ProgramError("cone blocks need positive size")
        blk = ConeBlock(kind, int(size), self._nvars, label)
        self.blocks.append(blk)
        self.block_of[label] = blk
        self._nvars += blk.dim
        self._frozen = None
        return blk

    def add_free(self, label: str, shape) -> VarRef:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        blk = self._add_block(FREE, int(np.prod(shape)), label)
        ref = VarRef(blk.offset + np.arange(blk.size).reshape(shape), np.ones(shape))
        self.labels[label] = ref
        return ref

    def add_nonneg(self, label: str, shape) -> VarRef:
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        blk = self._add_block(NONNEG, int(np.prod(shape)), label)
        ref = VarRef(blk.offset + np.arange(blk.size).reshape(shape), np.ones(shape))
        self.labels[label] = ref
        return ref

    def add_soc(self, label: str, length: int) -> VarRef:
        blk = self._add_block(SOC, length, label)
        ref = VarRef(blk.offset + np.arange(length), np.ones(length))
        self.labels[label] = ref
        return ref

    def add_psd_block(self, label: str, side: int) -> VarRef:
        blk = self._add_block(PSD, side, label)
        _, scale, pos = _tri(side)
        ref = VarRef(blk.offset + pos, 1.0 / scale[pos])
        self.labels[label] = ref
        return ref

    def var(self, label: str) -> VarRef:
        try:
            return self.labels[label]
        except KeyError:
            raise ProgramError(f"unknown label {label!r}") from None

    def has(self, label: str) -> bool:
        return label in self.labels

    @property
    def num_vars(self) -> int:
        return self._nvars

    @property
    def num_rows(self) -> int:
        return self._nrows

    # rows
    def _check_cols(self, cols):
        if cols.size and (cols.min() < 0 or cols.max() >= self._nvars):
            raise ProgramError("row references an unknown variable")

    def add_equality(self, row: Lin, rhs: float = 0.0) -> int:
        """Append ``row == rhs`` (the row's constant moves to the right side)."""
        self._check_cols(row.cols)
        r = self._nrows
        self._rows_i.append(np.full(row.cols.size, r, dtype=np.int64))
        self._rows_j.append(row.cols)
        self._rows_v.append(row.vals)
        self._rhs.append(np.array([float(rhs) - row.const]))
        self._nrows += 1
        self._frozen = None
        return r

    def add_inequality(self, row: Lin, rhs: float = 0.0) -> int:
        """Append ``row <= rhs`` through a fresh nonnegative slack."""
        slack = self.add_nonneg(f"_slack{self._slack_count}", 1)
        self._slack_count += 1
        return self.add_equality(row + slack.entry(0), rhs)

    def add_equalities(self, terms, rhs, where=None) -> None:
        """Elementwise ``sum_t weight_t * ref_t == rhs`` over all positions
        (or those selected by the boolean array ``where``).

        ``terms`` is a list of ``(VarRef, weight)`` with equal shapes.
        """
        shape = terms[0][0].shape
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), shape)
        sel = np.ones(shape, dtype=bool) if where is None else np.asarray(where, dtype=bool)
        count = int(sel.sum())
        if count == 0:
            return
        rows = self._nrows + np.arange(count)
        for ref, w in terms:
            if ref.shape != shape:
                raise ProgramError(f"shape mismatch {ref.shape} vs {shape}")
            w = np.broadcast_to(np.asarray(w, dtype=float), shape)
            cols = ref.cols[sel]
            self._check_cols(cols)
            self._rows_i.append(rows)
            self._rows_j.append(cols)
            self._rows_v.append((w * ref.coef)[sel])
        self._rhs.append(rhs[sel].astype(float))
        self._nrows += count
        self._frozen = None

    # objective
    def add_objective(self, expr: Lin) -> None:
        self._check_cols(expr.cols)
        self._obj_cols.append(expr.cols)
        self._obj_vals.append(expr.vals)
        self.constant += expr.const
        self._frozen = None

    def set_objective_term(self, label: str, coefficient) -> None:
        """Add ``<coefficient, var(label)>`` to the objective."""
        self.add_objective(self.var(label).inner(coefficient))

    # assembly
    def standard_form(self) -> StandardForm:
        if self._frozen is None:
            n = self._nvars
            if self._rows_i:
                i = np.concatenate(self._rows_i)
                j = np.concatenate(self._rows_j)
                v = np.concatenate(self._rows_v)
                A = sp.csr_matrix((v, (i, j)), shape=(self._nrows, n))
                A.sum_duplicates()
                A.eliminate_zeros()
                b = np.concatenate(self._rhs)
            else:
                A = sp.csr_matrix((0, n))
                b = np.zeros(0)
            c = np.zeros(n)
            if self._obj_cols:
                np.add.at(c, np.concatenate(self._obj_cols), np.concatenate(self._obj_vals))
            cones = [(blk.kind, blk.size) for blk in self.blocks]
            self._frozen = StandardForm(A, b, c, cones)
        return self._frozen

    def objective_value(self, x) -> float:
        sf = self.standard_form()
        return float(sf.c @ x + self.constant)


def cone_dim(kind: str, size: int) -> int:
    return tri_count(size) if kind == PSD else size


def cone_offsets(cones) -> np.ndarray:
    return np.concatenate([[0], np.cumsum([cone_dim(k, s) for k, s in cones])]).astype(np.int64)


def add_square_epigraph(p: ConicProgram, label: str, terms: list[Lin]) -> Lin:
    """Return an expression ``t`` constrained by ``t >= sum_j terms_j^2``.

    Uses the rotated form ``(t + 1, t - 1, 2 v) in SOC``; with ``u0 - u1 = 2``
    the epigraph variable is ``t = (u0 + u1) / 2``.
    """
    u = p.add_soc(label, 2 + len(terms))
    p.add_equality(u.entry(0) - u.entry(1), 2.0)
    for j, v in enumerate(terms):
        p.add_equality(u.entry(2 + j) - 2.0 * v, 0.0)
    return 0.5 * (u.entry(0) + u.entry(1))


# -- SDPA sparse format ----------------------------------------------------------


def lower_soc(sf: StandardForm) -> StandardForm:
    """Rewrite every second-order cone ``(t, u)`` as the arrow PSD block
    ``[[t, u^T], [u, t I]]``."""
    if not any(k == SOC for k, _ in sf.cones):
        return sf
    offs = cone_offsets(sf.cones)
    new_cones = []
    col_map_rows, col_map_cols, col_map_vals = [], [], []
    extra_rows = []  # list of dict col->val in new numbering
    new_off = 0
    for (kind, size), off in zip(sf.cones, offs[:-1]):
        if kind != SOC:
            d = cone_dim(kind, size)
            col_map_rows.extend(range(off, off + d))
            col_map_cols.extend(range(new_off, new_off + d))
            col_map_vals.extend([1.0] * d)
            new_cones.append((kind, size))
            new_off += d
            continue
        _, scale, pos = _tri(size)
        col_map_rows.append(off)
        col_map_cols.append(new_off + pos[0, 0])
        col_map_vals.append(1.0)
        for a in range(1, size):
            col_map_rows.append(off + a)
            col_map_cols.append(new_off + pos[0, a])
            col_map_vals.append(1.0 / SQRT2)
        for a in range(1, size):
            extra_rows.append({new_off + pos[a, a]: 1.0, new_off + pos[0, 0]: -1.0})
            for bb in range(a + 1, size):
                extra_rows.append({new_off + pos[a, bb]: 1.0})
        new_cones.append((PSD, size))
        new_off += tri_count(size)
    T = sp.csr_matrix((col_map_vals, (col_map_rows, col_map_cols)), shape=(sf.num_vars, new_off))
    A = sf.A @ T
    ei, ej, ev = [], [], []
    for r, row in enumerate(extra_rows):
        for j, v in row.items():
            ei.append(r)
            ej.append(j)
            ev.append(v)
    E = sp.csr_matrix((ev, (ei, ej)), shape=(len(extra_rows), new_off))
    A = sp.vstack([A, E]).tocsr()
    b = np.concatenate([sf.b, np.zeros(len(extra_rows))])
    c = T.T @ sf.c
    return StandardForm(A, b, np.asarray(c).ravel(), new_cones)


def _split_free(sf: StandardForm) -> StandardForm:
    if not any(k == FREE for k, _ in sf.cones):
        return sf
    offs = cone_offsets(sf.cones)
    blocks, cones = [], []
    for (kind, size), off in zip(sf.cones, offs[:-1]):
        d = cone_dim(kind, size)
        I = sp.identity(sf.num_vars, format="csc")[:, off:off + d]
        if kind == FREE:
            blocks.append(sp.hstack([I, -I]))
            cones.append((NONNEG, 2 * size))
        else:
            blocks.append(I)
            cones.append((kind, size))
    T = sp.hstack(blocks).tocsr()
    return StandardForm((sf.A @ T).tocsr(), sf.b.copy(), np.asarray(T.T @ sf.c).ravel(), cones)


def _entries_for_vector(vals: np.ndarray, cones, offs):
    """Yield (block, i, j, value) in SDPA convention for one linear functional."""
    out = []
    for blk, ((kind, size), off) in enumerate(zip(cones, offs[:-1]), start=1):
        seg = vals[off:off + cone_dim(kind, size)]
        nz = np.nonzero(seg)[0]
        if kind == NONNEG:
            out.extend((blk, int(t) + 1, int(t) + 1, float(seg[t])) for t in nz)
        else:
            iu, scale, _ = _tri(size)
            for t in nz:
                i, j = int(iu[0][t]), int(iu[1][t])
                out.append((blk, i + 1, j + 1, float(seg[t] / scale[t])))
    return out


def export_sdpa(program, lower: bool = False) -> str:
    """Serialize to SDPA sparse format (``.dat-s``).

    The standard-form program ``min c^T x, A x = b, x in K`` is written as the
    SDPA dual side: each equality row becomes a constraint matrix ``F_r`` with
    ``<F_r, X> = b_r`` and ``F_0 = -C``, so SDPA's maximized objective is the
    negated minimum here.  Free variables are split into nonnegative pairs.
    Second-order cones must be lowered first (``lower=True`` does it).
    """
    sf = program.standard_form() if isinstance(program, ConicProgram) else program
    if any(k == SOC for k, _ in sf.cones):
        if not lower:
            raise UnsupportedConeError("second-order cones must be lowered before SDPA export")
        sf = lower_soc(sf)
    sf = _split_free(sf)
    offs = cone_offsets(sf.cones)
    struct = [(-size if kind == NONNEG else size) for kind, size in sf.cones]
    lines = [
        f"{sf.A.shape[0]}",
        f"{len(sf.cones)}",
        " ".join(str(s) for s in struct),
        " ".join(f"{v:.17g}" for v in sf.b) if sf.b.size else "",
    ]
    for blk, i, j, v in _entries_for_vector(-sf.c, sf.cones, offs):
        lines.append(f"0 {blk} {i} {j} {v:.17g}")
    A = sf.A.tocsr()
    for r in range(A.shape[0]):
        row = np.zeros(sf.num_vars)
        sl = slice(A.indptr[r], A.indptr[r + 1])
        row[A.indices[sl]] = A.data[sl]
        for blk, i, j, v in _entries_for_vector(row, sf.cones, offs):
            lines.append(f"{r + 1} {blk} {i} {j} {v:.17g}")
    return "\n".join(lines) + "\n"


def import_sdpa(text: str) -> StandardForm:
    """Parse SDPA sparse text back into standard form (nonneg/psd cones only)."""
    toks = []
    for ln in text.splitlines():
        ln = ln.split("*")[0].split('"')[0].strip()
        if ln:
            toks.append(ln.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " "))
    mdim = int(toks[0].split()[0])
    nblock = int(toks[1].split()[0])
    struct = [int(t) for t in toks[2].split()[:nblock]]
    cones = [(NONNEG, -s) if s < 0 else (PSD, s) for s in struct]
    offs = cone_offsets(cones)
    rest = toks[3:]
    if mdim:
        b = np.array([float(t) for t in rest[0].split()[:mdim]])
        body = rest[1:]
    else:
        b, body = np.zeros(0), rest
    nvar = int(offs[-1])
    c = np.zeros(nvar)
    ri, rj, rv = [], [], []
    for ln in body:
        parts = ln.split()
        k, blk, i, j, v = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])
        kind, size = cones[blk - 1]
        if kind == NONNEG:
            if i != j:
                raise ProgramError("off-diagonal entry in a diagonal block")
            col, val = offs[blk - 1] + i - 1, v
        else:
            a, bb = min(i, j) - 1, max(i, j) - 1
            _, scale, pos = _tri(size)
            col, val = offs[blk - 1] + pos[a, bb], v * scale[pos[a, bb]]
        if k == 0:
            c[col] -= val
        else:
            ri.append(k - 1)
            rj.append(col)
            rv.append(val)
    A = sp.csr_matrix((rv, (ri, rj)), shape=(mdim, nvar))
    A.sum_duplicates()
    return StandardForm(A, b, c, cones)
