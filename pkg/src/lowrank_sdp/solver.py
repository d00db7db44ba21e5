"""First-order conic solver for standard-form programs.

Alternating direction augmented Lagrangian on the dual
(``max b^T y  s.t.  A^T y + s = c,  s in K*``):

    y  <- argmin over the affine part (normal equations, factorized once)
    s  <- projection of ``V = c - A^T y - mu x`` onto K*
    x  <- (s - V) / mu = projection of ``-V`` onto K, divided by mu

The sweep is a fixed-point map on V alone, which is accelerated with
type-II Anderson mixing.  The penalty mu tracks ``||s|| / ||x||``.

so every primal iterate lies exactly in the cone and the residuals measure
only the affine mismatch.  Rows of A are equilibrated and b, c normalized
before iterating; all reported quantities are in the original units.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .conic import FREE, NONNEG, PSD, SOC, ConicProgram, StandardForm, _tri, cone_dim, cone_offsets

OPTIMAL = "optimal"
MAX_ITERATIONS = "maxIterations"
NUMERICAL_FAILURE = "numericalFailure"


@dataclass(frozen=True)
class SolverSettings:
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    eps_gap: float = 1e-6
    max_iterations: int = 100_000
    penalty: float = 1.0
    adaptive_penalty: bool = True
    check_interval: int = 25
    anderson_memory: int = 10
    adapt_interval: int = 25
    verbose: bool = False
    log_stream: object = None

    def __post_init__(self):
        if min(self.eps_primal, self.eps_dual, self.eps_gap) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1 or self.check_interval < 1:
            raise ValueError("iteration counts must be positive")
        if self.anderson_memory < 0 or self.adapt_interval < 1:
            raise ValueError("anderson_memory must be nonnegative and adapt_interval positive")
        if self.penalty <= 0:
            raise ValueError("penalty parameter must be positive")


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap_residual: float
    status: str
    iterations: int
    wall_time: float


def residuals(sf: StandardForm, x, y, s) -> tuple[float, float, float]:
    """Relative primal, dual and gap residuals of a primal-dual triple."""
    rp = np.linalg.norm(sf.A @ x - sf.b) / (1.0 + np.linalg.norm(sf.b))
    rd = np.linalg.norm(sf.A.T @ y + s - sf.c) / (1.0 + np.linalg.norm(sf.c))
    pobj, dobj = float(sf.c @ x), float(sf.b @ y)
    rg = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return float(rp), float(rd), float(rg)


class _ConeProjector:
    """Per-block projections; PSD blocks of equal side are projected in one batch."""

    def __init__(self, cones):
        offs = cone_offsets(cones)
        self.free = []
        self.nonneg = []
        self.soc = []
        psd_by_side: dict[int, list[int]] = {}
        for (kind, size), off in zip(cones, offs[:-1]):
            d = cone_dim(kind, size)
            if kind == FREE:
                self.free.append(np.arange(off, off + d))
            elif kind == NONNEG:
                self.nonneg.append(np.arange(off, off + d))
            elif kind == SOC:
                self.soc.append((off, size))
            elif kind == PSD:
                psd_by_side.setdefault(size, []).append(off)
            else:
                raise ValueError(f"unknown cone {kind!r}")
        self.free = np.concatenate(self.free) if self.free else np.zeros(0, dtype=np.int64)
        self.nonneg = np.concatenate(self.nonneg) if self.nonneg else np.zeros(0, dtype=np.int64)
        self.psd = []
        for side, starts in sorted(psd_by_side.items()):
            iu, scale, _ = _tri(side)
            idx = np.asarray(starts)[:, None] + np.arange(iu[0].size)[None, :]
            self.psd.append((side, idx, iu, scale))

    def project(self, v: np.ndarray, dual: bool) -> np.ndarray:
        """Project onto K (``dual=False``) or K* (``dual=True``)."""
        out = v.copy()
        if self.free.size:
            out[self.free] = 0.0 if dual else v[self.free]
        if self.nonneg.size:
            out[self.nonneg] = np.maximum(v[self.nonneg], 0.0)
        for off, size in self.soc:
            out[off:off + size] = project_soc(v[off:off + size])
        for side, idx, iu, scale in self.psd:
            V = v[idx] / scale
            M = np.zeros((idx.shape[0], side, side))
            M[:, iu[0], iu[1]] = V
            M[:, iu[1], iu[0]] = V
            w, Q = np.linalg.eigh(M)
            np.maximum(w, 0.0, out=w)
            P = (Q * w[:, None, :]) @ Q.transpose(0, 2, 1)
            out[idx] = P[:, iu[0], iu[1]] * scale
        return out


def project_soc(v: np.ndarray) -> np.ndarray:
    t, u = v[0], v[1:]
    nu = np.linalg.norm(u)
    if nu <= t:
        return v.copy()
    if nu <= -t:
        return np.zeros_like(v)
    a = 0.5 * (t + nu)
    return np.concatenate([[a], (a / nu) * u])


class _NormalSolver:
    """Solves ``(A A^T) z = r``: sparse LU when A has full row rank, an
    eigen-pseudoinverse otherwise."""

    def __init__(self, A: sp.csr_matrix):
        M = sp.csc_matrix(A @ A.T)
        self.kind = "lu"
        try:
            self.factor = spla.splu(M, permc_spec="MMD_AT_PLUS_A", options=dict(SymmetricMode=True))
            d = np.abs(self.factor.U.diagonal())
            if d.size and d.min() < 1e-10 * d.max():
                raise RuntimeError("near singular")
        except RuntimeError:
            w, Q = np.linalg.eigh(M.toarray())
            cut = 1e-10 * max(w.max(initial=0.0), 1.0)
            inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
            self.kind = "pinv"
            self.factor = (Q, inv)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        if self.kind == "lu":
            return self.factor.solve(r)
        Q, inv = self.factor
        return Q @ (inv * (Q.T @ r))


def solve(program, settings: SolverSettings | None = None) -> ConicSolution:
    """Solve a :class:`ConicProgram` (or its standard form)."""
    settings = settings or SolverSettings()
    sf = program.standard_form() if isinstance(program, ConicProgram) else program
    t0 = time.perf_counter()
    A, b, c = sf.A.tocsr(), sf.b.astype(float), sf.c.astype(float)
    nrows, nvars = A.shape
    proj = _ConeProjector(sf.cones)

    # equilibrate rows, normalize b and c
    rn = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    rn[rn == 0] = 1.0
    Dr = sp.diags(1.0 / rn)
    As = (Dr @ A).tocsr()
    AsT = As.T.tocsr()
    bs0 = b / rn
    sb = max(1.0, np.linalg.norm(bs0))
    sc = max(1.0, np.linalg.norm(c))
    bs, cs = bs0 / sb, c / sc
    Acs = As @ cs

    try:
        normal = _NormalSolver(As) if nrows else None
    except Exception:  # pragma: no cover - defensive
        return _failure(sf, nvars, nrows, t0)

    mu = settings.penalty

    def step(V):
        # one sweep of the splitting, written as a map on V = s - mu x
        s = proj.project(V, dual=True)
        mux = s - V  # Moreau: projection of -V onto K
        if nrows:
            y = -normal(As @ (mux + s) - mu * bs - Acs)
            Aty = AsT @ y
        else:
            y, Aty = np.zeros(0), np.zeros(nvars)
        return cs - Aty - mux, mux / mu, s, y

    V = np.zeros(nvars)
    mem = settings.anderson_memory
    dG: list[np.ndarray] = []
    dF: list[np.ndarray] = []
    g_prev = f_prev = None
    f_ref = np.inf
    best = None
    log = settings.log_stream or sys.stderr
    if settings.verbose:
        print("iteration,primal_res,dual_res,gap,objective,penalty", file=log)

    it = 0
    last_adapt = 0
    status = MAX_ITERATIONS
    for it in range(1, settings.max_iterations + 1):
        gV, x, s, y = step(V)
        f = gV - V
        nf = float(np.linalg.norm(f))
        if not np.isfinite(nf):
            return _failure(sf, nvars, nrows, t0, it)
        if mem:
            if nf > 1e3 * f_ref:
                # acceleration went astray: restart the history
                dG.clear()
                dF.clear()
                g_prev = None
                f_ref = nf
            f_ref = min(f_ref, nf)
            if g_prev is not None:
                dG.append(gV - g_prev)
                dF.append(f - f_prev)
                if len(dG) > mem:
                    dG.pop(0)
                    dF.pop(0)
            g_prev, f_prev = gV, f
        if dF:
            F = np.column_stack(dF)
            FtF = F.T @ F
            reg = 1e-8 * np.trace(FtF) + 1e-300
            gam = np.linalg.solve(FtF + reg * np.eye(FtF.shape[0]), F.T @ f)
            V = gV - np.column_stack(dG) @ gam
        else:
            V = gV

        if it % settings.check_interval and it != settings.max_iterations:
            continue
        xo, yo, so = x * sb, (y / rn) * sc, s * sc
        if not (np.all(np.isfinite(xo)) and np.all(np.isfinite(yo))):
            return _failure(sf, nvars, nrows, t0, it)
        rp, rd, rg = residuals(sf, xo, yo, so)
        score = max(rp / settings.eps_primal, rd / settings.eps_dual, rg / settings.eps_gap)
        if best is None or score < best[0]:
            best = (score, xo, yo, so, rp, rd, rg)
        if settings.verbose:
            print(f"{it},{rp:.3e},{rd:.3e},{rg:.3e},{c @ xo:.10g},{mu:.3g}", file=log)
        if rp <= settings.eps_primal and rd <= settings.eps_dual and rg <= settings.eps_gap:
            status = OPTIMAL
            best = (score, xo, yo, so, rp, rd, rg)
            break
        if settings.adaptive_penalty and it - last_adapt >= settings.adapt_interval:
            # keep mu near ||s|| / ||x||, which balances the two residuals
            # only in the direction the residual imbalance asks for, at most 10x
            nx, ns = np.linalg.norm(x), np.linalg.norm(s)
            if nx > 0 and ns > 0:
                target = float(np.clip(ns / nx, mu / 100.0, mu * 100.0))
                grow = target > 2.0 * mu and rp > rd
                shrink = target < 0.5 * mu and rd > rp
                if grow or shrink:
                    mu = float(np.clip(np.sqrt(mu * target), 1e-4, 1e4))
                    last_adapt = it
                    V = s - mu * x
                    dG.clear()
                    dF.clear()
                    g_prev = None
                    f_ref = np.inf

    _, xo, yo, so, rp, rd, rg = best
    return ConicSolution(
        x=xo, y=yo, s=so,
        primal_objective=float(c @ xo), dual_objective=float(b @ yo),
        primal_residual=rp, dual_residual=rd, gap_residual=rg,
        status=status, iterations=it, wall_time=time.perf_counter() - t0,
    )


def _failure(sf, nvars, nrows, t0, it=0) -> ConicSolution:
    nan = float("nan")
    return ConicSolution(
        x=np.full(nvars, nan), y=np.full(nrows, nan), s=np.full(nvars, nan),
        primal_objective=nan, dual_objective=nan,
        primal_residual=nan, dual_residual=nan, gap_residual=nan,
        status=NUMERICAL_FAILURE, iterations=it, wall_time=time.perf_counter() - t0,
    )
