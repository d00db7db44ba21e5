"""Alternating minimization upper bound for matrix completion.

X is kept factored as ``U @ V`` with U n x r and V r x m.  Each sweep
minimizes the encoded objective exactly over U (row by row) and then over V
(column by column); the regularizer acts on X itself, so each subproblem is
an r x r ridge system ``(s V_i V_i^T + V V^T / (2 gamma)) u = s V_i a_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .library import encode_matrix_completion
from .matrix_core import truncated_svd
from .problem import ObservedMatrix, evaluate_objective, masked

JITTER = 1e-10


@dataclass(frozen=True)
class AMSettings:
    rank: int
    gamma: float | None = None
    max_sweeps: int = 500
    rel_tol: float = 1e-8
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.max_sweeps < 1 or self.restarts < 1:
            raise ValueError("max_sweeps and restarts must be positive")


@dataclass
class AMResult:
    X: np.ndarray
    upper_bound: float
    sweeps: int
    history: list


def _objective(X, PA, mask, gamma, loss_scale):
    val = loss_scale * float(np.sum((mask * (X - PA)) ** 2))
    if gamma is not None:
        val += float(np.sum(X * X)) / (2.0 * gamma)
    return val


def _solve_factor(F, PA, mask, gamma, loss_scale):
    """Best left factor for fixed right factor F (r x m), one row at a time."""
    r = F.shape[0]
    reg = F @ F.T / (2.0 * gamma) if gamma is not None else np.zeros((r, r))
    out = np.zeros((PA.shape[0], r))
    for i in range(PA.shape[0]):
        Fi = F[:, mask[i]]
        M = loss_scale * (Fi @ Fi.T) + reg
        rhs = loss_scale * (Fi @ PA[i, mask[i]])
        try:
            out[i] = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            out[i] = np.linalg.solve(M + JITTER * np.eye(r), rhs)
        if not np.all(np.isfinite(out[i])):
            out[i] = np.linalg.lstsq(M + JITTER * np.eye(r), rhs, rcond=None)[0]
    return out


def _run(U, V, PA, mask, s: AMSettings, loss_scale):
    obj = _objective(U @ V, PA, mask, s.gamma, loss_scale)
    history = [obj]
    sweeps = 0
    for sweeps in range(1, s.max_sweeps + 1):
        U = _solve_factor(V, PA, mask, s.gamma, loss_scale)
        V = _solve_factor(U.T, PA.T, mask.T, s.gamma, loss_scale).T
        new = _objective(U @ V, PA, mask, s.gamma, loss_scale)
        history.append(new)
        done = obj - new <= s.rel_tol * max(abs(obj), 1e-300)
        obj = new
        if done:
            break
    return U @ V, obj, sweeps, history


def alternating_minimization(obs: ObservedMatrix, s: AMSettings, loss_scale: float = 1.0,
                             lam: float = 0.0) -> AMResult:
    """Run AM from a truncated SVD of the zero-filled data (plus seeded random
    restarts) and return the best factorization found."""
    n, m = obs.shape
    r = min(s.rank, n, m)
    PA = masked(obs)
    mask = obs.mask
    U0, sv, V0 = truncated_svd(PA, r)
    root = np.sqrt(sv)
    starts = [(U0 * root, (V0 * root).T)]
    rng = np.random.Generator(np.random.Philox(s.seed))
    for _ in range(s.restarts - 1):
        starts.append((rng.standard_normal((n, r)), rng.standard_normal((r, m))))

    best = None
    for U, V in starts:
        X, obj, sweeps, hist = _run(U, V, PA, mask, s, loss_scale)
        if best is None or obj < best[1]:
            best = (X, obj, sweeps, hist)
    X, _, sweeps, hist = best
    enc = encode_matrix_completion(obs, lam, None, s.gamma, loss_scale)
    ub = evaluate_objective(enc, X, s.rank)
    return AMResult(X, ub, sweeps, hist)


def gap(ub: float, lb: float, tol: float = 1e-4) -> float:
    """Relative gap ``(ub - lb) / ub``.  Small negative values within ``tol``
    (relative to ``1 + |ub|``) come from solver inaccuracy and are clamped to 0."""
    if not ub > 0:
        raise ValueError(f"upper bound must be positive, got {ub}")
    g = (ub - lb) / ub
    if g < 0 and lb - ub <= tol * (1.0 + abs(ub)):
        return 0.0
    return g
