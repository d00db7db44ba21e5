"""Dense linear-algebra helpers with the vectorization and block conventions
used by the relaxations.

Two vectorizations appear throughout: ``vec`` stacks columns (Fortran order)
and ``vec_t`` stacks rows, i.e. ``vec_t(X) == vec(X.T)``.  Lifted matrices over
``vec_t(X)`` for an ``n x m`` matrix ``X`` are ``nm x nm`` and are read as an
``n x n`` grid of ``m x m`` blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PINV_RTOL = 1e-9


class DimensionError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    """Raised when the symmetric eigensolver fails to converge."""


def as_dense(a, name="matrix") -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True, ndmin=2)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_sym(a, name="matrix") -> np.ndarray:
    """Return a symmetric copy of ``a`` (upper triangle wins)."""
    arr = as_dense(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    upper = np.triu(arr)
    return upper + np.triu(arr, 1).T


def vec(X) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X, dtype=float).reshape(-1, order="F")


def vec_t(X) -> np.ndarray:
    """Row-stacking vectorization, ``vec(X.T)``."""
    return np.asarray(X, dtype=float).reshape(-1, order="C")


def unvec(v, n: int, m: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape((n, m), order="F")


def unvec_t(v, n: int, m: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape((n, m), order="C")


def vec_permutation(n: int, m: int) -> np.ndarray:
    """Index array ``p`` with ``vec(X) == vec_t(X)[p]`` for ``n x m`` X."""
    return np.arange(n * m).reshape((n, m)).reshape(-1, order="F")


def commutation_matrix(n: int, m: int | None = None) -> np.ndarray:
    """Permutation ``K`` with ``K @ vec(Y) == vec(Y.T)`` for ``n x m`` Y."""
    if m is None:
        m = n
    if n < 1 or m < 1:
        raise DimensionError("commutation matrix needs positive dimensions")
    K = np.zeros((n * m, n * m))
    # vec(Y.T) position of Y[i, j] is i*m + j; vec(Y) position is j*n + i
    i, j = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    K[(i * m + j).ravel(), (j * n + i).ravel()] = 1.0
    return K


def kron_identity_left(m: int, S) -> np.ndarray:
    """``I_m (x) S``, block diagonal with ``m`` copies of ``S``."""
    if m < 1:
        raise DimensionError("m must be positive")
    return np.kron(np.eye(m), np.asarray(S, dtype=float))


def pseudoinverse(M, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse; singular values below ``rtol * s_max`` are dropped."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return M.T.copy()
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > rtol * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def eig_sym(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    try:
        return np.linalg.eigh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc


def psd_project(M) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix."""
    w, V = eig_sym(M)
    w = np.maximum(w, 0.0)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T)


def _fix_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-magnitude entry of each column of U made nonnegative;
    # argmax returns the lowest index on ties
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def truncated_svd(A, r: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best rank-``r`` factors ``(U, s, V)`` with ``A ~= U @ diag(s) @ V.T``."""
    A = np.asarray(A, dtype=float)
    n, m = A.shape
    if not 1 <= r <= min(n, m):
        raise DimensionError(f"rank {r} outside [1, {min(n, m)}]")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    U, V = _fix_signs(U[:, :r], Vt[:r].T)
    return U, s[:r], V


@dataclass(frozen=True)
class BlockView:
    """A matrix read as a ``block_rows x block_cols`` grid of equal blocks."""

    base: np.ndarray
    block_rows: int
    block_cols: int

    def __post_init__(self):
        r, c = self.base.shape
        if r % self.block_rows or c % self.block_cols:
            raise DimensionError(
                f"{self.base.shape} does not split into {self.block_rows}x{self.block_cols} blocks"
            )

    @property
    def block_height(self) -> int:
        return self.base.shape[0] // self.block_rows

    @property
    def block_width(self) -> int:
        return self.base.shape[1] // self.block_cols

    def block(self, i: int, j: int) -> np.ndarray:
        h, w = self.block_height, self.block_width
        return self.base[i * h:(i + 1) * h, j * w:(j + 1) * w]


def block_diag_sum(W, num_blocks: int | None = None, block_size: int | None = None) -> np.ndarray:
    """Sum of the diagonal blocks of a block matrix.

    ``W`` may be a :class:`BlockView` or an array together with either the
    number of diagonal blocks or their side length.
    """
    if isinstance(W, BlockView):
        view = W
    else:
        W = np.asarray(W, dtype=float)
        if num_blocks is None and block_size is None:
            raise DimensionError("need num_blocks or block_size")
        if num_blocks is None:
            if W.shape[0] % block_size:
                raise DimensionError(f"size {W.shape[0]} not divisible by {block_size}")
            num_blocks = W.shape[0] // block_size
        view = BlockView(W, num_blocks, num_blocks)
    if view.block_rows != view.block_cols or view.block_height != view.block_width:
        raise DimensionError("diagonal blocks must be square")
    total = np.zeros((view.block_height, view.block_width))
    for i in range(view.block_rows):
        total += view.block(i, i)
    return total
