"""Problem data types: low-rank quadratic problems, observed matrices,
decoded relaxation solutions, and the plain-text instance formats."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .matrix_core import DimensionError, as_dense, as_sym, vec, vec_t

ROW = "row"
COL = "col"


@dataclass(frozen=True)
class QuadraticConstraint:
    """``<Q, v v^T> + <E, X> <= b`` with ``v`` the problem's vectorization of X."""

    Q: np.ndarray
    E: np.ndarray
    b: float


@dataclass(frozen=True)
class FrobeniusSplit:
    """Objective written as ``||X||_F^2 / (2 gamma) + sum W * (X - T)^2``.

    Needed by the matrix perspective baseline, which only applies to this
    partially separable shape.
    """

    gamma: float
    weights: np.ndarray
    targets: np.ndarray
    offset: float = 0.0

    def h(self, X) -> float:
        return float(np.sum(self.weights * (np.asarray(X) - self.targets) ** 2) + self.offset)


@dataclass(frozen=True)
class LowRankQuadraticProblem:
    n: int
    m: int
    H: np.ndarray
    D: np.ndarray
    constraints: tuple = ()
    lam: float = 0.0
    k: Optional[int] = None
    constant: float = 0.0
    orientation: str = ROW
    split: Optional[FrobeniusSplit] = None

    def __post_init__(self):
        nm = self.n * self.m
        H = as_sym(self.H, "H")
        if H.shape != (nm, nm):
            raise DimensionError(f"H must be {nm}x{nm}, got {H.shape}")
        D = as_dense(self.D, "D")
        if D.shape != (self.n, self.m):
            raise DimensionError(f"D must be {self.n}x{self.m}, got {D.shape}")
        if self.orientation not in (ROW, COL):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        cons = []
        for c in self.constraints:
            Q, E = as_sym(c.Q, "Q"), as_dense(c.E, "E")
            if Q.shape != (nm, nm) or E.shape != (self.n, self.m):
                raise DimensionError("constraint dimensions do not match the problem")
            cons.append(QuadraticConstraint(Q, E, float(c.b)))
        if self.lam < 0:
            raise ValueError("rank penalty must be nonnegative")
        side = self.rank_side
        k = side if self.k is None else int(self.k)
        if not 1 <= k <= side:
            raise ValueError(f"rank cap {k} outside [1, {side}]")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "constraints", tuple(cons))
        object.__setattr__(self, "k", k)

    @property
    def rank_side(self) -> int:
        """Size of the projection matrix Y."""
        return self.n if self.orientation == ROW else self.m

    def vectorize(self, X) -> np.ndarray:
        return vec_t(X) if self.orientation == ROW else vec(X)


def evaluate_objective(p: LowRankQuadraticProblem, X, rank: int) -> float:
    """``lam * rank + <H, v v^T> + <D, X> + constant``."""
    X = np.asarray(X, dtype=float)
    if X.shape != (p.n, p.m):
        raise DimensionError(f"X must be {p.n}x{p.m}, got {X.shape}")
    v = p.vectorize(X)
    return float(p.lam * rank + v @ p.H @ v + np.sum(p.D * X) + p.constant)


@dataclass(frozen=True)
class ObservedMatrix:
    """A matrix known only on the index set ``omega`` (zero-based pairs)."""

    A: np.ndarray
    omega: tuple

    def __post_init__(self):
        A = as_dense(self.A, "A")
        n, m = A.shape
        pairs = tuple(sorted({(int(i), int(j)) for i, j in self.omega}))
        if len(pairs) != len(tuple(self.omega)):
            raise ValueError("duplicate observed index")
        for i, j in pairs:
            if not (0 <= i < n and 0 <= j < m):
                raise ValueError(f"observed index {(i, j)} outside {n}x{m}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "omega", pairs)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @property
    def mask(self) -> np.ndarray:
        M = np.zeros(self.A.shape, dtype=bool)
        if self.omega:
            idx = np.array(self.omega)
            M[idx[:, 0], idx[:, 1]] = True
        return M

    @classmethod
    def from_mask(cls, A, mask) -> "ObservedMatrix":
        return cls(A, tuple(zip(*np.nonzero(np.asarray(mask, dtype=bool)))))


def masked(obs: ObservedMatrix) -> np.ndarray:
    """``P(A)``: observed entries kept, the rest zeroed."""
    return np.where(obs.mask, obs.A, 0.0)


@dataclass
class SolverInfo:
    status: str
    primal_residual: float
    dual_residual: float
    gap_residual: float
    iterations: int
    solve_time: float


@dataclass
class RelaxationSolution:
    lower_bound: float
    X: np.ndarray
    Y: np.ndarray
    lifted: dict = field(default_factory=dict)
    info: Optional[SolverInfo] = None


# -- instance files ---------------------------------------------------------


@dataclass(frozen=True)
class CompletionInstance:
    obs: ObservedMatrix
    lam: float = 0.0
    k: int = 1
    gamma: Optional[float] = None


def _fmt(x: float) -> str:
    return repr(float(x))


def format_instance(inst: CompletionInstance) -> str:
    obs = inst.obs
    n, m = obs.shape
    gamma = "inf" if inst.gamma is None else _fmt(inst.gamma)
    lines = [f"{n} {m} {len(obs.omega)} {_fmt(inst.lam)} {inst.k} {gamma}"]
    mask = obs.mask
    for i in range(n):
        lines.append(" ".join(_fmt(obs.A[i, j]) if mask[i, j] else "*" for j in range(m)))
    lines.extend(f"{i + 1} {j + 1}" for i, j in obs.omega)
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> CompletionInstance:
    """Parse ``n m |omega| lam k gamma``, A row-major (``*`` = hidden), then
    one-based observed index pairs."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 6:
        raise ValueError("instance header must be 'n m |omega| lambda k gamma'")
    n, m, count = int(rows[0][0]), int(rows[0][1]), int(rows[0][2])
    lam, k = float(rows[0][3]), int(rows[0][4])
    gamma = float(rows[0][5])
    gamma = None if math.isinf(gamma) else gamma
    tokens = [t for r in rows[1:] for t in r]
    if len(tokens) != n * m + 2 * count:
        raise ValueError(f"expected {n * m} matrix entries and {count} index pairs")
    A = np.array([0.0 if t in ("*", "nan") else float(t) for t in tokens[: n * m]]).reshape(n, m)
    idx = np.array([int(t) for t in tokens[n * m:]], dtype=int).reshape(-1, 2) - 1
    obs = ObservedMatrix(A, tuple(map(tuple, idx)))
    return CompletionInstance(obs, lam, k, gamma)


def load_instance(path) -> CompletionInstance:
    return parse_instance(Path(path).read_text())


def save_instance(inst: CompletionInstance, path) -> None:
    Path(path).write_text(format_instance(inst))


def example1_instance() -> CompletionInstance:
    """The shipped 7x5 completion example (gamma=100, k=2)."""
    return load_instance(Path(__file__).with_name("data") / "example1.txt")
