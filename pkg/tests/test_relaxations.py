import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from lowrank_sdp.conic import ProgramError
from lowrank_sdp.library import encode_matrix_completion, encode_separable
from lowrank_sdp.matrix_core import DimensionError, vec_t
from lowrank_sdp.problem import COL, LowRankQuadraticProblem, example1_instance
from lowrank_sdp.relaxations import (
    InfeasibleInputError, MissingVariableError, NotSeparableError, StrengtheningOptions,
    add_symmetry_constraints, add_x_symmetry_constraints, build_compact_lifted, build_full_lifted,
    build_mprt, compact_residuals, decode, full_lifted_residuals, reconstruct_eliminated,
    rlt_cut_values, solve_relaxation, triangle_cut_value, triangle_cuts,
)
from lowrank_sdp.solver import solve

from instances import random_quadratic


def trivial_problem():
    return LowRankQuadraticProblem(1, 1, np.ones((1, 1)), np.zeros((1, 1)), k=1)


def rel_close(a, b, tol=1e-4):
    return abs(a - b) <= tol * (1 + abs(a))


def test_trivial_instance_values():
    for build in (build_full_lifted, build_compact_lifted):
        assert abs(solve_relaxation(build(trivial_problem())).lower_bound) <= 1e-6


@pytest.mark.parametrize("seed", range(4))
def test_full_equals_compact_on_random_3x2(seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((6, 6))
    p = LowRankQuadraticProblem(3, 2, G @ G.T / 6 + 0.5 * np.eye(6), rng.standard_normal((3, 2)), k=1)
    full = solve_relaxation(build_full_lifted(p)).lower_bound
    comp = solve_relaxation(build_compact_lifted(p)).lower_bound
    assert rel_close(full, comp)


def test_column_orientation_decodes_original_shape():
    rng = np.random.default_rng(3)
    H = rng.standard_normal((6, 6))
    p = LowRankQuadraticProblem(2, 3, H @ H.T + np.eye(6), rng.standard_normal((2, 3)), orientation=COL, k=2)
    sol = solve_relaxation(build_compact_lifted(p))
    assert sol.X.shape == (2, 3) and sol.Y.shape == (3, 3)
    # relaxation bound sits below the objective at the decoded point's best rank-k value
    assert sol.lower_bound <= min(
        p.lam * 2 + vec_t(X.T) @ p.H @ vec_t(X.T) + np.sum(p.D * X) for X in [sol.X, np.zeros((2, 3))]
    ) + 1e-4


def test_symmetry_constraints_small_sizes():
    p = trivial_problem()
    assert add_symmetry_constraints(build_full_lifted(p)) == 0
    p2 = LowRankQuadraticProblem(2, 1, np.eye(2), np.zeros((2, 1)))
    P = build_full_lifted(p2)
    before = P.num_rows
    added = add_symmetry_constraints(P)
    assert added > 0 and P.num_rows == before + added


def test_symmetry_requires_lifted_blocks():
    P = build_compact_lifted(trivial_problem())
    with pytest.raises(MissingVariableError):
        add_symmetry_constraints(P)


def test_x_symmetry_forces_symmetric_x():
    rng = np.random.default_rng(0)
    p = LowRankQuadraticProblem(2, 2, np.eye(4), rng.standard_normal((2, 2)) * 3, k=2)
    assert add_x_symmetry_constraints(build_full_lifted(trivial_problem())) == 0
    sol = solve_relaxation(build_full_lifted(p, StrengtheningOptions(symmetry_x=True)))
    assert np.max(np.abs(sol.X - sol.X.T)) <= 1e-6
    with pytest.raises(DimensionError):
        add_x_symmetry_constraints(build_full_lifted(LowRankQuadraticProblem(2, 1, np.eye(2), np.zeros((2, 1)))))


def exact_point(X, Y):
    x, y = vec_t(X), Y.reshape(-1, order="F")
    return np.outer(x, x), np.outer(x, y), np.outer(y, y)


def test_triangle_examples():
    Y = np.diag([1.0, 0.0, 0.0])
    _, _, Wyy = exact_point(np.zeros((3, 1)), Y)
    assert triangle_cut_value("T1", (0, 1, 2), Y, Wyy) == 0.0
    Y = np.eye(3)
    _, _, Wyy = exact_point(np.zeros((3, 1)), Y)
    assert triangle_cut_value("T1", (0, 1, 2), Y, Wyy) == 1.0


def random_projection(rng, n, k):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    r = int(rng.integers(0, k + 1))
    return Q[:, :r] @ Q[:, :r].T


@given(st.integers(3, 6), st.integers(0, 2 ** 31))
def test_triangle_cuts_hold_at_projections(n, seed):
    rng = np.random.default_rng(seed)
    Y = random_projection(rng, n, n)
    _, _, Wyy = exact_point(np.zeros((n, 1)), Y)
    for fam, t in triangle_cuts(n, 50):
        assert triangle_cut_value(fam, t, Y, Wyy) >= -1e-10


def test_rlt_values():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(4)
    W = np.outer(x, x)
    b = np.abs(rng.standard_normal(3))
    assert np.all(rlt_cut_values(np.zeros((3, 4)), b, x, W) >= 0)
    a = rng.standard_normal(4)
    beta = a @ x + 0.7
    assert np.isclose(rlt_cut_values(a[None, :], [beta], x, W)[0, 0], (beta - a @ x) ** 2)
    A = rng.standard_normal((3, 4))
    b = A @ x + rng.random(3)
    V = rlt_cut_values(A, b, x, W)
    slack = b - A @ x
    assert np.allclose(V, np.outer(slack, slack))


def test_rlt_strengthened_program_still_bounds():
    rng = np.random.default_rng(5)
    p = LowRankQuadraticProblem(2, 2, np.eye(4), rng.standard_normal((2, 2)) * 4, k=1)
    A = np.vstack([np.eye(4), -np.eye(4)])
    b = np.ones(8)
    base = solve_relaxation(build_full_lifted(p)).lower_bound
    cut = solve_relaxation(build_full_lifted(p, StrengtheningOptions(rlt=(A, b)))).lower_bound
    assert cut >= base - 1e-4 * (1 + abs(base))


def test_strengtheners_only_raise_bound():
    rng = np.random.default_rng(9)
    p = LowRankQuadraticProblem(3, 2, np.eye(6), rng.standard_normal((3, 2)) * 2, k=1)
    base = solve_relaxation(build_full_lifted(p)).lower_bound
    opts = StrengtheningOptions(symmetry_y=True, triangle=True)
    strong = solve_relaxation(build_full_lifted(p, opts)).lower_bound
    assert strong >= base - 1e-4 * (1 + abs(base))


def test_mprt_degenerates_for_huge_gamma():
    W = np.ones((2, 2))
    p = encode_separable(1e12, W, np.zeros((2, 2)))
    assert abs(solve_relaxation(build_mprt(p)).lower_bound) <= 1e-6


def test_mprt_requires_split():
    with pytest.raises(NotSeparableError):
        build_mprt(trivial_problem())


@pytest.mark.parametrize("seed", range(3))
def test_mprt_below_compact(seed):
    inst = example1_instance()
    rng = np.random.default_rng(seed)
    gamma = float(10 ** rng.uniform(-1, 3))
    p = encode_matrix_completion(inst.obs, 0.0, 2, gamma, 0.5)
    a = solve_relaxation(build_mprt(p)).lower_bound
    b = solve_relaxation(build_compact_lifted(p)).lower_bound
    assert a <= b + 1e-4 * (1 + abs(b))


def test_decode_unknown_label():
    P = build_compact_lifted(trivial_problem())
    with pytest.raises(ProgramError):
        decode(P, solve(P), labels=["nope"])


def test_reconstruct_zero_and_rank_one():
    Wxy, Wyy, Y = reconstruct_eliminated(np.zeros((2, 3)), np.zeros((2, 2)), np.zeros((6, 6)))
    assert not Wxy.any() and not Wyy.any() and not Y.any()
    rng = np.random.default_rng(4)
    u, v = rng.standard_normal(3), rng.standard_normal(2)
    u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
    X = np.outer(u, v)
    x = vec_t(X)
    _, _, Y = reconstruct_eliminated(X, np.outer(u, u), np.outer(x, x), k=1)
    assert np.allclose(Y, np.outer(u, u), atol=1e-8)


def test_reconstruct_rejects_infeasible():
    with pytest.raises(InfeasibleInputError):
        reconstruct_eliminated(np.ones((2, 2)), np.zeros((2, 2)), np.zeros((4, 4)))


@pytest.mark.parametrize("seed", range(3))
def test_reconstruction_feasible(seed):
    p = random_quadratic(seed)
    sol = solve_relaxation(build_compact_lifted(p))
    Wxx = sol.lifted["Wxx"]
    Wxy, Wyy, Y = reconstruct_eliminated(sol.X, sol.Y, Wxx, p.k, check_tol=1e-4)
    res = full_lifted_residuals(p, sol.X, Y, Wxx, Wxy, Wyy)
    assert max(res.values()) <= 1e-5, res


def test_compact_residuals_of_exact_point():
    rng = np.random.default_rng(1)
    p = random_quadratic(1)
    u = rng.standard_normal(p.n)
    u /= np.linalg.norm(u)
    X = np.outer(u, rng.standard_normal(p.m))
    x = vec_t(X)
    res = compact_residuals(p, X, np.outer(u, u), np.outer(x, x))
    assert max(res.values()) <= 1e-8
