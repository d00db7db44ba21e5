import io

import numpy as np
import pytest
import scipy.sparse as sp

from lowrank_sdp.conic import ConicProgram, StandardForm
from lowrank_sdp.problem import example1_instance
from lowrank_sdp.library import build_mc_reduced, encode_matrix_completion
from lowrank_sdp.relaxations import build_mprt, decode
from lowrank_sdp.solver import (
    MAX_ITERATIONS, NUMERICAL_FAILURE, OPTIMAL, SolverSettings, project_soc, residuals, solve,
)


def lp_min_x_ge_3():
    P = ConicProgram()
    x = P.add_free("x", 1)
    P.add_inequality(-1.0 * x.entry(0), -3.0)
    P.add_objective(x.entry(0))
    return P


def random_sdp(seed, side=4, rows=3):
    # feasible and bounded: b from a PSD point, c = identity plus PSD noise
    rng = np.random.default_rng(seed)
    P = ConicProgram()
    X = P.add_psd_block("X", side)
    G = rng.standard_normal((side, side))
    X0 = G @ G.T
    for _ in range(rows):
        C = rng.standard_normal((side, side))
        C = C + C.T
        P.add_equality(X.inner(C), float(np.sum(C * X0)))
    F = rng.standard_normal((side, side))
    P.add_objective(X.inner(np.eye(side) + F @ F.T))
    return P


def test_lp():
    sol = solve(lp_min_x_ge_3())
    assert sol.status == OPTIMAL
    assert abs(sol.primal_objective - 3.0) <= 1e-8 * 4 + 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_weak_duality_and_certification(seed):
    P = random_sdp(seed)
    s = SolverSettings()
    sol = solve(P, s)
    assert sol.status == OPTIMAL
    sf = P.standard_form()
    rp, rd, rg = residuals(sf, sol.x, sol.y, sol.s)
    assert rp <= s.eps_primal and rd <= s.eps_dual and rg <= s.eps_gap
    assert sol.dual_objective <= sol.primal_objective + s.eps_gap * (
        1 + abs(sol.primal_objective) + abs(sol.dual_objective))


def test_determinism():
    P = random_sdp(7)
    a, b = solve(P), solve(P)
    assert a.iterations == b.iterations
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_max_iterations_returns_best_iterate():
    inst = example1_instance()
    P = build_mc_reduced(inst.obs, 0.0, 2, 100.0, 0.5)
    sol = solve(P, SolverSettings(max_iterations=30))
    assert sol.status == MAX_ITERATIONS
    assert sol.iterations == 30
    assert np.all(np.isfinite(sol.x))


def test_numerical_failure_on_nan_data():
    sf = StandardForm(sp.csr_matrix(np.ones((1, 2))), np.array([1.0]), np.array([np.nan, 1.0]),
                      [("nonneg", 2)])
    sol = solve(sf)
    assert sol.status == NUMERICAL_FAILURE
    assert np.isnan(sol.primal_objective)
    with pytest.raises(ValueError):
        decode(lp_min_x_ge_3(), sol)


def test_rank_deficient_rows_fall_back():
    P = ConicProgram()
    x = P.add_nonneg("x", 2)
    P.add_equality(x.entry(0) + x.entry(1), 1.0)
    P.add_equality(2.0 * (x.entry(0) + x.entry(1)), 2.0)
    P.add_objective(x.entry(0) + 2.0 * x.entry(1))
    sol = solve(P)
    assert sol.status == OPTIMAL
    assert abs(sol.primal_objective - 1.0) <= 1e-5


def test_verbose_log_is_csv():
    buf = io.StringIO()
    solve(random_sdp(1), SolverSettings(verbose=True, log_stream=buf))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iteration,primal_res,dual_res,gap,objective,penalty"
    assert len(lines) > 1 and len(lines[1].split(",")) == 6


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(eps_primal=0)
    with pytest.raises(ValueError):
        SolverSettings(max_iterations=0)
    with pytest.raises(ValueError):
        SolverSettings(penalty=-1.0)


def test_soc_projection():
    v = np.array([1.0, 3.0, 4.0])
    p = project_soc(v)
    assert np.isclose(p[0], np.linalg.norm(p[1:]))
    assert np.allclose(project_soc(np.array([5.0, 3.0, 4.0])), [5, 3, 4])
    assert np.allclose(project_soc(np.array([-5.0, 3.0, 4.0])), 0)


def test_mprt_example1_trace_bound():
    inst = example1_instance()
    P = build_mprt(encode_matrix_completion(inst.obs, 0.0, 2, 100.0, 0.5))
    sol = decode(P, solve(P))
    assert np.trace(sol.Y) <= 2 + 1e-6
    assert sol.info.status == OPTIMAL
