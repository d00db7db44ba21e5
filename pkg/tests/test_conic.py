import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from lowrank_sdp.conic import (
    ConicProgram, ProgramError, UnsupportedConeError, add_square_epigraph, export_sdpa,
    import_sdpa, lower_soc, smat, svec,
)
from lowrank_sdp.solver import solve


def test_svec_examples():
    assert np.allclose(svec(np.eye(2)), [1, 0, 1])
    assert np.allclose(svec([[0, 1], [1, 0]]), [0, np.sqrt(2), 0])


@given(st.integers(1, 6), st.integers(0, 2 ** 31))
def test_svec_isometry(side, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((side, side))
    N = rng.standard_normal((side, side))
    M, N = M + M.T, N + N.T
    assert abs(svec(M) @ svec(N) - np.trace(M @ N)) <= 1e-12 * (1 + abs(np.trace(M @ N)))
    assert np.allclose(smat(svec(M)), M)


def toy_program():
    P = ConicProgram()
    X = P.add_psd_block("X", 2)
    P.add_equality(X.entry(0, 0), 1.0)
    P.add_objective(X.trace())
    return P


def test_toy_sdp_solves_to_one():
    P = toy_program()
    sol = solve(P)
    assert sol.status == "optimal"
    assert abs(sol.primal_objective - 1.0) <= 1e-6
    X = P.var("X").value(sol.x)
    assert np.allclose(X, [[1, 0], [0, 0]], atol=1e-5)


def test_single_psd_entry_program():
    P = ConicProgram()
    x = P.add_psd_block("x", 1)
    P.add_equality(x.entry(0, 0), 2.0)
    P.add_objective(x.entry(0, 0))
    assert abs(solve(P).primal_objective - 2.0) <= 1e-6


def test_inequality_uses_nonneg_slack():
    P = ConicProgram()
    x = P.add_free("x", 1)
    P.add_inequality(x.entry(0), 3.0)
    sf = P.standard_form()
    assert [k for k, _ in sf.cones] == ["free", "nonneg"]
    assert np.allclose(sf.A.toarray(), [[1.0, 1.0]]) and np.allclose(sf.b, [3.0])


def test_square_epigraph_on_3_4():
    P = ConicProgram()
    v = P.add_free("v", 2)
    P.add_equality(v.entry(0), 3.0)
    P.add_equality(v.entry(1), 4.0)
    t = add_square_epigraph(P, "t", [v.entry(0), v.entry(1)])
    P.add_objective(t)
    sol = solve(P)
    assert abs(sol.primal_objective - 25.0) <= 1e-5 * 25


def test_program_errors():
    P = ConicProgram()
    P.add_free("x", 2)
    with pytest.raises(ProgramError):
        P.add_free("x", 1)
    with pytest.raises(ProgramError):
        P.var("missing")


def test_sdpa_toy_export_and_roundtrip():
    P = toy_program()
    text = export_sdpa(P)
    body = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith(("*", '"'))]
    assert body[0].split()[0] == "1" and body[1].split()[0] == "1"
    assert body[2].split()[:1] == ["2"]
    sf = P.standard_form()
    back = import_sdpa(text)
    assert np.array_equal(back.c, sf.c)
    assert np.array_equal(back.b, sf.b)
    assert np.array_equal(back.A.toarray(), sf.A.toarray())


def test_sdpa_rejects_soc_unless_lowered():
    P = ConicProgram()
    v = P.add_free("v", 1)
    P.add_equality(v.entry(0), 1.0)
    P.add_objective(add_square_epigraph(P, "t", [v.entry(0)]))
    with pytest.raises(UnsupportedConeError):
        export_sdpa(P)
    lowered = import_sdpa(export_sdpa(P, lower=True))
    assert all(kind != "soc" for kind, _ in lowered.cones)
    assert abs(solve(lowered).primal_objective + P.constant - 1.0) <= 1e-5


def test_lower_soc_preserves_value():
    P = ConicProgram()
    v = P.add_free("v", 2)
    P.add_equality(v.entry(0), 1.0)
    P.add_equality(v.entry(1), -2.0)
    P.add_objective(add_square_epigraph(P, "t", [v.entry(0), v.entry(1)]))
    a = solve(P).primal_objective
    b = solve(lower_soc(P.standard_form())).primal_objective
    assert abs(a - b) <= 1e-5 * (1 + abs(a))
