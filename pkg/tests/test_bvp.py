import numpy as np
import pytest
from hypothesis import given, strategies as st

from brachx.bvp import (SUCCESS_THRESHOLD, BvpProblem, branch_sentinel, cost_C, problem_to_json,
                        random_target, residual_cost, residual_vector, solve_multistart,
                        type1_algebraic_solve, type1_forward)
from brachx.decomposition import make_pseudo_cartan, make_random_ab
from brachx.dynamics import PhaseState, final_unitary
from brachx.lie_algebra import expm, gell_mann_basis, logm_principal
from brachx.policy import InvalidArgument


def _unit(dim, seed, norm=1.0):
    v = np.random.default_rng(seed).standard_normal(dim)
    return norm * v / np.linalg.norm(v)


def test_random_target_special_unitary():
    U = random_target(3, 5)
    assert np.allclose(U @ U.conj().T, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(U) - 1) < 1e-12
    assert np.array_equal(U, random_target(3, 5))


@given(st.integers(0, 10_000))
def test_residual_vector_norm_equals_cost(seed):
    rng = np.random.default_rng(seed)
    T = random_target(3, seed)
    H = gell_mann_basis(3).matrix(rng.standard_normal(8))
    U = T @ expm(0.4 * H / np.linalg.norm(H) + 0.1 * np.eye(3), 1.0)
    assert np.linalg.norm(residual_vector(T, U)) == pytest.approx(residual_cost(T, U), rel=1e-10, abs=1e-13)


def test_residual_cost_is_log_distance():
    H = np.diag([0.3, -0.1, -0.2]).astype(complex)
    U = expm(H, 1.0)
    assert residual_cost(np.eye(3), U) == pytest.approx(np.linalg.norm(H), abs=1e-13)
    assert residual_cost(U, U) < 1e-14


def test_branch_cut_gives_sentinel():
    U = np.diag([-1.0, -1.0]).astype(complex)
    assert residual_cost(np.eye(2), U) == branch_sentinel(2)
    assert np.linalg.norm(residual_vector(np.eye(2), U)) == pytest.approx(branch_sentinel(2))


def test_cost_vanishes_at_generated_target():
    dec = make_random_ab(3, 4, 0)
    x = _unit(dec.dim, 1, 1.5)
    T = final_unitary(dec, x, tol=1e-12)
    assert cost_C(PhaseState.from_x(dec, x), T, tol=1e-12) < 1e-9


def test_type1_forward_matches_flow():
    dec = make_pseudo_cartan(3, 1).type1()
    x = _unit(dec.dim, 2, 2.0)
    assert np.abs(type1_forward(dec, x) - final_unitary(dec, x, tol=1e-12)).max() < 1e-9


def test_problem_validation():
    dec = make_random_ab(2, 2, 0)
    with pytest.raises(InvalidArgument):
        BvpProblem(dec, 2 * np.eye(2))
    with pytest.raises(InvalidArgument):
        BvpProblem(dec, np.eye(2), method="bfgs")
    with pytest.raises(InvalidArgument):
        BvpProblem(dec, np.eye(2), start_norm=-1.0)


def test_default_start_norm():
    dec = make_random_ab(3, 4, 0)
    T = random_target(3, 1)
    assert BvpProblem(dec, T).start_norm == pytest.approx(np.linalg.norm(logm_principal(T)[0]))
    assert BvpProblem(dec, np.eye(3)).start_norm == 1.0
    p = BvpProblem(dec, T, start_norm=0.5)
    assert np.linalg.norm(p.start(3)) == pytest.approx(0.5)
    assert problem_to_json(p)["start_norm"] == 0.5


def test_zero_budget_reports_start_cost():
    dec = make_random_ab(2, 2, 0)
    prob = BvpProblem(dec, random_target(2, 0), optimizer_budget=0, n_starts=3)
    res = solve_multistart(prob)
    for i in range(3):
        assert res.final_costs[i] == pytest.approx(prob.cost(prob.start(i)), abs=1e-14)
    assert np.all(res.evaluations_used == 1)


@pytest.mark.parametrize("method", ["lm", "simplex"])
def test_su2_solved(method):
    dec = make_random_ab(2, 2, 0)
    T = final_unitary(dec, _unit(3, 4, 1.0))
    res = solve_multistart(BvpProblem(dec, T, optimizer_budget=1500, n_starts=3, method=method))
    assert res.best_cost < SUCCESS_THRESHOLD
    assert np.all(res.evaluations_used <= 1500)
    best = res.brachistochrone()
    assert best is not None and best.cost < SUCCESS_THRESHOLD


def test_budget_respected_lm():
    dec = make_random_ab(3, 4, 1)
    res = solve_multistart(BvpProblem(dec, random_target(3, 2), optimizer_budget=37, n_starts=2, method="lm"))
    assert np.all(res.evaluations_used <= 37)


def test_worker_count_does_not_change_results():
    dec = make_random_ab(2, 2, 1)
    prob = BvpProblem(dec, random_target(2, 3), optimizer_budget=60, n_starts=4, method="lm")
    r1, r2 = solve_multistart(prob, 1), solve_multistart(prob, 2)
    assert np.array_equal(r1.final_costs, r2.final_costs)
    assert np.array_equal(r1.best_x.x, r2.best_x.x)
    assert r1.costs_csv() == r2.costs_csv()


def test_type1_algebraic_agrees_with_ode_forward():
    dec = make_pseudo_cartan(3, 1).type1()
    T = type1_forward(dec, _unit(dec.dim, 7, 0.8))
    alg = type1_algebraic_solve(T, dec, seed=0, n_starts=3, budget=400, method="lm")
    assert alg.best_cost < SUCCESS_THRESHOLD
    ode = BvpProblem(dec, T).cost(alg.best_x.x)
    assert abs(ode - alg.best_cost) < 1e-6


def test_type1_algebraic_requires_type1():
    with pytest.raises(InvalidArgument):
        type1_algebraic_solve(np.eye(3), make_random_ab(3, 4, 0))
