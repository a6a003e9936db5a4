import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from brachx.decomposition import make_pseudo_cartan, make_random_ab
from brachx.dynamics import (PhaseState, evolve_minus_D, evolve_unitary, factorization_residual,
                             field_x, final_unitary, integrate, integrate_with_unitary, rhs,
                             rhs_matrix)
from brachx.policy import InvalidArgument


def _state(dec, seed, norm=1.0):
    x = np.random.default_rng(seed).standard_normal(dec.dim)
    return PhaseState.from_x(dec, norm * x / np.linalg.norm(x))


@given(st.integers(0, 10_000), st.sampled_from([(2, 2), (3, 4), (4, 6)]))
def test_field_matches_commutator_form(seed, shape):
    n, da = shape
    dec = make_random_ab(n, da, seed % 7)
    s = _state(dec, seed, 2.0)
    dA, dL = rhs(s)
    assert np.abs(dec.hamiltonian(dA) + dec.d_operator(dL) - rhs_matrix(s)).max() < 1e-12


def test_field_is_quadratic():
    dec = make_random_ab(3, 3, 4)
    x = _state(dec, 0).x
    assert np.allclose(field_x(dec, 3.0 * x), 9.0 * field_x(dec, x), atol=1e-13)


def test_state_shape_checked():
    dec = make_random_ab(3, 3, 0)
    with pytest.raises(InvalidArgument):
        PhaseState(dec, np.zeros(2), np.zeros(5))


def test_integration_matches_scipy():
    dec = make_random_ab(3, 4, 1)
    s = _state(dec, 3, 3.0)
    tr = integrate(s, tol=1e-12)
    ref = solve_ivp(lambda t, y: field_x(dec, y), (0, 1), s.x, method="DOP853",
                    rtol=1e-13, atol=1e-13, t_eval=tr.times)
    assert np.abs(ref.y.T - tr.X).max() < 1e-9


@pytest.mark.parametrize("dec", [make_random_ab(4, 6, 1), make_pseudo_cartan(4, 2).type1()],
                         ids=["random", "type1"])
def test_conserved_quantities(dec):
    tr = integrate(_state(dec, 5, 4.0), tol=1e-11)
    d = tr.drifts()
    assert max(d.values()) < 1e-8


def test_reverse_integration_returns():
    dec = make_random_ab(3, 4, 2)
    s = _state(dec, 8, 2.0)
    end = integrate(s, tol=1e-12).X[-1]
    back = integrate(PhaseState.from_x(dec, end, t=1.0), t_end=0.0, tol=1e-12)
    assert np.abs(back.X[-1] - s.x).max() < 1e-9


def test_time_rescaling():
    # x(t) from kappa x0 equals kappa x(kappa t)
    dec = make_random_ab(3, 4, 3)
    s = _state(dec, 2)
    k = 2.0
    slow = integrate(s, t_end=2.0, tol=1e-12, t_eval=np.linspace(0, 2, 11))
    fast = integrate(s.scaled(k), t_end=1.0, tol=1e-12, t_eval=np.linspace(0, 1, 11))
    assert np.abs(fast.X - k * slow.X).max() < 1e-9


def test_constant_hamiltonian_when_b_multiplier_zero_and_abelian():
    # su(2) with A = span(g0): [H, D] = 0 for lambda = 0, so U = exp(-i H t)
    dec = make_random_ab(2, 1, 0)
    s = PhaseState(dec, [0.7], [0.0, 0.0])
    U = final_unitary(dec, s.x, tol=1e-12)
    assert np.abs(U - expm(-1j * s.H)).max() < 1e-10


def test_fused_and_geometric_unitaries_agree():
    dec = make_random_ab(3, 4, 0)
    s = _state(dec, 1, 2.0)
    Uf = final_unitary(dec, s.x, tol=1e-12)
    Um = final_unitary(dec, s.x, method="magnus4", unitary_tol=1e-11)
    Up = final_unitary(dec, s.x, method="midpoint", unitary_tol=1e-10)
    assert np.abs(Uf - Um).max() < 1e-9
    assert np.abs(Uf - Up).max() < 1e-8
    assert np.abs(Uf.conj().T @ Uf - np.eye(3)).max() < 1e-9


def test_factorization_identity():
    # U(t) = V(t) exp(-i (H + D)(0) t) where i dV/dt = -D V
    dec = make_random_ab(3, 4, 5)
    tr = evolve_unitary(integrate(_state(dec, 4, 2.0), tol=1e-12))
    assert factorization_residual(tr, evolve_minus_D(tr)).max() < 1e-8


def test_batch_unitaries_shape():
    dec = make_random_ab(2, 2, 0)
    X0 = np.random.default_rng(0).standard_normal((3, 3))
    X, U = integrate_with_unitary(dec, X0, np.linspace(0, 1, 4))
    assert X.shape == (4, 3, 3) and U.shape == (4, 3, 2, 2)
    assert np.allclose(U[0], np.eye(2))


def test_csv_has_drift_columns():
    dec = make_random_ab(2, 2, 0)
    csv = integrate(_state(dec, 0), n_samples=5).to_csv()
    header = csv.splitlines()[0].split(",")
    assert header[0] == "t" and "normH_drift" in header
