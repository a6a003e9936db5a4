"""Compiled and pure-Python kernels: agreement with each other and with scipy."""
import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm as sp_expm

from brachx._core import BACKENDS, _fallback, get_backend
from brachx.decomposition import make_random_ab

compiled_only = pytest.mark.skipif("compiled" not in BACKENDS, reason="compiled extension not built")


def _problem():
    dec = make_random_ab(4, 6, 3)
    qk, qi, qj, qv = dec.field_terms
    rng = np.random.default_rng(1)
    X0 = rng.standard_normal((3, dec.dim))
    return dec, (qk, qi, qj, qv), X0


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_dopri5_matches_solve_ivp(name):
    dec, terms, X0 = _problem()
    be = get_backend(name)
    t_eval = np.linspace(0, 1, 6)
    y, ts, dense, nfev, status, t_reached = be.dopri5(*terms, None, X0, 0.0, 1.0, t_eval,
                                                      1e-11, 1e-11, 100000, False, 0.0)
    assert status == 0 and t_reached == 1.0
    Q = _fallback.dense_tensor(*terms, dec.dim)
    for b in range(len(X0)):
        ref = solve_ivp(lambda t, x: np.einsum("kij,i,j->k", Q, x, x), (0, 1), X0[b], method="DOP853",
                        t_eval=t_eval, rtol=1e-13, atol=1e-13)
        assert np.abs(np.asarray(y)[:, b, :] - ref.y.T).max() < 1e-9


@compiled_only
def test_backends_agree_on_evaluated_solution():
    # step records may differ by rounding; the evaluated solution may not
    dec, terms, X0 = _problem()
    t_eval = np.linspace(0, 1, 11)
    outs = [np.asarray(get_backend(nm).dopri5(*terms, None, X0, 0.0, 1.0, t_eval, 1e-10, 1e-10,
                                              100000, False, 0.0)[0]) for nm in ("python", "compiled")]
    assert np.abs(outs[0] - outs[1]).max() < 1e-12


@compiled_only
def test_backends_agree_on_dense_output():
    dec, terms, X0 = _problem()
    t_eval = np.array([0.0, 1.0])
    res = [get_backend(nm).dopri5(*terms, None, X0, 0.0, 1.0, t_eval, 1e-10, 1e-10, 100000, True, 0.0)
           for nm in ("python", "compiled")]
    from brachx.dynamics import dense_evaluate
    tq = np.linspace(0, 1, 17)
    a = dense_evaluate(np.asarray(res[0][1]), np.asarray(res[0][2]), tq)
    b = dense_evaluate(np.asarray(res[1][1]), np.asarray(res[1][2]), tq)
    assert np.abs(a - b).max() < 1e-9


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_propagate_matches_product_of_exponentials(name):
    rng = np.random.default_rng(5)
    K, B, n = 4, 2, 3
    A = rng.standard_normal((K, B, n, n)) + 1j * rng.standard_normal((K, B, n, n))
    G = 0.3 * (A + np.conj(np.swapaxes(A, -1, -2)))
    U0 = np.broadcast_to(np.eye(n, dtype=complex), (B, n, n)).copy()
    record = np.ones(K + 1, dtype=bool)
    out = np.asarray(get_backend(name).propagate(G, U0, record))
    for b in range(B):
        U = np.eye(n, dtype=complex)
        for k in range(K):
            U = sp_expm(-1j * G[k, b]) @ U
        assert np.abs(out[-1, b] - U).max() < 1e-12


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        get_backend("fortran")
