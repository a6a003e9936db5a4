import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from brachx.decomposition import make_random_ab
from brachx.dynamics import PhaseState, field_x, final_unitary
from brachx.integrable import su3_example_decomposition
from brachx.io import child_rng
from brachx.lie_algebra import log_norm
from brachx.policy import InvalidArgument
from brachx.stability import (CHUNK, DivergenceRun, changepoint, default_grid, divergence_E,
                              f_measure, fit_exponent, linear_through_origin, lyapunov_distribution,
                              lyapunov_exponent, samples_csv, scaling_check, unit_state,
                              unitary_divergence_O)


@pytest.fixture(scope="module")
def dec():
    return make_random_ab(3, 4, 0)


@pytest.fixture(scope="module")
def x0(dec):
    return unit_state(dec, np.random.default_rng(3)).scaled(3.0)


def test_run_validation(x0):
    with pytest.raises(InvalidArgument):
        DivergenceRun(x0, d_norm=0.1)  # above 1% of ||x0||
    with pytest.raises(InvalidArgument):
        DivergenceRun(x0, t_grid=np.array([0.0, 0.5, 0.4]))
    with pytest.raises(InvalidArgument):
        DivergenceRun(x0, n_perturbations=0)
    run = DivergenceRun(x0)
    assert run.d_norm == pytest.approx(3e-6)
    assert np.linalg.norm(run.perturbation(4)) == pytest.approx(run.d_norm)
    assert [len(c) for c in DivergenceRun(x0, n_perturbations=CHUNK + 3).chunks()] == [CHUNK, 3]


def test_divergence_matches_independent_integration(dec, x0):
    run = DivergenceRun(x0, n_perturbations=3, t_grid=default_grid(11), tol=1e-12)
    curve = divergence_E(run)
    assert np.allclose(curve.mean[0], 1.0, atol=0) and curve.samples.shape == (3, 11)
    f = lambda t, y: field_x(dec, y)
    kw = dict(method="DOP853", rtol=1e-13, atol=1e-13, t_eval=run.t_grid)
    ref = solve_ivp(f, (0, 1), x0.x, **kw).y.T
    for row, i in zip(curve.samples, curve.indices):
        d = run.perturbation(i)
        pert = solve_ivp(f, (0, 1), x0.x + d, **kw).y.T
        E = np.linalg.norm(pert - ref, axis=1) / np.linalg.norm(d)
        assert np.abs(row - E).max() < 1e-4


def test_unitary_divergence_matches_direct(dec, x0):
    run = DivergenceRun(x0, d_norm=1e-4, n_perturbations=2, t_grid=np.array([0.0, 0.5, 1.0]), tol=1e-12)
    curve = unitary_divergence_O(run)
    assert np.all(curve.samples[:, 0] == 0.0)
    for row, i in zip(curve.samples, curve.indices):
        U0 = final_unitary(dec, x0.x, tol=1e-12)
        U1 = final_unitary(dec, x0.x + run.perturbation(i), tol=1e-12)
        assert row[-1] == pytest.approx(log_norm(U0.conj().T @ U1), rel=1e-4)
    assert "mean_O" in curve.to_csv().splitlines()[0]


def test_curves_independent_of_workers(x0):
    run = DivergenceRun(x0, n_perturbations=CHUNK + 5, t_grid=default_grid(11), seed=9)
    a, b = divergence_E(run, 1), divergence_E(run, 2)
    assert np.array_equal(a.samples, b.samples) and a.to_csv() == b.to_csv()


@given(st.floats(-3, 3), st.floats(-2, 2))
def test_fit_recovers_exponential(rate, offset):
    t = default_grid()
    s, (lo, hi), r2 = fit_exponent(t, np.exp(offset + rate * t))
    assert s == pytest.approx(rate, abs=1e-9)
    if abs(rate) > 1e-6:
        assert (lo, hi) == (0.0, 1.0) and r2 == pytest.approx(1.0)


def _brute_force_window(t, y, r2_min, need):
    best = None
    for i in range(len(t)):
        for j in range(i + need - 1, len(t)):
            tt, yy = t[i:j + 1], y[i:j + 1]
            slope, icpt = np.polyfit(tt, yy, 1)
            r2 = 1 - np.sum((yy - slope * tt - icpt) ** 2) / np.sum((yy - yy.mean()) ** 2)
            key = (j - i, r2)
            if r2 >= r2_min and (best is None or key > best[0]):
                best = (key, slope, (tt[0], tt[-1]))
    return best


def test_fit_window_matches_brute_force():
    # flat until 0.4, then exponential with rate 5
    t = default_grid(41)
    E = np.exp(5 * np.maximum(t - 0.4, 0.0))
    s, w, r2 = fit_exponent(t, E)
    (_, r2_ref), s_ref, w_ref = _brute_force_window(t, np.log(E), 0.98, 21)
    assert s == pytest.approx(s_ref, rel=1e-8) and w == w_ref and r2 == pytest.approx(r2_ref)
    assert w[1] == 1.0 and r2 >= 0.98


def test_fit_needs_samples():
    with pytest.raises(InvalidArgument):
        fit_exponent([0.0, 1.0], [1.0, 2.0])


def test_linear_fit_and_changepoint():
    t = np.linspace(0, 1, 1001)
    O = 2.0 * (t + 4 * np.maximum(t - 0.5, 0.0) ** 2)
    c, r2 = linear_through_origin(t, O)
    assert c == pytest.approx(2.0) and r2 == pytest.approx(1.0)
    # |O / (c t) - 1| = 4 (t - 1/2)^2 / t reaches 0.1 at t = 0.625
    assert changepoint(t, O) == pytest.approx(0.625, abs=1e-3)
    assert changepoint(t, 2.0 * t) == float("inf")


def test_scaling_symmetry(x0):
    assert scaling_check(x0) < 1e-8


def test_distribution_seeded_and_worker_invariant(dec):
    grid = default_grid(11)
    a = lyapunov_distribution(dec, 3, seed=2, n_perturbations=2, t_grid=grid)
    b = lyapunov_distribution(dec, 3, seed=2, n_perturbations=2, t_grid=grid, workers=2)
    assert samples_csv(a) == samples_csv(b)
    assert np.allclose(a[1].x0.x, unit_state(dec, child_rng(2, 0, 1)).x)
    assert all(abs(np.linalg.norm(s.x0.x) - 1) < 1e-12 for s in a)


def test_integrable_example_has_small_exponent():
    dec = su3_example_decomposition()
    x0 = unit_state(dec, np.random.default_rng(0))
    assert lyapunov_exponent(x0, n_perturbations=8).exponent < 0.1


def test_fmeasure_requires_generating_state(dec, x0):
    with pytest.raises(InvalidArgument, match="residual cost"):
        f_measure(np.eye(3), x0, 1e-3, 4)


def test_fmeasure_values(dec, x0):
    U0 = final_unitary(dec, x0.x)
    res = f_measure(U0, x0, 1e-3, 30, seed=1)
    assert len(res.log_F) == 30 and res.control < 1e-6
    i = int(res.indices[7])
    v = child_rng(1, i).standard_normal(dec.dim)
    U = final_unitary(dec, x0.x + 1e-3 * v / np.linalg.norm(v))
    assert res.log_F[7] == pytest.approx(np.log(log_norm(U0.conj().T @ U)), abs=1e-8)
    q1, q3 = res.iqr
    assert q1 <= res.median <= q3
    same = f_measure(U0, x0, 1e-3, 30, seed=1, workers=2)
    assert np.array_equal(res.log_F, same.log_F)
