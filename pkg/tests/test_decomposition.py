import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brachx.decomposition import (ABDecomposition, ClusteringAmbiguityWarning, build_type_ab,
                                  centralizer_split, cluster_eigenvalues, make_generic_ab,
                                  make_pseudo_cartan, make_random_ab, verify_controllability)
from brachx.integrable import su3_example_element
from brachx.lie_algebra import gell_mann_basis, trace_inner
from brachx.policy import InvalidArgument


@pytest.mark.parametrize("n,k,dl,dp", [(2, 1, 1, 2), (3, 1, 4, 4), (3, 2, 4, 4), (4, 2, 7, 8), (4, 3, 9, 6)])
def test_pseudo_cartan_dimensions_and_closure(n, k, dl, dp):
    # dim s(u(k) + u(n-k)) = k^2 + (n-k)^2 - 1, dim p = 2 k (n-k)
    sp = make_pseudo_cartan(n, k)
    assert len(sp.l_indices) == dl and len(sp.p_indices) == dp
    assert max(sp.closure_residuals()) < 1e-12
    dec = sp.type1()
    assert dec.kind == "type1" and dec.dim_a == dp and dec.dim_b == dl


def test_pseudo_cartan_bracket_relations_by_hand():
    sp = make_pseudo_cartan(3, 2)
    L, P = sp.l_mats, sp.p_mats
    comm = lambda X, Y: 1j * (X @ Y - Y @ X)
    for X in P:
        for Y in P:
            # [p, p] in l: no component along p
            C = comm(X, Y)
            assert all(abs(trace_inner(C, Z)) < 1e-13 for Z in P)
    for X in L:
        for Y in P:
            C = comm(X, Y)
            assert all(abs(trace_inner(C, Z)) < 1e-13 for Z in L)


@given(st.integers(0, 10_000), st.integers(2, 4), st.data())
def test_random_frame_orthonormal(seed, n, data):
    N = n * n - 1
    dim_a = data.draw(st.integers(1, N - 1))
    dec = make_random_ab(n, dim_a, seed)
    F = dec.frame
    assert np.allclose(F @ F.T, np.eye(N), atol=1e-12)
    A, B = dec.A_mats, dec.B_mats
    assert np.abs(np.einsum("iab,jba->ij", A, B)).max() < 1e-12


@given(st.integers(0, 10_000))
def test_json_round_trip_exact(seed):
    dec = make_random_ab(3, 3, seed)
    back = ABDecomposition.from_json(dec.to_json())
    assert np.array_equal(back.rotation, dec.rotation)
    assert back.a_indices == dec.a_indices and back.kind == dec.kind


def test_frame_structure_constants_transform():
    dec = make_random_ab(3, 4, 2)
    E = dec.frame_mats
    f = dec.f_frame
    i, j, k = 1, 5, 6
    C = E[i] @ E[j] - E[j] @ E[i]
    assert f[i, j, k] == pytest.approx(np.real(-1j * np.trace(C @ E[k])), abs=1e-13)


def test_generic_decomposition_from_basis_indices():
    dec = make_generic_ab(gell_mann_basis(2), (0, 1))
    assert dec.dim_a == 2 and dec.dim_b == 1
    assert verify_controllability(dec)


def test_uncontrollable_split_detected():
    # A spanned by one element generates a one-dimensional algebra
    assert not verify_controllability(make_generic_ab(gell_mann_basis(2), (0,)))


def test_random_su4_is_controllable():
    assert verify_controllability(make_random_ab(4, 6, 1))


def test_projections_complementary(rng):
    dec = make_random_ab(4, 5, 0)
    X = dec.basis.matrix(rng.standard_normal(15))
    assert np.allclose(dec.project_A(X) + dec.project_B(X), X, atol=1e-12)
    assert abs(trace_inner(dec.project_A(X), dec.project_B(X))) < 1e-12


def test_centralizer_su3_weights():
    # a = diag(1, -2, 1)/sqrt(3) type element; centralizer in l is one-dimensional
    cs = centralizer_split(make_pseudo_cartan(3, 2), su3_example_element(), 3)
    assert np.allclose(cs.eigenvalues, [1, 0, -1], atol=1e-12)
    assert cs.l_a_basis.shape == (1, 8) and cs.l_perp_basis.shape == (3, 8)
    assert np.allclose(cs.weights.ravel(), [1 / 6, 2 / 3, 1 / 6], atol=1e-12)
    assert np.allclose(cs.weights.sum(axis=0), np.eye(1), atol=1e-12)


@pytest.mark.parametrize("q,kind,da,db", [(0, "type1", 4, 4), (3, "type2", 5, 3)])
def test_su3_admissible_splits(q, kind, da, db):
    dec = build_type_ab(centralizer_split(make_pseudo_cartan(3, 2), su3_example_element(), q))
    assert (dec.kind, dec.dim_a, dec.dim_b) == (kind, da, db)


def test_intermediate_split_rejected():
    cs = centralizer_split(make_pseudo_cartan(3, 2), su3_example_element(), 1)
    with pytest.raises(InvalidArgument):
        build_type_ab(cs)


def test_su4_centralizer_type2():
    p = np.zeros((4, 4), complex)
    p[0, 3] = p[3, 0] = 1
    cs = centralizer_split(make_pseudo_cartan(4, 3), p, 3)
    assert [len(c) for c in cs.components] == [0, 3, 0] and len(cs.central) == 1
    dec = build_type_ab(cs)
    assert (dec.dim_a, dec.dim_b) == (10, 5)
    assert verify_controllability(dec)


def test_p_hat_outside_p_rejected():
    with pytest.raises(InvalidArgument):
        centralizer_split(make_pseudo_cartan(3, 2), np.diag([1.0, -1.0, 0.0]), 0)


def test_cluster_ambiguity_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        groups = cluster_eigenvalues(np.array([1.0, 1.0 + 5e-9, 0.0]), 1e-9)
    assert any(issubclass(x.category, ClusteringAmbiguityWarning) for x in w) or groups is not None
