"""Integrable families of the brachistochrone flow.

* Type I (B a subalgebra): multipliers are constant, ``a(t)`` is a rotation and
  ``U(t) = exp(1j D0 t) exp(-1j (H0 + D0) t)``.
* Type II (B the orthogonal complement of the centralizer inside l): the
  centralizer part is constant, the multipliers rotate by conjugation, and the
  p part is transported by a time-ordered exponential.
* The linear su(3) example with its explicit coordinates.
* The Euler-Arnold Lax flow whose small-``epsilon`` limit is the brachistochrone
  flow of a Type I/II decomposition.

Conventions follow :mod:`brachx.lie_algebra`: coefficient vectors are
coordinates in ``e_k = -1j gamma_k``, so ``[X, Y]`` of anti-Hermitian elements
has coordinates ``F(x, y)_k = sum f_ijk x_i y_j``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.polynomial import Polynomial

from .decomposition import (
    ABDecomposition, CentralizerSplit, build_type_ab, centralizer_split, make_pseudo_cartan,
)
from .dynamics import (
    PhaseState, Trajectory, integrate_batch, ordered_exponential, refined_ordered_exponential,
)
from .io import csv_text
from .lie_algebra import expm, gell_mann_basis
from .policy import DEFAULT_POLICY, IntegrationError, InvalidArgument, NumericPolicy

SQRT3 = np.sqrt(3.0)


# ------------------------------------------------------------------ Type I


def type1_defect(dec: ABDecomposition) -> float:
    """Largest A-component of a bracket of two B elements (zero iff B is a subalgebra)."""
    if dec.dim_b == 0:
        return 0.0
    f = dec.f_frame
    return float(np.max(np.abs(f[dec.dim_a :, dec.dim_a :, : dec.dim_a]), initial=0.0))


def _require_type1(dec: ABDecomposition, policy: NumericPolicy):
    d = type1_defect(dec)
    if d > policy.closure:
        raise InvalidArgument(f"B is not closed under brackets (defect {d:.2e}); not a Type I decomposition")


def type1_generator(state0: PhaseState) -> np.ndarray:
    """Antisymmetric ``G`` with ``da/dt = G a`` for constant multipliers,
    ``G_ki = sum_j f_ijk lambda_j`` in the adapted frame."""
    dec = state0.dec
    na = dec.dim_a
    fB = dec.f_frame[:na, na:, :na]  # (i, j, k)
    return np.einsum("ijk,j->ki", fB, state0.lam)


def type1_a_of_t(state0: PhaseState, t, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Closed-form ``a(t) = exp(G t) a(0)``; accepts a scalar or an array of times."""
    _require_type1(state0.dec, policy)
    G = type1_generator(state0)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    w, V = np.linalg.eig(G)
    c = np.linalg.solve(V, state0.a.astype(complex))
    out = np.real((V[None] * np.exp(np.outer(ts, w))[:, None, :]) @ c)
    return out[0] if np.ndim(t) == 0 else out


def type1_unitary(state0: PhaseState, t, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """``exp(1j D0 t) exp(-1j (H0 + D0) t)``."""
    _require_type1(state0.dec, policy)
    H0, D0 = state0.H, state0.D
    return expm(D0, -t, policy) @ expm(H0 + D0, t, policy)


def type1_trajectory(state0: PhaseState, times) -> Trajectory:
    """Closed-form samples on the dynamics CSV schema (provenance ``closed_form``)."""
    times = np.asarray(times, dtype=float)
    A = type1_a_of_t(state0, times)
    X = np.concatenate([A, np.broadcast_to(state0.lam, (len(times), state0.dec.dim_b))], axis=1)
    U = np.array([type1_unitary(state0, t) for t in times])
    return Trajectory(state0.dec, times, X, U, provenance="closed_form")


def conjugation_invariance_check(U_d, X, solver, dec: ABDecomposition | None = None,
                                 policy: NumericPolicy = DEFAULT_POLICY) -> tuple[float, float]:
    """Best costs of the targets ``U_d`` and ``exp(1j X) U_d exp(-1j X)``.

    ``solver`` maps a target unitary to an object with a ``best_cost`` attribute
    (or to a float).  If ``dec`` is given, ``X`` must lie in its B subspace.
    """
    X = np.asarray(X, dtype=complex)
    if dec is not None:
        resid = np.linalg.norm(X - dec.project_B(X))
        if resid > 1e-10 * max(1.0, np.linalg.norm(X)):
            raise InvalidArgument(f"X is not in the B subspace (residual {resid:.2e})")
    V = expm(X, -1.0, policy)
    U2 = V @ np.asarray(U_d) @ V.conj().T

    def _c(r):
        return float(getattr(r, "best_cost", r))

    return _c(solver(np.asarray(U_d))), _c(solver(U2))


def conjugate_state(state0: PhaseState, X, policy: NumericPolicy = DEFAULT_POLICY) -> PhaseState:
    """Initial data ``exp(1j X) (H0, D0) exp(-1j X)`` of the conjugated problem."""
    V = expm(np.asarray(X, complex), -1.0, policy)
    dec = state0.dec
    H = V @ state0.H @ V.conj().T
    D = V @ state0.D @ V.conj().T
    x = dec.coordinates(H + D)
    return PhaseState.from_x(dec, x, state0.t)


# ------------------------------------------------------------------ Type II


@dataclass(frozen=True, eq=False)
class TypeIIReduction:
    """Linear reduction of a Type II flow.

    ``l_a`` are the (constant) centralizer coordinates of ``t``; the multipliers
    evolve by conjugation with ``exp(-1j L_a t)`` and the p part by the
    time-ordered exponential ``W(t)`` solving ``1j dW/dt = -D(t) W``.
    """

    state0: PhaseState
    l_a: np.ndarray  # coordinates in the orthonormal centralizer basis
    l_a_basis: np.ndarray  # rows, canonical coordinates
    p_rows: np.ndarray  # rows spanning p, canonical coordinates
    tol: float = 1e-9

    @property
    def dec(self) -> ABDecomposition:
        return self.state0.dec

    @property
    def L_a(self) -> np.ndarray:
        return self.dec.basis.matrix(self.l_a @ self.l_a_basis)

    def D_of_t(self, t) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        w, V = np.linalg.eigh(self.L_a)
        E = (V[None] * np.exp(-1j * np.outer(ts, w))[:, None, :]) @ V.conj().T
        D = E @ self.state0.D @ np.conj(np.swapaxes(E, 1, 2))
        return D[0] if np.ndim(t) == 0 else D

    def l_perp_of_t(self, t) -> np.ndarray:
        """Multiplier coordinates ``lambda(t)``."""
        D = self.D_of_t(t)
        return self.dec.basis.coefficients(D) @ self.dec.b_frame.T

    def transport(self, times) -> np.ndarray:
        """``W(t)`` at increasing ``times`` (starting at 0) by refined ordered products."""
        times = np.asarray(times, dtype=float)

        def gen(tq):
            return -self.D_of_t(tq)[:, None]

        W, _, _ = refined_ordered_exponential(gen, times, self.tol)
        return W[:, 0]

    def transport_closed_form(self, t) -> np.ndarray:
        """``exp(-1j L_a t) exp(1j (L_a + D0) t)``, the exact transport (oracle)."""
        return expm(self.L_a, t) @ expm(self.L_a + self.state0.D, -t)

    def s_of_t(self, times) -> np.ndarray:
        """p part of ``H`` as Hermitian matrices at ``times`` (first time must be 0)."""
        times = np.asarray(times, dtype=float)
        if times[0] != 0.0:
            times = np.concatenate([[0.0], times])
            drop = True
        else:
            drop = False
        W = self.transport(times)
        S0 = self.dec.basis.matrix(self.dec.basis.coefficients(self.state0.H) @ self.p_rows.T @ self.p_rows)
        S = W @ S0 @ np.conj(np.swapaxes(W, 1, 2))
        return S[1:] if drop else S

    def state_at(self, times) -> np.ndarray:
        """Phase-space vectors ``x(t)`` reconstructed from the reduction, shape (T, N)."""
        times = np.asarray(times, dtype=float)
        S = self.s_of_t(times)
        La = self.L_a
        D = self.D_of_t(times)
        return self.dec.coordinates(S + La[None] + D)

    def trajectory(self, times) -> Trajectory:
        times = np.asarray(times, dtype=float)
        return Trajectory(self.dec, times, self.state_at(times), provenance="closed_form")


def type2_structure(dec: ABDecomposition, policy: NumericPolicy = DEFAULT_POLICY):
    """``(split, l_a rows, p rows)`` for a Type II decomposition, or raise."""
    if dec.k is None or dec.a_element is None:
        raise InvalidArgument("Type II reduction needs a pseudo-Cartan decomposition with a fixed element")
    split = make_pseudo_cartan(dec.n, int(dec.k), policy)
    cs = centralizer_split(split, dec.a_element, 0, policy)
    Bf = dec.b_frame
    # B must equal the orthogonal complement of the centralizer in l
    if Bf.shape[0] != cs.l_perp_basis.shape[0]:
        raise InvalidArgument("B does not match the complement of the centralizer; not Type II")
    overlap = np.linalg.svd(Bf @ cs.l_perp_basis.T, compute_uv=False) if len(Bf) else np.ones(0)
    if np.any(np.abs(overlap - 1.0) > 1e-8):
        raise InvalidArgument("B does not match the complement of the centralizer; not Type II")
    p_rows = np.eye(dec.dim)[list(split.p_indices)]
    return split, cs.l_a_basis, p_rows


def type2_reduce(state0: PhaseState, tol: float = 1e-9,
                 policy: NumericPolicy = DEFAULT_POLICY) -> TypeIIReduction:
    """Reduce a Type II state to its constants of motion and linear transports."""
    _, l_a_basis, p_rows = type2_structure(state0.dec, policy)
    c = state0.dec.basis.coefficients(state0.H + state0.D)
    l_a = l_a_basis @ c
    return TypeIIReduction(state0, l_a, l_a_basis, p_rows, tol)


# ------------------------------------------------------------------ su(3) example

_A_PAIRS = ((0, 2, "s"), (1, 2, "s"), (0, 2, "a"), (1, 2, "a"))


def su3_example_element(a1: float = 1.0) -> np.ndarray:
    """Fixed element with a single real entry ``a1`` in the (0, 2) slot."""
    a = np.zeros((3, 3), complex)
    a[0, 2] = a[2, 0] = a1
    return a


def su3_example_matrices() -> tuple[np.ndarray, np.ndarray]:
    """Hermitian matrices for the coordinates ``(a1..a4, l)`` and ``(m1, m2, m3)``.

    All are normalised to ``Tr(X^2) = 2``; ``H = sum a_i A_i + l X``.
    """
    A = []
    for j, k, kind in _A_PAIRS:
        m = np.zeros((3, 3), complex)
        if kind == "s":
            m[j, k] = m[k, j] = 1.0
        else:
            m[j, k], m[k, j] = -1j, 1j
        A.append(m)
    A.append(np.diag([1.0, -2.0, 1.0]).astype(complex) / SQRT3)
    Y1 = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], complex)
    Y2 = np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 0]], complex)
    Y3 = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return np.array(A), np.array([Y1, Y2, Y3])


def su3_example_decomposition() -> ABDecomposition:
    """Type II decomposition of su(3) whose frame is the example's coordinate frame."""
    basis = gell_mann_basis(3)
    A, Y = su3_example_matrices()
    rows = basis.coefficients(np.concatenate([A, Y])) / np.sqrt(2.0)
    return ABDecomposition(basis, rows, tuple(range(5)), (5, 6, 7), kind="type2", k=2, q=3,
                           a_element=su3_example_element(1.0))


# orthonormal frame coordinates: x = sqrt(2) * SIGN * y
SU3_SIGN = -np.ones(8)


def su3_to_frame(y) -> np.ndarray:
    return np.sqrt(2.0) * SU3_SIGN * np.asarray(y, dtype=float)


def su3_from_frame(x) -> np.ndarray:
    return SU3_SIGN * np.asarray(x, dtype=float) / np.sqrt(2.0)


def su3_M(m) -> np.ndarray:
    """Antisymmetric driving matrix of the a-block for ``m = (m1, m2, m3)``."""
    m1, m2, m3 = m[..., 0], m[..., 1], m[..., 2]
    z = np.zeros_like(m1)
    return np.stack([
        np.stack([z, -m2, -2 * m3, -m1], -1),
        np.stack([m2, z, -m1, -m3], -1),
        np.stack([2 * m3, m1, z, -m2], -1),
        np.stack([m1, m3, m2, z], -1),
    ], -2)


def su3_example_rhs(y) -> np.ndarray:
    """Right-hand side for ``y = (a1, a2, a3, a4, l, m1, m2, m3)``."""
    y = np.asarray(y, dtype=float)
    a, l, m = y[..., :4], y[..., 4], y[..., 5:]
    out = np.zeros_like(y)
    out[..., :4] = np.einsum("...ij,...j->...i", su3_M(m), a)
    out[..., 5] = SQRT3 * l * m[..., 1]
    out[..., 6] = -SQRT3 * l * m[..., 0]
    return out


def su3_m_of_t(y0, t) -> np.ndarray:
    """Closed-form ``(m1, m2, m3)`` at times ``t``."""
    y0 = np.asarray(y0, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = SQRT3 * y0[4]
    c, s = np.cos(w * t), np.sin(w * t)
    m1 = y0[5] * c + y0[6] * s
    m2 = -y0[5] * s + y0[6] * c
    return np.stack([m1, m2, np.full_like(t, y0[7])], -1)


def su3_example_solution(y0, t, tol: float = 1e-10) -> np.ndarray:
    """``y(t)``: m in closed form, a by a refined ordered product of rotations."""
    y0 = np.asarray(y0, dtype=float)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    grid = np.concatenate([[0.0], ts]) if ts[0] != 0.0 else ts

    def gen(tq):
        # exp(-1j G) = exp(M) for G = 1j M
        return 1j * su3_M(su3_m_of_t(y0, tq))[:, None]

    if y0[4] == 0.0:
        R = np.array([scipy.linalg.expm(su3_M(y0[5:]) * tt) for tt in grid])
    else:
        R, _, _ = refined_ordered_exponential(gen, grid, tol)
        R = np.real(R[:, 0])
    a = R @ y0[:4]
    out = np.concatenate([a, np.full((len(grid), 1), y0[4]), su3_m_of_t(y0, grid)], axis=1)
    if ts[0] != 0.0:
        out = out[1:]
    return out[0] if np.ndim(t) == 0 else out


# ------------------------------------------------------------------ Euler-Arnold flow


def build_phi(a_spectrum, q: int, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Polynomial ``phi`` with ``phi'(a_i) = a_i`` and ``phi''(a_i) = [i >= q]``.

    ``a_spectrum`` lists the distinct eigenvalues in component order (0-based);
    the first ``q`` belong to the A block.  ``phi(z) = z^2/2 + psi(z) P(z)/2``
    with ``P = prod (z - a_i)^2`` and ``psi`` the Lagrange-type sum over the A
    block that cancels the curvature there.  Returns ascending coefficients.
    """
    a = np.asarray(a_spectrum, dtype=float)
    Q = len(a)
    if not 0 <= q <= Q:
        raise InvalidArgument(f"q must lie in [0, {Q}]")
    gaps = np.abs(a[:, None] - a[None, :])[~np.eye(Q, dtype=bool)]
    if Q > 1 and np.min(gaps) <= policy.eigen_cluster:
        raise InvalidArgument("eigenvalues must be distinct after clustering")
    psi = Polynomial([0.0])
    for k in range(q):
        term = Polynomial([1.0])
        for s in range(Q):
            if s != k:
                term = term * Polynomial([-a[s], 1.0]) / (a[k] - a[s]) ** 3
        psi = psi - term
    P = Polynomial([1.0])
    for ai in a:
        P = P * Polynomial([-ai, 1.0]) ** 2
    phi = Polynomial([0.0, 0.0, 0.5]) + 0.5 * psi * P
    return phi.coef.copy()


def phi_derivatives(coeffs, z) -> tuple[np.ndarray, np.ndarray]:
    p = Polynomial(coeffs)
    return p.deriv(1)(z), p.deriv(2)(z)


def _ad_matrix(f: np.ndarray, c: np.ndarray, rows_in: np.ndarray, rows_out: np.ndarray) -> np.ndarray:
    """Matrix of ``y -> F(c, y)`` from span(rows_in) to span(rows_out) coordinates."""
    adc = np.einsum("i,ijk->kj", c, f)  # (k, j)
    return rows_out @ adc @ rows_in.T


@dataclass(frozen=True, eq=False)
class LaxMatrices:
    """Data of the Lax pair ``L = a z + l + s / z``, ``M = b z + omega(l)``.

    ``omega_spec`` is the matrix of ``omega`` on l in the adapted basis whose rows
    are ``l_frame`` (complement of the centralizer first, centralizer second).
    """

    a_hat: np.ndarray
    b_hat: np.ndarray
    omega_spec: np.ndarray
    phi_coeffs: np.ndarray
    epsilon: float
    p_hat: np.ndarray
    l_frame: np.ndarray
    n_perp: int
    cs: CentralizerSplit

    @property
    def basis(self):
        return self.cs.basis

    @property
    def l_indices(self):
        return self.cs.parent.l_indices

    @property
    def p_indices(self):
        return self.cs.parent.p_indices

    @property
    def omega_canonical(self) -> np.ndarray:
        """``omega`` extended by zero on p, acting on canonical coordinates."""
        return self.l_frame.T @ self.omega_spec @ self.l_frame

    def commutation_residuals(self) -> tuple[float, float]:
        """``||[a, b]||`` and the largest ``||[a, omega(l)] - [b, l]||`` over the l frame."""
        a, b = self.a_hat, self.b_hat
        r1 = float(np.linalg.norm(a @ b - b @ a))
        Lm = self.basis.matrix(self.l_frame)
        Wm = self.basis.matrix(self.omega_spec.T @ self.l_frame)
        r2 = 0.0
        for l, w in zip(Lm, Wm):
            r2 = max(r2, float(np.linalg.norm((a @ w - w @ a) - (b @ l - l @ b))))
        return r1, r2

    def L(self, tl: "TLSplit", z: float) -> np.ndarray:
        """Hermitian representative ``1j * L(z)`` of the Lax matrix."""
        basis = self.basis
        x = tl.canonical(basis.dim, self.l_indices, self.p_indices)
        return z * self.a_hat + basis.matrix(x * _tl_weights(basis.dim, self.p_indices, z))


def _tl_weights(N, p_indices, z):
    w = np.ones(N)
    w[list(p_indices)] = 1.0 / z
    return w


def build_lax(cs: CentralizerSplit, epsilon: float, policy: NumericPolicy = DEFAULT_POLICY) -> LaxMatrices:
    """Lax data for ``a = epsilon * p_hat`` with the polynomial of :func:`build_phi`."""
    basis = cs.basis
    p_hat = cs.a_element
    a_hat = epsilon * p_hat
    spec = epsilon * cs.eigenvalues
    coeffs = build_phi(spec, cs.q, policy)
    d1, d2 = phi_derivatives(coeffs, spec)
    b_hat = sum(v * P for v, P in zip(d1, cs.projectors))
    f = basis.f
    # omega on the complement: ad_b (ad_a)^-1, with ad_a : p -> l_perp
    p_rows = np.eye(basis.dim)[list(cs.parent.p_indices)]
    a_c = basis.coefficients(a_hat)
    b_c = basis.coefficients(b_hat)
    lp = cs.l_perp_basis
    if len(lp):
        ad_a = _ad_matrix(f, a_c, p_rows, lp)  # (perp, p)
        ad_b = _ad_matrix(f, b_c, p_rows, lp)
        omega_perp = ad_b @ np.linalg.pinv(ad_a, rcond=policy.pinv_threshold)
    else:
        omega_perp = np.zeros((0, 0))
    hess = np.einsum("q,qjk->jk", d2, cs.weights) if len(cs.l_a_basis) else np.zeros((0, 0))
    npp, nla = len(lp), len(cs.l_a_basis)
    omega = np.zeros((npp + nla, npp + nla))
    omega[:npp, :npp] = omega_perp
    omega[npp:, npp:] = hess
    l_frame = np.vstack([lp, cs.l_a_basis]) if npp + nla else np.zeros((0, basis.dim))
    return LaxMatrices(a_hat, b_hat, omega, coeffs, float(epsilon), p_hat, l_frame, npp, cs)


@dataclass(frozen=True)
class TLSplit:
    """``t = l + s``: coordinates on l (canonical l indices) and on p (canonical p indices)."""

    l: np.ndarray
    s: np.ndarray

    @classmethod
    def from_state(cls, state: PhaseState, l_indices, p_indices) -> "TLSplit":
        c = state.dec.basis.coefficients(state.H + state.D)
        return cls(c[list(l_indices)], c[list(p_indices)])

    def canonical(self, N, l_indices, p_indices) -> np.ndarray:
        x = np.zeros(N)
        x[list(l_indices)] = self.l
        x[list(p_indices)] = self.s
        return x


@dataclass(frozen=True, eq=False)
class EulerArnoldTrajectory:
    times: np.ndarray
    X: np.ndarray  # canonical coordinates of t, (T, N)
    lax: LaxMatrices

    @property
    def splits(self) -> list[TLSplit]:
        li, pi = list(self.lax.l_indices), list(self.lax.p_indices)
        return [TLSplit(x[li], x[pi]) for x in self.X]

    def lax_traces(self, z: float, kmax: int | None = None) -> np.ndarray:
        """``Tr((1j L(z))^k)`` for k = 2..kmax along the samples, shape (T, kmax - 1)."""
        basis = self.lax.basis
        kmax = basis.n if kmax is None else kmax
        w = _tl_weights(basis.dim, self.lax.p_indices, z)
        Lm = z * self.lax.a_hat[None] + basis.matrix(self.X * w)
        out, P = [], Lm
        for _ in range(2, kmax + 1):
            P = P @ Lm
            out.append(np.real(np.trace(P, axis1=1, axis2=2)))
        return np.array(out).T


def _coo(T: np.ndarray):
    idx = np.nonzero(np.abs(T) > 1e-15 * max(1.0, float(np.max(np.abs(T), initial=0.0))))
    return tuple(i.astype(np.int64) for i in idx) + (T[idx].copy(),)


def euler_arnold_field(lax: LaxMatrices):
    """Quadratic tensor and linear map of ``dt = [t, omega(l)] + [s, b]`` in canonical coordinates."""
    f = lax.basis.f
    Om = lax.omega_canonical
    Q = np.einsum("ijk,jm->kim", f, Om)  # dx_k = sum Q_kim x_i x_m
    b_c = lax.basis.coefficients(lax.b_hat)
    Pp = np.zeros(lax.basis.dim)
    Pp[list(lax.p_indices)] = 1.0
    lin = np.einsum("ijk,j->ki", f, b_c) * Pp[None, :]
    return Q, lin


def euler_arnold_flow(tl: TLSplit, lax: LaxMatrices, t_end: float = 1.0, tol: float = 1e-10,
                      t_eval=None, backend=None) -> EulerArnoldTrajectory:
    from ._core import get_backend

    basis = lax.basis
    t_eval = np.linspace(0.0, t_end, 101) if t_eval is None else np.asarray(t_eval, float)
    x0 = tl.canonical(basis.dim, lax.l_indices, lax.p_indices)
    Q, lin = euler_arnold_field(lax)
    qk, qi, qj, qv = _coo(Q)
    be = get_backend(backend) if (backend is None or isinstance(backend, str)) else backend
    y, _, _, _, status, t_reached = be.dopri5(qk, qi, qj, qv, np.ascontiguousarray(lin), x0[None],
                                              0.0, float(t_eval[-1]), t_eval, tol, tol, 200000, False, 0.0)
    if status != 0:
        raise IntegrationError("Euler-Arnold integration failed", float(t_reached))
    return EulerArnoldTrajectory(t_eval, np.asarray(y)[:, 0], lax)


def brachistochrone_canonical(dec: ABDecomposition, x_canonical, t_eval, tol: float = 1e-10) -> np.ndarray:
    """Brachistochrone flow started from canonical coordinates, returned in canonical coordinates."""
    x0 = np.asarray(x_canonical) @ dec.frame.T
    sol = integrate_batch(dec, x0[None], t_eval, tol)
    return sol.X[:, 0] @ dec.frame


def euler_arnold_limit(cs: CentralizerSplit, tl: TLSplit, epsilons, t_end: float = 1.0,
                       tol: float = 1e-12, policy: NumericPolicy = DEFAULT_POLICY) -> dict:
    """Deviation at ``t_end`` of the Euler-Arnold flow from the brachistochrone flow of the
    matching AB decomposition, for each ``epsilon``."""
    dec = build_type_ab(cs, policy)
    t_eval = np.array([0.0, t_end])
    x0 = tl.canonical(cs.basis.dim, cs.parent.l_indices, cs.parent.p_indices)
    ref = brachistochrone_canonical(dec, x0, t_eval, tol)[-1]
    out = {}
    for eps in epsilons:
        tr = euler_arnold_flow(tl, build_lax(cs, eps, policy), t_end, tol, t_eval)
        out[float(eps)] = float(np.linalg.norm(tr.X[-1] - ref))
    return out


def closed_form_csv(traj: Trajectory) -> str:
    """CSV on the trajectory schema; provenance column distinguishes closed form from ODE."""
    return traj.to_csv()

