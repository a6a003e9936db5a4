"""Finite-dimensional su(n) machinery.

Conventions
-----------
The basis ``gamma_k`` consists of traceless Hermitian matrices normalised by
``Tr(gamma_i gamma_j) = delta_ij``.  The anti-Hermitian generators are
``e_k = -1j * gamma_k`` and the real structure constants are defined by

    [e_i, e_j] = sum_k f_ijk e_k      equivalently      [gamma_i, gamma_j] = 1j * sum_k f_ijk gamma_k

so ``f_ijk = -1j * Tr([gamma_i, gamma_j] gamma_k)``.  For su(2) with
``gamma = sigma / sqrt(2)`` this gives ``f_012 = +sqrt(2)``.

:func:`commutator` returns the Hermitian bracket ``1j * [X, Y]``; in terms of
the structure constants ``1j * [gamma_i, gamma_j] = -sum_k f_ijk gamma_k``.

Canonical ordering ("gell-mann-sad") of the generalized Gell-Mann matrices:
symmetric off-diagonal pairs ``(j, k), j < k`` in lexicographic order, then the
antisymmetric pairs in the same order (``-1j`` at ``(j, k)``, ``+1j`` at
``(k, j)``), then the ``n - 1`` diagonal matrices ``diag(1, ..., 1, -l, 0, ...)``.
Everything is scaled by ``1/sqrt(2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .policy import DEFAULT_POLICY, BranchCutError, InvalidArgument, NumericPolicy

ORDERING_TAG = "gell-mann-sad"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LieBasis:
    """Ordered trace-orthonormal Hermitian basis of su(n) with structure constants."""

    n: int
    elements: np.ndarray  # (N, n, n) complex
    f: np.ndarray  # (N, N, N) real
    ordering: str = ORDERING_TAG
    _flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        flat = self.elements.reshape(len(self.elements), -1)
        object.__setattr__(self, "_flat", _frozen(flat))

    @property
    def dim(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return self.dim

    def matrix(self, coeffs) -> np.ndarray:
        """Assemble ``sum_k c_k gamma_k``.  Accepts a trailing coefficient axis."""
        c = np.asarray(coeffs, dtype=float)
        return (c @ self._flat).reshape(c.shape[:-1] + (self.n, self.n))

    def coefficients(self, X) -> np.ndarray:
        """Trace-form coordinates ``Tr(gamma_k X)`` (real part).  Accepts stacks."""
        X = np.asarray(X)
        flatX = X.reshape(X.shape[:-2] + (-1,))
        # Tr(g X) = sum_ab g_ab X_ba = sum_ab g_ab conj(X_ab) for Hermitian X
        return np.real(flatX.conj() @ self._flat.T)

    def to_json(self) -> dict:
        return {"n": self.n, "ordering": self.ordering}

    @classmethod
    def from_json(cls, data: dict) -> "LieBasis":
        if data.get("ordering", ORDERING_TAG) != ORDERING_TAG:
            raise InvalidArgument(f"unknown basis ordering {data.get('ordering')!r}")
        return gell_mann_basis(int(data["n"]))


def _gell_mann_elements(n: int) -> np.ndarray:
    mats = []
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for j, k in pairs:
        m = np.zeros((n, n), complex)
        m[j, k] = m[k, j] = 1.0
        mats.append(m)
    for j, k in pairs:
        m = np.zeros((n, n), complex)
        m[j, k] = -1j
        m[k, j] = 1j
        mats.append(m)
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        mats.append(np.diag(d * np.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    return np.array(mats) / np.sqrt(2.0)


def structure_constants(elements: np.ndarray) -> np.ndarray:
    """``f_ijk = -1j Tr([g_i, g_j] g_k)`` for a trace-orthonormal Hermitian set."""
    g = np.asarray(elements)
    prod = np.einsum("iab,jbc->ijac", g, g)
    comm = prod - prod.transpose(1, 0, 2, 3)
    # Tr(C g_k) = sum_ac C_ac g_ca
    f = -1j * np.einsum("ijac,kca->ijk", comm, g)
    return np.real(f)


@lru_cache(maxsize=16)
def gell_mann_basis(n: int) -> LieBasis:
    """Generalized Gell-Mann basis of su(n) in the canonical ordering."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidArgument(f"dimension must be an integer >= 2, got {n!r}")
    n = int(n)
    el = _gell_mann_elements(n)
    return LieBasis(n=n, elements=_frozen(el), f=_frozen(structure_constants(el)))


def _check_pair(X, Y):
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise InvalidArgument(f"dimension mismatch: {X.shape} vs {Y.shape}")
    return X, Y


def trace_inner(X, Y) -> float:
    """``Tr(X Y)``; real for Hermitian arguments."""
    X, Y = _check_pair(X, Y)
    return float(np.real(np.einsum("ab,ba->", X, Y)))


def commutator(X, Y) -> np.ndarray:
    """Hermitian bracket ``1j * (X Y - Y X)``."""
    X, Y = _check_pair(X, Y)
    return 1j * (X @ Y - Y @ X)


def hermiticity_defect(X) -> float:
    X = np.asarray(X)
    return float(np.max(np.abs(X - X.conj().swapaxes(-1, -2)), initial=0.0))


def expm(X, s: float = 1.0, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """``exp(-1j * s * X)`` for Hermitian ``X`` via its eigen-decomposition."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {X.shape}")
    scale = max(1.0, float(np.max(np.abs(X), initial=0.0)))
    if hermiticity_defect(X) > policy.hermitian_input * scale:
        raise InvalidArgument("expm expects a Hermitian argument")
    w, v = np.linalg.eigh(0.5 * (X + X.conj().T))
    return (v * np.exp(-1j * s * w)) @ v.conj().T


def unitary_eigen(U) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and an orthonormal eigenbasis of a normal matrix via complex Schur."""
    T, Z = scipy.linalg.schur(np.asarray(U, dtype=complex), output="complex")
    return np.diag(T).copy(), Z


def eigenphases(U, policy: NumericPolicy = DEFAULT_POLICY) -> tuple[np.ndarray, np.ndarray]:
    """Phases ``theta`` in ``(-pi, pi)`` with ``U = V diag(exp(-1j theta)) V^dagger``.

    Raises :class:`BranchCutError` when any phase lies within ``policy.branch_cut``
    of ``pi``.
    """
    w, V = unitary_eigen(U)
    theta = -np.angle(w)
    if np.any(np.pi - np.abs(theta) < policy.branch_cut):
        raise BranchCutError("eigenphase on the branch cut of the principal logarithm", theta)
    return theta, V


def logm_principal(U, policy: NumericPolicy = DEFAULT_POLICY) -> tuple[np.ndarray, float]:
    """Principal Hermitian logarithm split into a traceless part and a scalar phase.

    Returns ``(H, phase)`` with ``U = exp(-1j * (H + phase * I))``, ``Tr H = 0``
    and every eigenvalue of ``H + phase * I`` in ``(-pi, pi)``.
    """
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    if U.ndim != 2 or U.shape[1] != n:
        raise InvalidArgument(f"expected a square matrix, got shape {U.shape}")
    if np.linalg.norm(U @ U.conj().T - np.eye(n)) > policy.unitary * max(1.0, np.sqrt(n)):
        raise InvalidArgument("logm_principal expects a unitary argument")
    theta, V = eigenphases(U, policy)
    phase = float(np.mean(theta))
    H = (V * (theta - phase)) @ V.conj().T
    H = 0.5 * (H + H.conj().T)
    return H, phase


def log_norm(U, policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Frobenius norm of the principal logarithm, ``sqrt(sum theta_k^2)``."""
    theta, _ = eigenphases(U, policy)
    return float(np.sqrt(np.sum(theta**2)))


def _orthonormal_extend(basis_rows: list[np.ndarray], v: np.ndarray, tol: float):
    """Two-pass Gram-Schmidt; returns the new unit vector or ``None``."""
    w = v.copy()
    for _ in range(2):
        for b in basis_rows:
            w -= (b @ w) * b
    nrm = np.linalg.norm(w)
    if nrm <= tol * max(1.0, np.linalg.norm(v)):
        return None
    return w / nrm


def generated_dimension(S, policy: NumericPolicy = DEFAULT_POLICY) -> int:
    """Dimension of the Lie algebra generated by the Hermitian matrices in ``S``."""
    mats = [np.asarray(m, dtype=complex) for m in S]
    if not mats:
        raise InvalidArgument("generating set must be non-empty")
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise InvalidArgument("all generators must share one dimension")
    basis = gell_mann_basis(n)
    full = basis.dim
    span: list[np.ndarray] = []
    frontier: list[np.ndarray] = []
    for m in mats:
        w = _orthonormal_extend(span, basis.coefficients(m), policy.span)
        if w is not None:
            span.append(w)
            frontier.append(w)
    # brackets in coefficient space: (1j[X, Y])_k = -sum_ij f_ijk x_i y_j
    f = basis.f
    while frontier and len(span) < full:
        new = []
        for u in frontier:
            fu = np.tensordot(u, f, axes=(0, 0))  # (j, k)
            for v in list(span):
                w = _orthonormal_extend(span, -(v @ fu), policy.span)
                if w is not None:
                    span.append(w)
                    new.append(w)
                    if len(span) == full:
                        return full
        frontier = new
    return len(span)
