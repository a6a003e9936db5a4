"""AB decompositions of su(n): generic splits, pseudo-Cartan splits, centralizers
and the integrable Type I / Type II families.

Every decomposition carries an orthonormal *adapted frame*: an ``N x N``
orthogonal matrix whose rows are the adapted basis vectors written in the
canonical Gell-Mann coordinates.  ``a_indices`` / ``b_indices`` index rows of
that frame.  Phase-space vectors are always ordered ``x = (a, lambda)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.stats import ortho_group

from .io import matrix_from_json, matrix_to_json
from .lie_algebra import LieBasis, generated_dimension, gell_mann_basis, hermiticity_defect
from .policy import DEFAULT_POLICY, ConsistencyError, InvalidArgument, NumericPolicy

KINDS = ("generic", "pseudo_cartan", "type1", "type2", "type_ab")


class ClusteringAmbiguityWarning(UserWarning):
    pass


def _transform_f(f: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Structure constants in the frame whose rows are ``W`` (orthonormal)."""
    g = np.tensordot(W, f, axes=(1, 0))
    g = np.tensordot(W, g, axes=(1, 1)).transpose(1, 0, 2)
    return np.tensordot(g, W, axes=(2, 1))


@dataclass(frozen=True, eq=False)
class ABDecomposition:
    basis: LieBasis
    rotation: np.ndarray
    a_indices: tuple[int, ...]
    b_indices: tuple[int, ...]
    kind: str = "generic"
    k: int | None = None
    q: int | None = None
    a_element: np.ndarray | None = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        N = self.basis.dim
        a, b = tuple(int(i) for i in self.a_indices), tuple(int(i) for i in self.b_indices)
        object.__setattr__(self, "a_indices", a)
        object.__setattr__(self, "b_indices", b)
        if not a:
            raise InvalidArgument("the A subspace must be non-empty")
        if sorted(a + b) != list(range(N)):
            raise InvalidArgument("a_indices and b_indices must partition the basis indices")
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (N, N) or np.linalg.norm(R @ R.T - np.eye(N)) > 1e-10:
            raise InvalidArgument("rotation must be an orthogonal N x N matrix")
        R.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown decomposition kind {self.kind!r}")

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def dim_a(self) -> int:
        return len(self.a_indices)

    @property
    def dim_b(self) -> int:
        return len(self.b_indices)

    @cached_property
    def frame(self) -> np.ndarray:
        """Rows of the adapted basis in phase-space order (A rows, then B rows)."""
        return self.rotation[list(self.a_indices) + list(self.b_indices)]

    @property
    def a_frame(self) -> np.ndarray:
        return self.frame[: self.dim_a]

    @property
    def b_frame(self) -> np.ndarray:
        return self.frame[self.dim_a :]

    @cached_property
    def A_mats(self) -> np.ndarray:
        return self.basis.matrix(self.a_frame)

    @cached_property
    def B_mats(self) -> np.ndarray:
        return self.basis.matrix(self.b_frame)

    @cached_property
    def frame_mats(self) -> np.ndarray:
        return self.basis.matrix(self.frame)

    @cached_property
    def f_frame(self) -> np.ndarray:
        """Structure constants in the phase-space frame."""
        return _transform_f(self.basis.f, self.frame)

    @cached_property
    def field_terms(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Sparse quadratic form ``dx_k = sum qv x_i x_j`` of the brachistochrone flow.

        With ``t = sum x_j e_j`` the flow is ``dt/dt = [t, P_B t]``, i.e.
        ``dx_k = sum_{i, j in B} f_ijk x_i x_j``.
        """
        nb = self.dim_b
        if nb == 0:
            e = np.zeros(0, dtype=np.int64)
            return e, e, e, np.zeros(0)
        fb = self.f_frame[:, self.dim_a :, :]
        tol = 1e-14 * max(1.0, float(np.max(np.abs(fb))))
        i, j, k = np.nonzero(np.abs(fb) > tol)
        return (k.astype(np.int64), i.astype(np.int64),
                (j + self.dim_a).astype(np.int64), fb[i, j, k].copy())

    @cached_property
    def dense_field(self) -> np.ndarray:
        Q = np.zeros((self.dim,) * 3)
        qk, qi, qj, qv = self.field_terms
        np.add.at(Q, (qk, qi, qj), qv)
        return Q

    # -- matrices <-> coordinates
    def hamiltonian(self, a) -> np.ndarray:
        return self.basis.matrix(np.asarray(a, float) @ self.a_frame)

    def d_operator(self, lam) -> np.ndarray:
        if self.dim_b == 0:
            return np.zeros(np.shape(lam)[:-1] + (self.n, self.n), complex)
        return self.basis.matrix(np.asarray(lam, float) @ self.b_frame)

    def coordinates(self, X) -> np.ndarray:
        """Phase-space coordinates ``(a, lambda)`` of a Hermitian matrix (or stack)."""
        return self.basis.coefficients(X) @ self.frame.T

    def project_B(self, X) -> np.ndarray:
        c = self.basis.coefficients(X) @ self.b_frame.T
        return self.basis.matrix(c @ self.b_frame)

    def project_A(self, X) -> np.ndarray:
        c = self.basis.coefficients(X) @ self.a_frame.T
        return self.basis.matrix(c @ self.a_frame)

    # -- serialization
    def to_json(self) -> dict:
        return {
            "n": self.n,
            "kind": self.kind,
            "k": self.k,
            "q": self.q,
            "a_element": None if self.a_element is None else matrix_to_json(self.a_element),
            "a_indices": list(self.a_indices),
            "b_indices": list(self.b_indices),
            "basis_rotation": self.rotation.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ABDecomposition":
        basis = gell_mann_basis(int(data["n"]))
        a_el = data.get("a_element")
        return cls(
            basis=basis,
            rotation=np.array(data["basis_rotation"], dtype=float),
            a_indices=tuple(data["a_indices"]),
            b_indices=tuple(data["b_indices"]),
            kind=data.get("kind", "generic"),
            k=data.get("k"),
            q=data.get("q"),
            a_element=None if a_el is None else matrix_from_json(a_el),
        )


def make_generic_ab(basis: LieBasis, a_indices) -> ABDecomposition:
    """Split the canonical basis: the listed indices span A, the rest span B."""
    N = basis.dim
    a = [int(i) for i in a_indices]
    if not a:
        raise InvalidArgument("a_indices must be non-empty")
    if any(i < 0 or i >= N for i in a) or len(set(a)) != len(a):
        raise InvalidArgument(f"a_indices must be distinct and within [0, {N})")
    b = [i for i in range(N) if i not in set(a)]
    return ABDecomposition(basis, np.eye(N), tuple(a), tuple(b), kind="generic")


def make_random_ab(n: int, dim_a: int, seed: int) -> ABDecomposition:
    """Generic decomposition: A spanned by ``dim_a`` Haar-random orthonormal directions."""
    basis = gell_mann_basis(n)
    if not 1 <= dim_a <= basis.dim:
        raise InvalidArgument("dim_a out of range")
    R = ortho_group.rvs(basis.dim, random_state=np.random.default_rng(seed))
    return ABDecomposition(basis, R, tuple(range(dim_a)), tuple(range(dim_a, basis.dim)),
                           kind="generic", notes={"seed": int(seed)})


def verify_controllability(dec: ABDecomposition, policy: NumericPolicy = DEFAULT_POLICY) -> bool:
    """True iff the A subspace generates all of su(n) under brackets."""
    return generated_dimension(list(dec.A_mats), policy) == dec.dim


def project_B(dec: ABDecomposition, X) -> np.ndarray:
    return dec.project_B(X)


# ------------------------------------------------------------------ pseudo-Cartan


@dataclass(frozen=True, eq=False)
class PseudoCartanSplit:
    """Block split ``C^n = C^k + C^(n-k)``: l block-diagonal, p off-diagonal."""

    basis: LieBasis
    l_indices: tuple[int, ...]
    p_indices: tuple[int, ...]
    block_signature: int

    @property
    def n(self) -> int:
        return self.basis.n

    @cached_property
    def l_mats(self) -> np.ndarray:
        return self.basis.elements[list(self.l_indices)]

    @cached_property
    def p_mats(self) -> np.ndarray:
        return self.basis.elements[list(self.p_indices)]

    def closure_residuals(self) -> tuple[float, float, float]:
        """Largest projections violating ``[l,l] in l``, ``[p,p] in l``, ``[p,l] in p``."""
        f = self.basis.f
        L, P = np.array(self.l_indices), np.array(self.p_indices)
        r_ll = np.max(np.abs(f[np.ix_(L, L, P)]), initial=0.0)
        r_pp = np.max(np.abs(f[np.ix_(P, P, P)]), initial=0.0)
        r_pl = np.max(np.abs(f[np.ix_(P, L, L)]), initial=0.0)
        return float(r_ll), float(r_pp), float(r_pl)

    def in_p(self, X, tol: float) -> bool:
        c = self.basis.coefficients(X)
        off = np.delete(c, list(self.p_indices))
        return float(np.linalg.norm(off)) <= tol * max(1.0, float(np.linalg.norm(c)))

    def type1(self) -> ABDecomposition:
        """A = p, B = l.  B is a subalgebra, so the multipliers are conserved."""
        N = self.basis.dim
        return ABDecomposition(self.basis, np.eye(N), self.p_indices, self.l_indices,
                               kind="type1", k=self.block_signature, q=0)


def _pairs(n):
    return [(j, k) for j in range(n) for k in range(j + 1, n)]


def make_pseudo_cartan(n: int, k: int, policy: NumericPolicy = DEFAULT_POLICY) -> PseudoCartanSplit:
    """Pseudo-Cartan split of su(n) for the block structure ``k + (n - k)``."""
    if not 1 <= k < n:
        raise InvalidArgument(f"block size must satisfy 1 <= k < n, got k={k}, n={n}")
    basis = gell_mann_basis(n)
    pairs = _pairs(n)
    npairs = len(pairs)
    p_idx = []
    for m, (j, l) in enumerate(pairs):
        if j < k <= l:
            p_idx += [m, m + npairs]
    p_idx = sorted(p_idx)
    l_idx = [i for i in range(basis.dim) if i not in set(p_idx)]
    split = PseudoCartanSplit(basis, tuple(l_idx), tuple(p_idx), k)
    worst = max(split.closure_residuals())
    if worst > policy.closure:
        raise ConsistencyError(f"pseudo-Cartan closure violated by {worst:.3e}")
    return split


# ------------------------------------------------------------------ centralizers


@dataclass(frozen=True, eq=False)
class CentralizerSplit:
    """Centralizer of a fixed ``p_hat`` inside l, split along the spectrum of ``p_hat``.

    ``components[i]`` holds (as canonical-coordinate rows) the elements of the
    centralizer supported on the i-th eigenspace of ``a_element``, eigenvalues in
    descending order.  ``central`` spans the rest of the centralizer: elements
    that act on several eigenspaces at once.  ``weights[i]`` is the symmetric
    operator on the centralizer coordinates giving the squared weight an element
    carries on eigenspace ``i``; the weights sum to the identity.
    """

    parent: PseudoCartanSplit
    a_element: np.ndarray
    eigenvalues: np.ndarray
    projectors: np.ndarray
    l_a_basis: np.ndarray
    l_perp_basis: np.ndarray
    components: tuple[np.ndarray, ...]
    central: np.ndarray
    weights: np.ndarray
    q: int
    warnings: tuple[str, ...] = ()

    @property
    def Q(self) -> int:
        return len(self.eigenvalues)

    @property
    def basis(self) -> LieBasis:
        return self.parent.basis

    def weight_B(self, q: int | None = None) -> np.ndarray:
        q = self.q if q is None else q
        return self.weights[q:].sum(axis=0)


def _null_and_range(M: np.ndarray, tol: float):
    """Orthonormal bases (rows) of the null space and its complement for columns of ``M``."""
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    scale = max(1.0, s[0] if len(s) else 1.0)
    rank = int(np.sum(s > tol * scale))
    return Vt[rank:], Vt[:rank]


def cluster_eigenvalues(w: np.ndarray, tol: float):
    """Group eigenvalues (descending) whose neighbours differ by at most ``tol``.

    Returns ``(values, groups, ambiguous)`` where ``ambiguous`` flags adjacent
    clusters separated by less than ``10 * tol``.
    """
    order = np.argsort(-w, kind="stable")
    groups: list[list[int]] = []
    for idx in order:
        if groups and abs(w[groups[-1][-1]] - w[idx]) <= tol:
            groups[-1].append(int(idx))
        else:
            groups.append([int(idx)])
    values = np.array([np.mean(w[g]) for g in groups])
    gaps = -np.diff(values)
    ambiguous = bool(np.any(gaps < 10 * tol)) if len(gaps) else False
    return values, groups, ambiguous


def centralizer_split(split: PseudoCartanSplit, p_hat, q: int,
                      policy: NumericPolicy = DEFAULT_POLICY) -> CentralizerSplit:
    """Compute the centralizer of ``p_hat`` in l, its orthogonal complement and
    its per-eigenspace components."""
    p_hat = np.asarray(p_hat, dtype=complex)
    n = split.n
    if p_hat.shape != (n, n) or hermiticity_defect(p_hat) > policy.hermitian_input:
        raise InvalidArgument("p_hat must be a Hermitian n x n matrix")
    if not split.in_p(p_hat, policy.closure):
        raise InvalidArgument("p_hat does not lie in the p subspace")
    basis = split.basis
    L = split.l_mats
    comm = np.einsum("iab,bc->iac", L, p_hat) - np.einsum("ab,ibc->iac", p_hat, L)
    M = np.concatenate([comm.real.reshape(len(L), -1), comm.imag.reshape(len(L), -1)], axis=1).T
    null, rng = _null_and_range(M, policy.pinv_threshold)
    E_l = np.eye(basis.dim)[list(split.l_indices)]
    l_a = null @ E_l
    l_perp = rng @ E_l

    w, V = np.linalg.eigh(p_hat)
    values, groups, ambiguous = cluster_eigenvalues(w, policy.eigen_cluster)
    projectors = np.array([V[:, g] @ V[:, g].conj().T for g in groups])
    Ea = basis.matrix(l_a)
    weights = np.einsum("qab,jbc,qcd,kda->qjk", projectors, Ea, projectors, Ea).real
    weights = 0.5 * (weights + weights.transpose(0, 2, 1))

    Q = len(values)
    if not 0 <= q <= Q:
        raise InvalidArgument(f"q must lie in [0, {Q}], got {q}")
    comps = []
    for i in range(Q):
        ev, vec = np.linalg.eigh(weights[i]) if len(l_a) else (np.zeros(0), np.zeros((0, 0)))
        sel = ev > 1.0 - 1e-9
        comps.append((vec[:, sel].T @ l_a) if len(l_a) else np.zeros((0, basis.dim)))
    pure = np.vstack(comps) if comps else np.zeros((0, basis.dim))
    if len(l_a):
        coords = pure @ l_a.T if len(pure) else np.zeros((1, len(l_a)))
        rest, _ = _null_and_range(coords, 1e-9)
        central = rest @ l_a
    else:
        central = np.zeros((0, basis.dim))

    notes = []
    if ambiguous:
        msg = "eigenvalues of p_hat closer than 10x the clustering tolerance were kept separate"
        notes.append(msg)
        warnings.warn(msg, ClusteringAmbiguityWarning, stacklevel=2)
    return CentralizerSplit(split, p_hat, values, projectors, l_a, l_perp, tuple(comps),
                            central, weights, int(q), tuple(notes))


def build_type_ab(cs: CentralizerSplit, policy: NumericPolicy = DEFAULT_POLICY) -> ABDecomposition:
    """``a = p + l_a^(A)``, ``b = l_perp + l_a^(B)`` with (A) the first ``q`` components.

    The (B) part of the centralizer is the eigenvalue-one eigenspace of the
    summed weight of the components after ``q``.  A ``q`` for which some
    centralizer element straddles (A) and (B) admits no such split and raises.
    """
    basis = cs.basis
    l_a = cs.l_a_basis
    if len(l_a):
        ev, vec = np.linalg.eigh(cs.weight_B())
        ones = ev > 1.0 - 1e-9
        zeros = ev < 1e-9
        if not np.all(ones | zeros):
            bad = ev[~(ones | zeros)]
            raise InvalidArgument(
                f"q={cs.q} splits a centralizer element across the A and B blocks "
                f"(weights {np.round(bad, 6).tolist()}); no AB decomposition realizes it")
        la_A = vec[:, zeros].T @ l_a
        la_B = vec[:, ones].T @ l_a
    else:
        la_A = la_B = np.zeros((0, basis.dim))
    p_rows = np.eye(basis.dim)[list(cs.parent.p_indices)]
    a_rows = np.vstack([p_rows, la_A])
    b_rows = np.vstack([cs.l_perp_basis, la_B])
    R = np.vstack([a_rows, b_rows])
    na = len(a_rows)
    if cs.q == 0:
        kind = "type1"
    elif cs.q == cs.Q:
        kind = "type2"
    else:
        kind = "type_ab"
    return ABDecomposition(basis, R, tuple(range(na)), tuple(range(na, basis.dim)), kind=kind,
                           k=cs.parent.block_signature, q=cs.q, a_element=cs.a_element.copy())
