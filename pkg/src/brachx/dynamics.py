"""Brachistochrone flow: phase-space integration, unitary co-evolution and monitors.

Phase space is ``x = (a, lambda)`` in the orthonormal adapted frame of an
:class:`~brachx.decomposition.ABDecomposition`.  With ``H = sum a_i A_i`` and
``D = sum lambda_j B_j`` the flow is

    d(H + D)/dt = -1j [H, D]

which, in coordinates, is the quadratic system ``dx_k = sum_{i, j in B} f_ijk x_i x_j``.
``||H||``, ``||D||`` and every ``Tr((H + D)^k)`` are conserved, and so is
``U^dagger (H + D) U`` along the co-evolved unitary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._core import _fallback, get_backend
from .decomposition import ABDecomposition
from .io import csv_text
from .policy import DEFAULT_POLICY, IntegrationError, InvalidArgument, NumericPolicy

_STATUS_MSG = {1: "step size underflow", 2: "step budget exhausted"}
_MAX_COMPILED_N = 8
DEFAULT_SAMPLES = 101


@dataclass(frozen=True, eq=False)
class PhaseState:
    dec: ABDecomposition
    a: np.ndarray
    lam: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if a.shape != (self.dec.dim_a,) or lam.shape != (self.dec.dim_b,):
            raise InvalidArgument(
                f"state needs {self.dec.dim_a} Hamiltonian and {self.dec.dim_b} multiplier "
                f"coefficients, got {a.size} and {lam.size}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def from_x(cls, dec: ABDecomposition, x, t: float = 0.0) -> "PhaseState":
        x = np.asarray(x, dtype=float)
        return cls(dec, x[: dec.dim_a], x[dec.dim_a :], t)

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.a, self.lam])

    @property
    def H(self) -> np.ndarray:
        return self.dec.hamiltonian(self.a)

    @property
    def D(self) -> np.ndarray:
        return self.dec.d_operator(self.lam)

    def scaled(self, kappa: float) -> "PhaseState":
        return PhaseState(self.dec, kappa * self.a, kappa * self.lam, self.t)


# ------------------------------------------------------------------ vector field


def field_x(dec: ABDecomposition, x) -> np.ndarray:
    """Vector field on stacked phase-space vectors (trailing axis of length N)."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, dec.dim)
    return _fallback._field_from_dense(dec.dense_field, None, flat).reshape(x.shape)


def rhs(state: PhaseState) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``(da, dlambda)`` from precomputed structure-constant contractions."""
    dx = field_x(state.dec, state.x)
    return dx[: state.dec.dim_a], dx[state.dec.dim_a :]


def rhs_matrix(state: PhaseState) -> np.ndarray:
    """Dense-matrix form ``d(H + D)/dt = -1j [H, D]`` (reference implementation)."""
    H, D = state.H, state.D
    return -1j * (H @ D - D @ H)


# ------------------------------------------------------------------ integration


@dataclass(frozen=True, eq=False)
class BatchSolution:
    """Integration of a batch of initial states sharing one step-size sequence."""

    dec: ABDecomposition
    times: np.ndarray  # (T,)
    X: np.ndarray  # (T, B, N)
    t_steps: np.ndarray  # (S + 1,)
    dense: np.ndarray  # (S, 5, B, N)
    nfev: int

    def evaluate(self, tq) -> np.ndarray:
        """Dense-output interpolation at arbitrary times, shape (M, B, N)."""
        return dense_evaluate(self.t_steps, self.dense, tq)


def dense_evaluate(t_steps, dense, tq) -> np.ndarray:
    tq = np.atleast_1d(np.asarray(tq, dtype=float))
    ts = np.asarray(t_steps)
    if len(ts) < 2:
        raise InvalidArgument("no dense output recorded")
    direction = 1.0 if ts[-1] >= ts[0] else -1.0
    idx = np.searchsorted(direction * ts, direction * tq, side="right") - 1
    idx = np.clip(idx, 0, len(ts) - 2)
    hs = ts[idx + 1] - ts[idx]
    th = ((tq - ts[idx]) / hs)[:, None, None]
    th1 = 1.0 - th
    c = dense[idx]
    return c[:, 0] + th * (c[:, 1] + th1 * (c[:, 2] + th * (c[:, 3] + th1 * c[:, 4])))


def integrate_batch(dec: ABDecomposition, X0, t_eval, tol: float = 1e-10, *, t0: float = 0.0,
                    keep_dense: bool = False, backend=None, max_steps: int = 200000) -> BatchSolution:
    """Integrate B initial vectors ``X0`` (B, N) from ``t0`` to ``t_eval[-1]``."""
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    if X0.shape[1] != dec.dim:
        raise InvalidArgument(f"state vectors need {dec.dim} components")
    t_eval = np.asarray(t_eval, dtype=float)
    be = get_backend(backend) if (backend is None or isinstance(backend, str)) else backend
    qk, qi, qj, qv = dec.field_terms
    y, ts, dense, nfev, status, t_reached = be.dopri5(
        qk, qi, qj, qv, None, np.ascontiguousarray(X0), float(t0), float(t_eval[-1]),
        t_eval, tol, tol, max_steps, keep_dense, 0.0)
    if status != 0:
        raise IntegrationError(_STATUS_MSG.get(int(status), "integration failed"), float(t_reached))
    return BatchSolution(dec, t_eval, np.asarray(y), np.asarray(ts), np.asarray(dense), int(nfev))


@dataclass(frozen=True, eq=False)
class Trajectory:
    dec: ABDecomposition
    times: np.ndarray  # (T,)
    X: np.ndarray  # (T, N)
    unitaries: np.ndarray | None = None  # (T, n, n)
    t_steps: np.ndarray | None = None
    dense: np.ndarray | None = None  # (S, 5, 1, N)
    provenance: str = "ode"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) * np.sign(self.times[-1] - self.times[0]) <= 0) and len(self.times) > 1:
            raise InvalidArgument("sample times must be strictly monotone")

    @property
    def samples(self) -> list[PhaseState]:
        return [PhaseState.from_x(self.dec, x, t) for t, x in zip(self.times, self.X)]

    @property
    def a(self) -> np.ndarray:
        return self.X[:, : self.dec.dim_a]

    @property
    def lam(self) -> np.ndarray:
        return self.X[:, self.dec.dim_a :]

    def x_at(self, tq) -> np.ndarray:
        if self.dense is None:
            raise InvalidArgument("trajectory has no dense output; integrate with keep_dense=True")
        return dense_evaluate(self.t_steps, self.dense, tq)[:, 0]

    def with_unitaries(self, U) -> "Trajectory":
        return Trajectory(self.dec, self.times, self.X, np.asarray(U), self.t_steps, self.dense,
                          self.provenance, dict(self.extra))

    # -- monitors
    @cached_property
    def H(self) -> np.ndarray:
        return self.dec.hamiltonian(self.a)

    @cached_property
    def D(self) -> np.ndarray:
        return self.dec.d_operator(self.lam)

    @property
    def normH(self) -> np.ndarray:
        return np.linalg.norm(self.a, axis=1)

    @property
    def normD(self) -> np.ndarray:
        return np.linalg.norm(self.lam, axis=1)

    @cached_property
    def F(self) -> np.ndarray:
        """``Tr((H + D)^k)`` for k = 2..n, shape (T, n - 1)."""
        M = self.H + self.D
        out = []
        P = M
        for _ in range(2, self.dec.n + 1):
            P = P @ M
            out.append(np.real(np.trace(P, axis1=1, axis2=2)))
        return np.array(out).T

    @property
    def noether(self) -> np.ndarray:
        """``U^dagger (H + D) U`` at every sample."""
        if self.unitaries is None:
            raise InvalidArgument("unitaries not evolved yet")
        U = self.unitaries
        return np.conj(np.swapaxes(U, 1, 2)) @ (self.H + self.D) @ U

    def drift_series(self) -> dict:
        """Relative deviation of each conserved quantity from its initial value, per sample.

        ``F_k`` is normalised by ``||H + D||^k`` so that odd traces that vanish
        initially still yield a meaningful ratio.
        """
        out = {}
        for name, v in (("normH", self.normH), ("normD", self.normD)):
            out[name] = np.abs(v - v[0]) / v[0] if v[0] > 0 else np.abs(v)
        scale = np.sqrt(self.normH[0] ** 2 + self.normD[0] ** 2)
        for j in range(self.F.shape[1]):
            k = j + 2
            ref = scale**k if scale > 0 else 1.0
            out[f"F_{k}"] = np.abs(self.F[:, j] - self.F[0, j]) / ref
        if self.unitaries is not None:
            N = self.noether
            out["noether"] = np.linalg.norm(N - N[0], axis=(1, 2))
        return out

    def drifts(self) -> dict:
        """Largest value of each series of :meth:`drift_series`."""
        return {k: float(np.max(v)) for k, v in self.drift_series().items()}

    def to_csv(self) -> str:
        da, db, n = self.dec.dim_a, self.dec.dim_b, self.dec.n
        fk = [f"F_{k}" for k in range(2, n + 1)]
        ds = self.drift_series()
        drift_cols = ["normH", "normD"] + fk
        header = (["t"] + [f"a_{i}" for i in range(da)] + [f"lambda_{i}" for i in range(db)]
                  + ["normH", "normD"] + fk + [f"{c}_drift" for c in drift_cols] + ["provenance"])
        D = np.column_stack([ds[c] for c in drift_cols])
        rows = [[t, *x, h, d, *f, *dr, self.provenance]
                for t, x, h, d, f, dr in zip(self.times, self.X, self.normH, self.normD, self.F, D)]
        return csv_text(header, rows)

    def unitaries_json(self) -> list:
        from .io import matrix_to_json

        if self.unitaries is None:
            raise InvalidArgument("unitaries not evolved yet")
        return [{"t": float(t), "U": matrix_to_json(U)} for t, U in zip(self.times, self.unitaries)]


def integrate(state0: PhaseState, t_end: float = 1.0, tol: float = 1e-10, t_eval=None,
              n_samples: int = DEFAULT_SAMPLES, keep_dense: bool = True, backend=None) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration of the flow from ``state0``.

    ``tol`` bounds the local error per step (used as both relative and absolute
    tolerance).  Samples default to ``n_samples`` equispaced times.
    """
    if t_eval is None:
        t_eval = np.linspace(state0.t, t_end, n_samples)
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval[0] != state0.t:
        t_eval = np.concatenate([[state0.t], t_eval])
    sol = integrate_batch(state0.dec, state0.x[None], t_eval, tol, t0=state0.t,
                          keep_dense=keep_dense, backend=backend)
    return Trajectory(state0.dec, t_eval, sol.X[:, 0], None,
                      sol.t_steps if keep_dense else None, sol.dense if keep_dense else None)


# ------------------------------------------------------------------ unitary evolution

_GAUSS = np.sqrt(3.0) / 6.0


def _propagate(G, U0, record, backend=None):
    be = get_backend(backend) if (backend is None or isinstance(backend, str)) else backend
    if G.shape[-1] > _MAX_COMPILED_N:
        be = _fallback
    return be.propagate(np.ascontiguousarray(G), np.ascontiguousarray(U0), np.asarray(record, bool))


def ordered_exponential(generator, times, substeps: int, method: str = "magnus4", U0=None,
                        backend=None) -> np.ndarray:
    """Time-ordered ``exp(-1j int G(t) dt)`` recorded at ``times``.

    ``generator`` maps an array of times (M,) to Hermitian matrices (M, B, n, n).
    Each sample interval is split into ``substeps`` equal steps.
    """
    times = np.asarray(times, dtype=float)
    m = int(substeps)
    starts = times[:-1, None] + np.diff(times)[:, None] * (np.arange(m) / m)[None, :]
    h = np.repeat(np.diff(times) / m, m)
    starts = starts.ravel()
    if method == "magnus4":
        nodes = np.stack([starts + h * (0.5 - _GAUSS), starts + h * (0.5 + _GAUSS)], axis=1)
        Gn = generator(nodes.ravel())
        K = len(starts)
        Gn = Gn.reshape((K, 2) + Gn.shape[1:])
        G = _fallback.magnus4_generators(Gn[:, 0], Gn[:, 1], h[:, None])
    elif method == "midpoint":
        G = _fallback.midpoint_generators(generator(starts + 0.5 * h), h[:, None])
    else:
        raise InvalidArgument(f"unknown propagation method {method!r}")
    B, n = G.shape[1], G.shape[-1]
    if U0 is None:
        U0 = np.broadcast_to(np.eye(n, dtype=complex), (B, n, n))
    record = np.zeros(len(starts) + 1, bool)
    record[::m] = True
    return _propagate(G, U0, record, backend)


def refined_ordered_exponential(generator, times, tol: float = 1e-9, method: str = "magnus4",
                                start: int = 1, max_substeps: int = 1 << 14, backend=None):
    """Double the substep count until successive levels agree within ``tol`` (Frobenius).

    Returns ``(U, substeps, residual)`` using the finer level.
    """
    m = max(1, int(start))
    prev = ordered_exponential(generator, times, m, method, backend=backend)
    while True:
        m2 = 2 * m
        cur = ordered_exponential(generator, times, m2, method, backend=backend)
        res = float(np.max(np.linalg.norm(cur - prev, axis=(-2, -1))))
        if res <= tol or m2 >= max_substeps:
            return cur, m2, res
        prev, m = cur, m2


def _hamiltonian_generator(dec: ABDecomposition, xfun, sign: float = 1.0, part: str = "H"):
    def gen(tq):
        x = xfun(tq)  # (M, B, N)
        if part == "H":
            return sign * dec.hamiltonian(x[..., : dec.dim_a])
        return sign * dec.d_operator(x[..., dec.dim_a :])

    return gen


def evolve_unitary(traj: Trajectory, tol: float | None = None, method: str = "magnus4",
                   policy: NumericPolicy = DEFAULT_POLICY, backend=None) -> Trajectory:
    """Solve ``i dU/dt = H(t) U`` with ``U(0) = 1`` on the sample grid of ``traj``.

    Steps are geometric (products of exponentials of Hermitian generators), so
    unitarity holds to rounding.  The grid is refined until two successive
    levels agree within ``tol``.
    """
    tol = policy.unitary_refine if tol is None else tol
    if traj.dense is None:
        raise InvalidArgument("unitary evolution needs dense output")
    gen = _hamiltonian_generator(traj.dec, lambda tq: dense_evaluate(traj.t_steps, traj.dense, tq), 1.0, "H")
    U, m, res = refined_ordered_exponential(gen, traj.times, tol, method, backend=backend)
    out = traj.with_unitaries(U[:, 0])
    out.extra.update(unitary_substeps=m, unitary_residual=res)
    return out


def evolve_minus_D(traj: Trajectory, tol: float | None = None, method: str = "magnus4",
                   policy: NumericPolicy = DEFAULT_POLICY, backend=None) -> np.ndarray:
    """Solve ``i dV/dt = -D(t) V`` with ``V(0) = 1``; returns V at the sample times."""
    tol = policy.unitary_refine if tol is None else tol
    if traj.dense is None:
        raise InvalidArgument("unitary evolution needs dense output")
    gen = _hamiltonian_generator(traj.dec, lambda tq: dense_evaluate(traj.t_steps, traj.dense, tq), -1.0, "D")
    U, _, _ = refined_ordered_exponential(gen, traj.times, tol, method, backend=backend)
    return U[:, 0]


def batch_unitaries(sol: BatchSolution, times=None, tol: float = 1e-9, method: str = "magnus4",
                    backend=None) -> np.ndarray:
    """Unitaries for every member of a batch solution, shape (T, B, n, n)."""
    if sol.dense is None or len(sol.dense) == 0:
        raise InvalidArgument("unitary evolution needs dense output")
    times = sol.times if times is None else np.asarray(times, float)
    gen = _hamiltonian_generator(sol.dec, sol.evaluate, 1.0, "H")
    U, _, _ = refined_ordered_exponential(gen, times, tol, method, backend=backend)
    return U


def factorization_residual(traj: Trajectory, V=None) -> np.ndarray:
    """``|| U(t) - V(t) exp(-1j (H(0) + D(0)) t) ||_F`` along the samples."""
    if V is None:
        V = evolve_minus_D(traj)
    M0 = traj.H[0] + traj.D[0]
    w, v = np.linalg.eigh(M0)
    dt = traj.times - traj.times[0]
    E = (v[None] * np.exp(-1j * w[None, :] * dt[:, None])[:, None, :]) @ v.conj().T
    return np.linalg.norm(traj.unitaries - V @ E, axis=(1, 2))


def unitary_field_terms(dec: ABDecomposition):
    """Quadratic COO terms of the flow augmented by ``(Re U, Im U)``.

    ``1j dU/dt = H U`` is bilinear in ``(a, U)``, so the augmented system keeps
    the quadratic form and runs through the same Runge-Kutta kernel.
    Augmented layout: ``x`` (N), then ``Re U`` and ``Im U`` row-major.
    """
    cached = dec.notes.get("_unitary_terms")
    if cached is not None:
        return cached
    N, n, na = dec.dim, dec.n, dec.dim_a
    A = dec.A_mats
    off_r, off_i = N, N + n * n
    k_, i_, j_, v_ = [list(t) for t in dec.field_terms]
    # dUr = Hr Ui + Hi Ur ;  dUi = -Hr Ur + Hi Ui
    for a in range(na):
        Ar, Ai = A[a].real, A[a].imag
        for p in range(n):
            for m in range(n):
                for q in range(n):
                    row_r, row_i = off_r + p * n + q, off_i + p * n + q
                    col_r, col_i = off_r + m * n + q, off_i + m * n + q
                    if Ar[p, m] != 0.0:
                        k_ += [row_r, row_i]
                        i_ += [a, a]
                        j_ += [col_i, col_r]
                        v_ += [Ar[p, m], -Ar[p, m]]
                    if Ai[p, m] != 0.0:
                        k_ += [row_r, row_i]
                        i_ += [a, a]
                        j_ += [col_r, col_i]
                        v_ += [Ai[p, m], Ai[p, m]]
    terms = (np.array(k_, np.int64), np.array(i_, np.int64), np.array(j_, np.int64), np.array(v_, float))
    dec.notes["_unitary_terms"] = terms
    return terms


def integrate_with_unitary(dec: ABDecomposition, X0, t_eval, tol: float = 1e-10, *, backend=None,
                           max_steps: int = 200000) -> tuple[np.ndarray, np.ndarray]:
    """Integrate states and their unitaries together, shapes (T, B, N) and (T, B, n, n).

    The unitary rides along in the Runge-Kutta state, so its accuracy (and its
    departure from unitarity) is controlled by ``tol``.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    B, N, n = X0.shape[0], dec.dim, dec.n
    Z0 = np.zeros((B, N + 2 * n * n))
    Z0[:, :N] = X0
    Z0[:, N : N + n * n] = np.eye(n).ravel()
    t_eval = np.asarray(t_eval, dtype=float)
    be = get_backend(backend) if (backend is None or isinstance(backend, str)) else backend
    qk, qi, qj, qv = unitary_field_terms(dec)
    y, _, _, _, status, t_reached = be.dopri5(qk, qi, qj, qv, None, Z0, float(t_eval[0]),
                                              float(t_eval[-1]), t_eval, tol, tol, max_steps, False, 0.0)
    if status != 0:
        raise IntegrationError(_STATUS_MSG.get(int(status), "integration failed"), float(t_reached))
    y = np.asarray(y)
    U = (y[..., N : N + n * n] + 1j * y[..., N + n * n :]).reshape(len(t_eval), B, n, n)
    return y[..., :N], U


def cost(state0: PhaseState) -> float:
    """Protocol cost ``||H(0)||_F``; the flow keeps ``||H||`` constant on [0, 1]."""
    return float(np.linalg.norm(state0.a))


def final_unitary(dec: ABDecomposition, x0, tol: float = 1e-10, t_end: float = 1.0,
                  method: str = "fused", unitary_tol: float = 1e-9, backend=None) -> np.ndarray:
    """``U(t_end)`` generated from the phase-space point ``x0``.

    ``method="fused"`` integrates the unitary inside the Runge-Kutta state (fast,
    used by the optimizers); ``"magnus4"`` / ``"midpoint"`` use the refined
    geometric stepper on the dense output.
    """
    x0 = np.asarray(x0, float)[None]
    if method == "fused":
        _, U = integrate_with_unitary(dec, x0, np.array([0.0, t_end]), tol, backend=backend)
        return U[-1, 0]
    times = np.linspace(0.0, t_end, 9)
    sol = integrate_batch(dec, x0, times, tol, keep_dense=True, backend=backend)
    return batch_unitaries(sol, tol=unitary_tol, method=method, backend=backend)[-1, 0]
