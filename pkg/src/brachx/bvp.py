"""Boundary-value problem ``U(1) = U_d``: cost, multi-start simplex search, statistics.

The search vector is the initial phase-space point ``x = (a(0), lambda(0))``.
Its cost is ``C(x) = || Log(U_d^dagger U(x, 1)) ||_F`` with the principal
logarithm; targets whose residual has an eigenphase on the branch cut get the
finite sentinel ``2 pi sqrt(n)``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import leastsq, minimize
from scipy.stats import unitary_group

from .decomposition import ABDecomposition
from .dynamics import PhaseState, final_unitary
from .integrable import type1_defect
from .io import child_rng, csv_text, matrix_to_json
from .lie_algebra import eigenphases, expm, gell_mann_basis, log_norm, logm_principal
from .policy import DEFAULT_POLICY, BranchCutError, InvalidArgument, NumericPolicy

SUCCESS_THRESHOLD = 1e-6
LOCAL_METHODS = ("simplex", "lm")


def branch_sentinel(n: int) -> float:
    return float(2.0 * np.pi * np.sqrt(n))


def residual_cost(target, U, policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """``|| Log(target^dagger U) ||_F`` or the branch sentinel."""
    try:
        return log_norm(np.conj(target).T @ U, policy)
    except BranchCutError:
        return branch_sentinel(U.shape[0])


def residual_vector(target, U, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Coordinates of ``1j Log(target^dagger U)``: traceless part, then the scaled trace.

    Its Euclidean norm equals :func:`residual_cost`.
    """
    n = U.shape[0]
    basis = gell_mann_basis(n)
    try:
        theta, V = eigenphases(np.conj(target).T @ U, policy)
    except BranchCutError:
        return np.full(basis.dim + 1, branch_sentinel(n) / np.sqrt(basis.dim + 1))
    phase = float(np.mean(theta))
    H = (V * (theta - phase)) @ V.conj().T
    return np.concatenate([basis.coefficients(H), [phase * np.sqrt(n)]])


def random_target(n: int, seed: int) -> np.ndarray:
    """Haar-random element of SU(n)."""
    U = unitary_group.rvs(n, random_state=np.random.default_rng(seed))
    return U / np.linalg.det(U) ** (1.0 / n)


def cost_C(x: PhaseState, target, tol: float = 1e-10, policy: NumericPolicy = DEFAULT_POLICY,
           backend=None) -> float:
    """Integrate from ``x`` over [0, 1] and measure the distance of ``U(1)`` to ``target``."""
    U = final_unitary(x.dec, x.x, tol, backend=backend)
    return residual_cost(np.asarray(target), U, policy)


def type1_forward(dec: ABDecomposition, x) -> np.ndarray:
    """Closed-form ``U(1) = exp(1j D) exp(-1j (H + D))`` for constant multipliers."""
    x = np.asarray(x, dtype=float)
    H = dec.hamiltonian(x[: dec.dim_a])
    D = dec.d_operator(x[dec.dim_a :])
    return expm(D, -1.0) @ expm(H + D, 1.0)


@dataclass(frozen=True, eq=False)
class BvpProblem:
    dec: ABDecomposition
    target: np.ndarray
    integration_tol: float = 1e-10
    optimizer_budget: int = 2000
    n_starts: int = 20
    seed: int = 0
    start_norm: float | None = None  # default: ||Log(target)||, or 1 at the identity
    forward: str = "ode"  # or "type1"
    method: str = "simplex"  # or "lm"

    def __post_init__(self):
        T = np.asarray(self.target, dtype=complex)
        n = self.dec.n
        if T.shape != (n, n) or np.linalg.norm(T @ T.conj().T - np.eye(n)) > 1e-8:
            raise InvalidArgument("target must be a unitary matching the decomposition dimension")
        if self.optimizer_budget < 0 or self.n_starts < 1:
            raise InvalidArgument("budget must be >= 0 and n_starts >= 1")
        if self.forward not in ("ode", "type1"):
            raise InvalidArgument(f"unknown forward map {self.forward!r}")
        if self.method not in LOCAL_METHODS:
            raise InvalidArgument(f"unknown local method {self.method!r}; have {LOCAL_METHODS}")
        object.__setattr__(self, "target", T)
        if self.start_norm is None:
            try:
                r = float(np.linalg.norm(logm_principal(T)[0]))
            except BranchCutError:
                r = branch_sentinel(n)
            object.__setattr__(self, "start_norm", r if r > 1e-12 else 1.0)
        elif not self.start_norm > 0:
            raise InvalidArgument("start_norm must be positive")

    def forward_unitary(self, x) -> np.ndarray:
        if self.forward == "type1":
            return type1_forward(self.dec, x)
        return final_unitary(self.dec, x, self.integration_tol)

    def cost(self, x) -> float:
        return residual_cost(self.target, self.forward_unitary(x))

    def residual(self, x) -> np.ndarray:
        return residual_vector(self.target, self.forward_unitary(x))

    def start(self, index: int) -> np.ndarray:
        """Start vector of the given index: isotropic Gaussian scaled to ``start_norm``."""
        rng = start_rng(self.seed, index)
        v = rng.standard_normal(self.dec.dim)
        return self.start_norm * v / np.linalg.norm(v)


def start_rng(seed: int, index: int) -> np.random.Generator:
    """Child generator for one start, independent of scheduling."""
    return child_rng(seed, index)


@dataclass(frozen=True, eq=False)
class StartResult:
    index: int
    x0: np.ndarray
    x: np.ndarray
    cost: float
    evaluations: int


@dataclass(frozen=True, eq=False)
class BvpResult:
    best_x: PhaseState
    best_cost: float
    final_costs: np.ndarray
    evaluations_used: np.ndarray
    starts: tuple = field(default=(), repr=False)

    def success_fraction(self, threshold: float = SUCCESS_THRESHOLD) -> float:
        return float(np.mean(self.final_costs < threshold))

    def brachistochrone(self, threshold: float = SUCCESS_THRESHOLD) -> StartResult | None:
        """Among starts that solved the problem, the one of least protocol cost ``||a||``."""
        ok = [s for s in self.starts if s.cost < threshold]
        if not ok:
            return None
        na = self.best_x.dec.dim_a
        return min(ok, key=lambda s: (float(np.linalg.norm(s.x[:na])), s.index))

    def to_json(self) -> dict:
        return {
            "best_cost": self.best_cost,
            "best_x": self.best_x.x.tolist(),
            "final_costs": self.final_costs.tolist(),
            "evaluations_used": self.evaluations_used.tolist(),
            "success_threshold": SUCCESS_THRESHOLD,
            "success_fraction": self.success_fraction(),
        }

    def costs_csv(self) -> str:
        rows = [[i, c, np.log10(max(c, 1e-300)), e]
                for i, (c, e) in enumerate(zip(self.final_costs, self.evaluations_used))]
        return csv_text(["start", "cost", "log10_cost", "evaluations"], rows)


def _simplex_search(fun, x0: np.ndarray, budget: int, scale: float) -> tuple[np.ndarray, float, int]:
    """Budget-capped Nelder-Mead, restarted from the incumbent.

    Near a regular solution the cost grows linearly with the distance, so each
    restart uses a simplex edge equal to the current cost; a restart that does
    not improve shrinks the edge tenfold, and two such failures in a row stop.
    """
    best_x = np.asarray(x0, float).copy()
    best_f = fun(best_x)
    used = 1
    step, failures = scale, 0
    dim = len(best_x)
    while used < budget and best_f > 0.0 and failures < 2:
        simplex = np.vstack([best_x, best_x + step * np.eye(dim)])
        res = minimize(fun, best_x, method="Nelder-Mead",
                       options={"maxfev": budget - used, "xatol": 0.0, "fatol": 0.0,
                                "adaptive": True, "initial_simplex": simplex})
        used += int(res.nfev)
        if res.fun < best_f:
            best_x, best_f = np.asarray(res.x, float), float(res.fun)
            step, failures = min(scale, best_f), 0
        else:
            step, failures = 0.1 * step, failures + 1
    return best_x, float(best_f), used


class _BudgetExhausted(Exception):
    pass


def _lm_search(res_fun, x0: np.ndarray, budget: int) -> tuple[np.ndarray, float, int]:
    """Levenberg-Marquardt on the residual vector with forward-difference Jacobians.

    Every residual evaluation, including those spent on Jacobians, counts
    against ``budget``; the best point seen is returned when it runs out.  The
    initial step bound is kept small (``factor=0.1``) because the forward map
    is nearly flat in the multiplier directions close to the identity and a
    large first step lands on a far, poorly conditioned branch.
    """
    best = [np.asarray(x0, float).copy(), np.inf]
    used = [0]

    def wrapped(x):
        if used[0] >= budget:
            raise _BudgetExhausted
        used[0] += 1
        r = res_fun(x)
        nr = float(np.linalg.norm(r))
        if nr < best[1]:
            best[0], best[1] = np.array(x, float), nr
        return r

    try:
        leastsq(wrapped, best[0].copy(), maxfev=budget, ftol=1e-15, xtol=1e-15, gtol=0.0,
                epsfcn=1e-14, factor=0.1)
    except _BudgetExhausted:
        pass
    return best[0], best[1], used[0]


def _run_start(args) -> StartResult:
    prob, index = args
    x0 = prob.start(index)
    if prob.optimizer_budget == 0:
        return StartResult(index, x0, x0, prob.cost(x0), 1)
    if prob.method == "lm":
        x, c, used = _lm_search(prob.residual, x0, prob.optimizer_budget)
    else:
        x, c, used = _simplex_search(prob.cost, x0, prob.optimizer_budget,
                                     0.1 * max(prob.start_norm, 1e-3))
    return StartResult(index, x0, x, c, used)


def _gather(prob: BvpProblem, results) -> BvpResult:
    results = sorted(results, key=lambda r: r.index)
    costs = np.array([r.cost for r in results])
    evals = np.array([r.evaluations for r in results])
    b = int(np.argmin(costs))
    return BvpResult(PhaseState.from_x(prob.dec, results[b].x), float(costs[b]), costs, evals,
                     tuple(results))


def solve_multistart(prob: BvpProblem, workers: int = 1) -> BvpResult:
    """Independent simplex searches from ``n_starts`` seeded starts.

    Each start draws from its own child generator, so the set of results does
    not depend on ``workers``.
    """
    tasks = [(prob, i) for i in range(prob.n_starts)]
    if workers <= 1:
        results = [_run_start(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_start, tasks))
    return _gather(prob, results)


def type1_algebraic_solve(target, dec: ABDecomposition, seed: int = 0, n_starts: int = 20,
                          budget: int = 4000, start_norm: float | None = None, workers: int = 1,
                          method: str = "simplex", policy: NumericPolicy = DEFAULT_POLICY) -> BvpResult:
    """Multi-start search on the closed-form Type I forward map (no ODE integration)."""
    if type1_defect(dec) > policy.closure:
        raise InvalidArgument("type1_algebraic_solve needs a Type I decomposition")
    target = np.asarray(target, dtype=complex)
    if dec.dim_b == 0:
        H, _ = logm_principal(target, policy)
        x = dec.coordinates(H)
        c = residual_cost(target, type1_forward(dec, x), policy)
        return BvpResult(PhaseState.from_x(dec, x), c, np.array([c]), np.array([1]))
    prob = BvpProblem(dec, target, optimizer_budget=budget, n_starts=n_starts, seed=seed,
                      start_norm=start_norm, forward="type1", method=method)
    return solve_multistart(prob, workers)


def problem_to_json(prob: BvpProblem) -> dict:
    return {
        "decomposition": prob.dec.to_json(),
        "target": matrix_to_json(prob.target),
        "integration_tol": prob.integration_tol,
        "optimizer_budget": prob.optimizer_budget,
        "n_starts": prob.n_starts,
        "seed": prob.seed,
        "start_norm": prob.start_norm,
        "forward": prob.forward,
        "method": prob.method,
    }
