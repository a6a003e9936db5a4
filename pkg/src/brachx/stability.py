"""Stability experiments: trajectory and unitary divergence, Lyapunov fits, F-measure.

Perturbations are drawn per index from child generators of the run seed, and
integrated in fixed-size chunks that share one step sequence with their own
copy of the reference trajectory.  Chunk membership depends only on the index,
so results do not depend on how chunks are scheduled across workers.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bvp import residual_cost
from .decomposition import ABDecomposition
from .dynamics import PhaseState, final_unitary, integrate_batch, integrate_with_unitary
from .io import child_rng, csv_text
from .lie_algebra import log_norm
from .policy import DEFAULT_POLICY, BranchCutError, IntegrationError, InvalidArgument

DEFAULT_REL_D = 1e-6
MAX_REL_D = 0.01
R2_THRESHOLD = 0.98
CHUNK = 25
FMEASURE_PRECONDITION = 1e-6


def default_grid(m: int = 51) -> np.ndarray:
    return np.linspace(0.0, 1.0, m)


@dataclass(frozen=True, eq=False)
class DivergenceRun:
    """Reference point, perturbation size and count, sample times, seed."""
    x0: PhaseState
    d_norm: float | None = None
    n_perturbations: int = 200
    t_grid: np.ndarray = field(default_factory=default_grid)
    seed: int = 0
    tol: float = 1e-10
    max_rel_d: float = MAX_REL_D

    def __post_init__(self):
        nx = float(np.linalg.norm(self.x0.x))
        d = DEFAULT_REL_D * nx if self.d_norm is None else float(self.d_norm)
        if not d > 0.0:
            raise InvalidArgument("d_norm must be positive (and x0 nonzero for the default)")
        if d > self.max_rel_d * nx:
            raise InvalidArgument(f"d_norm={d:g} exceeds {self.max_rel_d:g} * ||x0|| = {self.max_rel_d * nx:g}")
        if self.n_perturbations < 1:
            raise InvalidArgument("n_perturbations must be >= 1")
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0) or t[-1] > 1.0:
            raise InvalidArgument("t_grid must increase strictly from 0 and stay within [0, 1]")
        object.__setattr__(self, "d_norm", d)
        object.__setattr__(self, "t_grid", t)

    @property
    def dec(self) -> ABDecomposition:
        return self.x0.dec

    def perturbation(self, index: int) -> np.ndarray:
        """Isotropic Gaussian direction of index ``index``, scaled to ``d_norm``."""
        v = child_rng(self.seed, index).standard_normal(self.dec.dim)
        return self.d_norm * v / np.linalg.norm(v)

    def chunks(self) -> list[range]:
        P = self.n_perturbations
        return [range(s, min(s + CHUNK, P)) for s in range(0, P, CHUNK)]


@dataclass(frozen=True, eq=False)
class DivergenceCurve:
    """Per-perturbation curves plus their mean and log-mean.

    ``samples`` has shape (retained, T); ``indices`` names the retained
    perturbations; ``excluded`` counts per time the samples left out of the
    mean (branch-cut sentinel for unitary divergence).
    """
    times: np.ndarray
    samples: np.ndarray
    indices: np.ndarray
    dropped: int
    excluded: np.ndarray
    measure: str = "E"

    @property
    def retained(self) -> int:
        return int(self.samples.shape[0])

    @property
    def retention(self) -> float:
        total = self.retained + self.dropped
        return self.retained / total if total else 0.0

    @property
    def mean(self) -> np.ndarray:
        return np.nanmean(self.samples, axis=0) if self.retained else np.full(len(self.times), np.nan)

    @property
    def log_mean(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.nanmean(np.log(self.samples), axis=0)

    def to_csv(self) -> str:
        m = self.measure
        rows = [[t, a, b, int(self.retained - e), int(e)]
                for t, a, b, e in zip(self.times, self.mean, self.log_mean, self.excluded)]
        return csv_text(["t", f"mean_{m}", f"mean_log_{m}", "n_used", "n_excluded"], rows)


def _chunk_divergence(run: DivergenceRun, idx: range):
    """E samples for one chunk; members that fail alone are dropped."""
    dec, x0 = run.dec, run.x0.x
    D = np.array([run.perturbation(i) for i in idx])
    X0 = np.vstack([x0, x0 + D])
    try:
        X = integrate_batch(dec, X0, run.t_grid, run.tol, keep_dense=False).X
        return _e_from_batch(X, range(1, len(X0))), list(idx), 0
    except IntegrationError:
        pass
    out, kept = [], []
    for i, d in zip(idx, D):
        try:
            X = integrate_batch(dec, np.vstack([x0, x0 + d]), run.t_grid, run.tol, keep_dense=False).X
        except IntegrationError:
            continue
        out.append(_e_from_batch(X, [1])[0])
        kept.append(i)
    return np.array(out).reshape(len(kept), len(run.t_grid)), kept, len(idx) - len(kept)


def _e_from_batch(X, members) -> np.ndarray:
    # normalised by the realised initial offset so that E(0) = 1 exactly
    diff = X[:, list(members), :] - X[:, :1, :]
    return (np.linalg.norm(diff, axis=2) / np.linalg.norm(diff[0], axis=1)).T


def _chunk_unitary(run: DivergenceRun, idx: range):
    dec, x0 = run.dec, run.x0.x
    D = np.array([run.perturbation(i) for i in idx])
    try:
        _, U = integrate_with_unitary(dec, np.vstack([x0, x0 + D]), run.t_grid, run.tol)
        blocks = [(list(idx), U)]
    except IntegrationError:
        blocks = []
        for i, d in zip(idx, D):
            try:
                _, U = integrate_with_unitary(dec, np.vstack([x0, x0 + d]), run.t_grid, run.tol)
            except IntegrationError:
                continue
            blocks.append(([i], U))
    rows, kept = [], []
    for ids, U in blocks:
        for j, i in enumerate(ids, start=1):
            o = np.empty(len(run.t_grid))
            for k in range(len(run.t_grid)):
                try:
                    o[k] = log_norm(U[k, 0].conj().T @ U[k, j], DEFAULT_POLICY)
                except BranchCutError:
                    o[k] = np.nan
            rows.append(o)
            kept.append(i)
    return np.array(rows).reshape(len(kept), len(run.t_grid)), kept, len(idx) - len(kept)


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*tasks)))


def _collect(run: DivergenceRun, parts, measure: str) -> DivergenceCurve:
    samples = [p[0] for p in parts if len(p[1])]
    S = np.vstack(samples) if samples else np.empty((0, len(run.t_grid)))
    indices = np.array([i for p in parts for i in p[1]], dtype=int)
    dropped = sum(p[2] for p in parts)
    excluded = np.isnan(S).sum(axis=0)
    return DivergenceCurve(run.t_grid, S, indices, dropped, excluded, measure)


def divergence_E(run: DivergenceRun, workers: int = 1) -> DivergenceCurve:
    """``E(t) = ||x'(t) - x(t)|| / ||d||`` over the run's perturbations."""
    parts = _map(_chunk_divergence, [(run, c) for c in run.chunks()], workers)
    return _collect(run, parts, "E")


def unitary_divergence_O(run: DivergenceRun, workers: int = 1) -> DivergenceCurve:
    """``O(t) = ||Log(U(x0, t)^dagger U(x0 + d, t))||_F``; branch-cut samples are excluded and counted."""
    parts = _map(_chunk_unitary, [(run, c) for c in run.chunks()], workers)
    return _collect(run, parts, "O")


# ---------------------------------------------------------------- fits


def _window_fits(t, y):
    """Slope, intercept and r^2 of least-squares lines over every window [i, j]."""
    m = len(t)
    c = lambda v: np.concatenate([[0.0], np.cumsum(v)])
    St, Sy, Stt, Sty, Syy = c(t), c(y), c(t * t), c(t * y), c(y * y)
    i, j = np.triu_indices(m, 1)
    n = (j - i + 1).astype(float)
    st, sy = St[j + 1] - St[i], Sy[j + 1] - Sy[i]
    vtt = (Stt[j + 1] - Stt[i]) - st * st / n
    vty = (Sty[j + 1] - Sty[i]) - st * sy / n
    vyy = (Syy[j + 1] - Syy[i]) - sy * sy / n
    slope = vty / vtt
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(vyy > 1e-300, vty * vty / (vtt * vyy), 1.0)
    return i, j, slope, r2


def fit_exponent(times, E, r2_min: float = R2_THRESHOLD, min_fraction: float = 0.5):
    """Slope of ``log E`` over the largest contiguous window with ``r^2 >= r2_min``.

    Windows shorter than ``min_fraction`` of the grid are not considered.
    Among equally long windows the best ``r^2`` wins.  If none qualifies the
    best minimal-length window is reported, with its (low) ``r^2``.

    Returns ``(slope, (t_lo, t_hi), r2)``.
    """
    t = np.asarray(times, float)
    y = np.log(np.asarray(E, float))
    ok = np.isfinite(y)
    t, y = t[ok], y[ok]
    m = len(t)
    if m < 3:
        raise InvalidArgument("need at least three finite samples to fit an exponent")
    i, j, slope, r2 = _window_fits(t, y)
    length = j - i + 1
    need = max(3, int(np.ceil(min_fraction * m)))
    good = (length >= need) & (r2 >= r2_min)
    if np.any(good):
        longest = length[good].max()
        cand = np.flatnonzero(good & (length == longest))
    else:
        cand = np.flatnonzero(length == need)
    b = cand[np.argmax(r2[cand])]
    return float(slope[b]), (float(t[i[b]]), float(t[j[b]])), float(r2[b])


def linear_through_origin(times, O, fraction: float = 0.1):
    """Fit ``O = c t`` over the first ``fraction`` of the grid; returns ``(c, r2)``.

    ``r2`` is the uncentred coefficient of determination, appropriate for a
    fit without intercept.
    """
    t = np.asarray(times, float)
    O = np.asarray(O, float)
    k = max(3, int(np.ceil(fraction * len(t))))
    tt, oo = t[:k], O[:k]
    c = float(tt @ oo / (tt @ tt))
    ss = float(oo @ oo)
    r2 = 1.0 - float(np.sum((oo - c * tt) ** 2)) / ss if ss > 0 else 1.0
    return c, r2


def changepoint(times, O, fraction: float = 0.1, departure: float = 0.1) -> float:
    """Time where ``O`` leaves its initial linear growth.

    The slope ``c`` comes from :func:`linear_through_origin`; the changepoint is
    the first crossing of ``|O / (c t) - 1| = departure``, interpolated
    linearly between grid points (``inf`` if it never happens).
    """
    t = np.asarray(times, float)
    O = np.asarray(O, float)
    c, _ = linear_through_origin(t, O, fraction)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.abs(O / (c * t) - 1.0)
    prev = 0.0
    for k in range(1, len(t)):
        if not np.isfinite(dev[k]):
            continue
        if dev[k] >= departure:
            if k == 1 or dev[k] == prev:
                return float(t[k])
            return float(t[k - 1] + (departure - prev) * (t[k] - t[k - 1]) / (dev[k] - prev))
        prev = dev[k]
    return float("inf")


# ---------------------------------------------------------------- Lyapunov


@dataclass(frozen=True, eq=False)
class LyapunovSample:
    x0: PhaseState
    exponent: float
    fit_window: tuple
    fit_r2: float
    index: int = 0
    dropped: int = 0

    def __post_init__(self):
        if abs(np.linalg.norm(self.x0.x) - 1.0) > 1e-12:
            raise InvalidArgument("LyapunovSample needs a unit-norm x0")

    @property
    def acceptable(self) -> bool:
        return self.fit_r2 >= R2_THRESHOLD


def lyapunov_fit(x0: PhaseState, seed: int = 0, n_perturbations: int = 16, t_grid=None,
                 d_norm=None, tol: float = 1e-10, workers: int = 1):
    """Exponent of the mean divergence ``E(t)`` from ``x0`` of any norm.

    Returns ``(exponent, window, r2, curve)``.
    """
    run = DivergenceRun(x0, d_norm, n_perturbations, default_grid() if t_grid is None else t_grid,
                        seed, tol)
    curve = divergence_E(run, workers)
    s, w, r2 = fit_exponent(curve.times, curve.mean)
    return s, w, r2, curve


def lyapunov_exponent(x0: PhaseState, dec: ABDecomposition | None = None, seed: int = 0,
                      n_perturbations: int = 16, t_grid=None, tol: float = 1e-10,
                      index: int = 0) -> LyapunovSample:
    """Fitted divergence exponent for a unit-norm ``x0``."""
    if dec is not None and dec is not x0.dec:
        x0 = PhaseState.from_x(dec, x0.x)
    s, w, r2, curve = lyapunov_fit(x0, seed, n_perturbations, t_grid, None, tol)
    return LyapunovSample(x0, s, w, r2, index, curve.dropped)


def unit_state(dec: ABDecomposition, rng: np.random.Generator) -> PhaseState:
    """Isotropic unit-norm state: standard normal coefficients, normalised."""
    v = rng.standard_normal(dec.dim)
    return PhaseState.from_x(dec, v / np.linalg.norm(v))


def _distribution_item(dec, seed, index, n_perturbations, t_grid, tol):
    x0 = unit_state(dec, child_rng(seed, 0, index))
    # perturbation stream keyed separately from the state stream
    s, w, r2, curve = lyapunov_fit(x0, int(child_rng(seed, 1, index).integers(2**63)),
                                   n_perturbations, t_grid, None, tol)
    return LyapunovSample(x0, s, w, r2, index, curve.dropped)


def lyapunov_distribution(dec: ABDecomposition, n_samples: int, seed: int = 0,
                          n_perturbations: int = 8, t_grid=None, tol: float = 1e-10,
                          workers: int = 1) -> list[LyapunovSample]:
    """Exponents of ``n_samples`` isotropic unit-norm states, in index order."""
    if n_samples < 1:
        raise InvalidArgument("n_samples must be >= 1")
    grid = default_grid() if t_grid is None else np.asarray(t_grid, float)
    tasks = [(dec, seed, i, n_perturbations, grid, tol) for i in range(n_samples)]
    return _map(_distribution_item, tasks, workers)


def samples_csv(samples) -> str:
    rows = [[s.index, s.exponent, s.fit_window[0], s.fit_window[1], s.fit_r2, s.dropped]
            for s in samples]
    return csv_text(["index", "exponent", "t_lo", "t_hi", "fit_r2", "dropped"], rows)


# ---------------------------------------------------------------- scaling, F-measure


def scaling_check(x0: PhaseState, kappa: float = 2.0, t_grid=None, tol: float = 1e-12) -> float:
    """Max deviation between the flow of ``kappa x`` at ``t`` and ``kappa`` times the flow of ``x`` at ``kappa t``."""
    t = default_grid() if t_grid is None else np.asarray(t_grid, float)
    big = integrate_batch(x0.dec, kappa * x0.x[None, :], t, tol, keep_dense=False).X[:, 0]
    small = integrate_batch(x0.dec, x0.x[None, :], kappa * t, tol, keep_dense=False).X[:, 0]
    return float(np.max(np.abs(big - kappa * small)))


@dataclass(frozen=True, eq=False)
class FMeasureResult:
    log_F: np.ndarray
    indices: np.ndarray
    control: float
    dropped: int
    excluded: int

    @property
    def median(self) -> float:
        return float(np.median(self.log_F))

    @property
    def iqr(self) -> tuple[float, float]:
        q1, q3 = np.percentile(self.log_F, [25, 75])
        return float(q1), float(q3)

    def to_csv(self) -> str:
        return csv_text(["index", "log_F"], [[int(i), v] for i, v in zip(self.indices, self.log_F)])


def _fmeasure_chunk(U0, x0, d_norm, seed, idx, tol):
    dec = x0.dec
    out = []
    for i in idx:
        v = child_rng(seed, i).standard_normal(dec.dim)
        d = d_norm * v / np.linalg.norm(v)
        try:
            U = final_unitary(dec, x0.x + d, tol)
        except IntegrationError:
            out.append((i, None))
            continue
        try:
            out.append((i, log_norm(U0.conj().T @ U, DEFAULT_POLICY)))
        except BranchCutError:
            out.append((i, np.nan))
    return out


def f_measure(U0, x0: PhaseState, d_norm: float, n_samples: int, seed: int = 0,
              tol: float = 1e-10, workers: int = 1) -> FMeasureResult:
    """Natural log of ``F = ||Log(U0^dagger U(x0 + d, 1))||_F`` over isotropic ``d`` of norm ``d_norm``."""
    U0 = np.asarray(U0, dtype=complex)
    c = residual_cost(U0, final_unitary(x0.dec, x0.x, tol))
    if not c < FMEASURE_PRECONDITION:
        raise InvalidArgument(f"x0 does not generate U0: residual cost {c:.3e} >= {FMEASURE_PRECONDITION:g}")
    if n_samples < 1 or not d_norm > 0:
        raise InvalidArgument("need n_samples >= 1 and d_norm > 0")
    tasks = [(U0, x0, d_norm, seed, range(s, min(s + CHUNK, n_samples)), tol)
             for s in range(0, n_samples, CHUNK)]
    pairs = [p for part in _map(_fmeasure_chunk, tasks, workers) for p in part]
    dropped = sum(v is None for _, v in pairs)
    kept = [(i, v) for i, v in pairs if v is not None and np.isfinite(v)]
    excluded = len(pairs) - dropped - len(kept)
    logF = np.log(np.array([v for _, v in kept]))
    return FMeasureResult(logF, np.array([i for i, _ in kept], dtype=int), c, dropped, excluded)
