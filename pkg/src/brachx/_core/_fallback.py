"""Pure-NumPy implementation of the hot kernels.

Same algorithms as ``_kernels.pyx`` (identical step control and dense output);
the two backends agree to rounding level.  Selected automatically when the
compiled extension is missing.
"""
from __future__ import annotations

import numpy as np

from ._tableau import (
    A21, A31, A32, A41, A42, A43, A51, A52, A53, A54, A61, A62, A63, A64, A65,
    A71, A73, A74, A75, A76, C2, C3, C4, C5,
    D1, D3, D4, D5, D6, D7, E1, E3, E4, E5, E6, E7,
    BETA, FAC1, FAC2, SAFE, UROUND,
)

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2


def dense_tensor(qk, qi, qj, qv, N):
    Q = np.zeros((N, N, N))
    np.add.at(Q, (qk, qi, qj), qv)
    return Q


def quadratic_field(qk, qi, qj, qv, lin, x):
    """``dx_k = sum_t qv_t x_i x_j + (lin @ x)_k`` for a batch ``x`` of shape (B, N)."""
    return _field_from_dense(dense_tensor(qk, qi, qj, qv, x.shape[1]), lin, x)


def _field_from_dense(Q, lin, x):
    out = np.einsum("bkj,bj->bk", np.tensordot(x, Q, axes=(1, 1)), x)
    if lin is not None:
        out += x @ lin.T
    return out


def _rms(v):
    return np.sqrt(np.mean(v * v))


def _initial_step(f, t0, y0, f0, direction, hmax, rtol, atol):
    sk = atol + rtol * np.abs(y0)
    dnf = _rms(f0 / sk)
    dny = _rms(y0 / sk)
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1e-6
    else:
        h = 0.01 * dny / dnf
    h = min(h, hmax)
    y1 = y0 + direction * h * f0
    f1 = f(y1)
    der2 = _rms((f1 - f0) / sk) / h
    der12 = max(abs(der2), dnf)
    if der12 <= 1e-15:
        h1 = max(1e-6, abs(h) * 1e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    return min(100.0 * abs(h), h1, hmax)


def dopri5(qk, qi, qj, qv, lin, x0, t0, t1, t_eval, rtol, atol,
           max_steps=200000, keep_dense=False, h0=0.0):
    """Adaptive Dormand-Prince 5(4) with dense output on a batch of states.

    Returns ``(y_eval, t_steps, dense, nfev, status, t_reached)``.  ``dense`` has
    shape (S, 5, B, N) when ``keep_dense`` else (0, 5, B, N).
    """
    y = np.array(x0, dtype=float, copy=True)
    B, N = y.shape
    t_eval = np.asarray(t_eval, dtype=float)
    T = len(t_eval)
    y_eval = np.zeros((T, B, N))
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)

    Q = dense_tensor(qk, qi, qj, qv, N)

    def f(z):
        return _field_from_dense(Q, lin, z)

    t = float(t0)
    ie = 0
    while ie < T and (t_eval[ie] - t) * direction <= 0.0:
        y_eval[ie] = y
        ie += 1
    t_steps = [t]
    dense = []
    nfev = 0
    if span == 0.0:
        return y_eval, np.array(t_steps), np.zeros((0, 5, B, N)), nfev, STATUS_OK, t

    k1 = f(y)
    nfev += 1
    hmax = span
    h = h0 if h0 > 0 else _initial_step(f, t, y, k1, direction, hmax, rtol, atol)
    if h0 <= 0:
        nfev += 1
    facold = 1e-4
    expo1 = 0.2 - BETA * 0.75
    last_rejected = False
    nstep = 0
    status = STATUS_OK
    while True:
        if nstep >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if 0.1 * abs(h) <= abs(t) * UROUND:
            status = STATUS_UNDERFLOW
            break
        last = False
        if (t + 1.01 * direction * h - t1) * direction >= 0.0:
            h = abs(t1 - t)
            last = True
        hs = direction * h
        nstep += 1
        y2 = y + hs * (A21 * k1)
        k2 = f(y2)
        y2 = y + hs * (A31 * k1 + A32 * k2)
        k3 = f(y2)
        y2 = y + hs * (A41 * k1 + A42 * k2 + A43 * k3)
        k4 = f(y2)
        y2 = y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)
        k5 = f(y2)
        ysti = y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)
        k6 = f(ysti)
        y1 = y + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = f(y1)
        nfev += 6
        errv = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sk = atol + rtol * np.maximum(np.abs(y), np.abs(y1))
        err = _rms(errv / sk)
        fac11 = err ** expo1
        fac = fac11 / facold ** BETA
        fac = max(FAC2, min(FAC1, fac / SAFE))
        hnew = h / fac
        if err <= 1.0:
            facold = max(err, 1e-4)
            ydiff = y1 - y
            bspl = hs * k1 - ydiff
            r5 = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            r4 = ydiff - hs * k7 - bspl
            tnew = t + hs
            if last:
                tnew = t1
            while ie < T and (t_eval[ie] - tnew) * direction <= 0.0:
                th = (t_eval[ie] - t) / hs
                th1 = 1.0 - th
                y_eval[ie] = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)))
                ie += 1
            if keep_dense:
                dense.append(np.stack([y, ydiff, bspl, r4, r5]))
            k1 = k7
            y = y1
            t = tnew
            t_steps.append(t)
            if last:
                break
            if abs(hnew) > hmax:
                hnew = hmax
            if last_rejected:
                hnew = min(abs(hnew), abs(h))
            last_rejected = False
        else:
            hnew = h / min(FAC1, fac11 / SAFE)
            last_rejected = True
        h = hnew
    dense_arr = np.array(dense) if dense else np.zeros((0, 5, B, N))
    return y_eval, np.array(t_steps), dense_arr, nfev, status, t


def expm_herm_batch(G):
    """``exp(-1j G)`` for a stack of Hermitian matrices."""
    w, v = np.linalg.eigh(G)
    return (v * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


_SQ3_12 = np.sqrt(3.0) / 12.0


def magnus4_generators(H1, H2, h):
    """Hermitian 4th-order Magnus generators for steps of length ``h``.

    ``H1``/``H2`` hold the Hamiltonian at the two Gauss nodes of each step; the
    step propagator is ``exp(-1j G)``.
    """
    h = np.asarray(h)[..., None, None]
    comm = H2 @ H1 - H1 @ H2
    return 0.5 * h * (H1 + H2) - 1j * _SQ3_12 * h * h * comm


def midpoint_generators(Hm, h):
    return np.asarray(h)[..., None, None] * Hm


def propagate(G, U0, record):
    """Ordered product ``U_{k+1} = exp(-1j G_k) U_k``.

    ``G`` has shape (K, B, n, n).  ``record`` is a boolean mask of length K+1
    selecting which partial products to return.
    """
    E = expm_herm_batch(G)
    U = np.array(U0, dtype=complex, copy=True)
    out = []
    if record[0]:
        out.append(U.copy())
    for k in range(E.shape[0]):
        U = E[k] @ U
        if record[k + 1]:
            out.append(U.copy())
    return np.array(out)
