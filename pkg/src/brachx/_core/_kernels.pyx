# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: batched DOPRI5 for quadratic vector fields and ordered
products of small unitary exponentials."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, ldexp, ceil, log2

cnp.import_array()

# Dormand-Prince 5(4); kept in sync with _tableau.py
cdef double A21 = 0.2
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0
cdef double A73 = 500.0 / 1113.0
cdef double A74 = 125.0 / 192.0
cdef double A75 = -2187.0 / 6784.0
cdef double A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0
cdef double D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0
cdef double D7 = 69997945.0 / 29380423.0
cdef double SAFE = 0.9
cdef double FAC1 = 5.0
cdef double FAC2 = 0.1
cdef double BETA = 0.04
cdef double UROUND = 2.3e-16

cdef int STATUS_OK = 0
cdef int STATUS_UNDERFLOW = 1
cdef int STATUS_MAX_STEPS = 2


cdef inline void _field(const long[::1] qk, const long[::1] qi, const long[::1] qj,
                        const double[::1] qv, const double[:, ::1] lin, bint has_lin,
                        const double[:, ::1] x, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t B = x.shape[0], N = x.shape[1], T = qv.shape[0]
    cdef Py_ssize_t b, k, m, t
    cdef double acc
    for b in range(B):
        for k in range(N):
            out[b, k] = 0.0
        for t in range(T):
            out[b, qk[t]] += qv[t] * x[b, qi[t]] * x[b, qj[t]]
        if has_lin:
            for k in range(N):
                acc = 0.0
                for m in range(N):
                    acc = acc + lin[k, m] * x[b, m]
                out[b, k] += acc


cdef inline double _rms_ratio(const double[:, ::1] v, const double[:, ::1] y,
                              double rtol, double atol) noexcept nogil:
    cdef Py_ssize_t B = v.shape[0], N = v.shape[1], b, k
    cdef double s = 0.0, r
    for b in range(B):
        for k in range(N):
            r = v[b, k] / (atol + rtol * fabs(y[b, k]))
            s += r * r
    return sqrt(s / (B * N))


def dopri5(const long[::1] qk, const long[::1] qi, const long[::1] qj,
           const double[::1] qv, lin, x0, double t0, double t1, t_eval,
           double rtol, double atol, long max_steps=200000, bint keep_dense=False,
           double h0=0.0):
    """See ``_fallback.dopri5``; identical contract."""
    cdef cnp.ndarray[double, ndim=2] ya = np.array(x0, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t B = ya.shape[0], N = ya.shape[1]
    cdef double[:, ::1] y = ya
    cdef double[::1] te = np.ascontiguousarray(t_eval, dtype=np.float64)
    cdef Py_ssize_t T = te.shape[0]
    y_eval_a = np.zeros((T, B, N))
    cdef double[:, :, ::1] y_eval = y_eval_a
    cdef bint has_lin = lin is not None
    cdef double[:, ::1] L
    if has_lin:
        L = np.ascontiguousarray(lin, dtype=np.float64)
    else:
        L = np.zeros((1, 1))
    cdef double[:, ::1] k1 = np.empty((B, N)), k2 = np.empty((B, N)), k3 = np.empty((B, N))
    cdef double[:, ::1] k4 = np.empty((B, N)), k5 = np.empty((B, N)), k6 = np.empty((B, N))
    cdef double[:, ::1] k7 = np.empty((B, N)), y1 = np.empty((B, N)), y2 = np.empty((B, N))
    cdef double[:, ::1] work = np.empty((B, N)), scale = np.empty((B, N))
    cdef double direction = 1.0 if t1 >= t0 else -1.0
    cdef double span = fabs(t1 - t0)
    cdef double t = t0
    cdef Py_ssize_t ie = 0, b, k, nsteps_rec = 0, cap = 0
    cdef long nfev = 0, nstep = 0
    cdef int status = STATUS_OK
    cdef double h, hs, hnew, err, fac, fac11, facold, expo1, tnew, th, th1
    cdef double dnf, dny, der2, der12, h1, hmax
    cdef double ydf, bsp, r4v, r5v
    cdef bint last, last_rejected
    t_steps = [t0]
    cdef double[:, :, :, ::1] dense
    dense_a = np.zeros((0, 5, B, N))

    while ie < T and (te[ie] - t) * direction <= 0.0:
        for b in range(B):
            for k in range(N):
                y_eval[ie, b, k] = y[b, k]
        ie += 1
    if span == 0.0:
        return y_eval_a, np.array(t_steps), dense_a, nfev, status, t

    if keep_dense:
        cap = 64
        dense_a = np.zeros((cap, 5, B, N))
        dense = dense_a

    _field(qk, qi, qj, qv, L, has_lin, y, k1)
    nfev += 1
    hmax = span
    if h0 > 0:
        h = h0
    else:
        # Hairer's initial step heuristic
        for b in range(B):
            for k in range(N):
                scale[b, k] = y[b, k]
        dnf = _rms_ratio(k1, y, rtol, atol)
        dny = _rms_ratio(scale, y, rtol, atol)
        if dnf <= 1e-10 or dny <= 1e-10:
            h = 1e-6
        else:
            h = 0.01 * dny / dnf
        h = min(h, hmax)
        for b in range(B):
            for k in range(N):
                y1[b, k] = y[b, k] + direction * h * k1[b, k]
        _field(qk, qi, qj, qv, L, has_lin, y1, k2)
        nfev += 1
        for b in range(B):
            for k in range(N):
                work[b, k] = k2[b, k] - k1[b, k]
        der2 = _rms_ratio(work, y, rtol, atol) / h
        der12 = max(fabs(der2), dnf)
        if der12 <= 1e-15:
            h1 = max(1e-6, fabs(h) * 1e-3)
        else:
            h1 = pow(0.01 / der12, 0.2)
        h = min(min(100.0 * fabs(h), h1), hmax)

    facold = 1e-4
    expo1 = 0.2 - BETA * 0.75
    last_rejected = False
    while True:
        if nstep >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if 0.1 * fabs(h) <= fabs(t) * UROUND:
            status = STATUS_UNDERFLOW
            break
        last = False
        if (t + 1.01 * direction * h - t1) * direction >= 0.0:
            h = fabs(t1 - t)
            last = True
        hs = direction * h
        nstep += 1
        with nogil:
            for b in range(B):
                for k in range(N):
                    y2[b, k] = y[b, k] + hs * (A21 * k1[b, k])
            _field(qk, qi, qj, qv, L, has_lin, y2, k2)
            for b in range(B):
                for k in range(N):
                    y2[b, k] = y[b, k] + hs * (A31 * k1[b, k] + A32 * k2[b, k])
            _field(qk, qi, qj, qv, L, has_lin, y2, k3)
            for b in range(B):
                for k in range(N):
                    y2[b, k] = y[b, k] + hs * (A41 * k1[b, k] + A42 * k2[b, k] + A43 * k3[b, k])
            _field(qk, qi, qj, qv, L, has_lin, y2, k4)
            for b in range(B):
                for k in range(N):
                    y2[b, k] = y[b, k] + hs * (A51 * k1[b, k] + A52 * k2[b, k]
                                               + A53 * k3[b, k] + A54 * k4[b, k])
            _field(qk, qi, qj, qv, L, has_lin, y2, k5)
            for b in range(B):
                for k in range(N):
                    y2[b, k] = y[b, k] + hs * (A61 * k1[b, k] + A62 * k2[b, k] + A63 * k3[b, k]
                                               + A64 * k4[b, k] + A65 * k5[b, k])
            _field(qk, qi, qj, qv, L, has_lin, y2, k6)
            for b in range(B):
                for k in range(N):
                    y1[b, k] = y[b, k] + hs * (A71 * k1[b, k] + A73 * k3[b, k] + A74 * k4[b, k]
                                               + A75 * k5[b, k] + A76 * k6[b, k])
            _field(qk, qi, qj, qv, L, has_lin, y1, k7)
            for b in range(B):
                for k in range(N):
                    work[b, k] = hs * (E1 * k1[b, k] + E3 * k3[b, k] + E4 * k4[b, k]
                                       + E5 * k5[b, k] + E6 * k6[b, k] + E7 * k7[b, k])
                    scale[b, k] = max(fabs(y[b, k]), fabs(y1[b, k]))
            err = _rms_ratio(work, scale, rtol, atol)
        nfev += 6
        fac11 = pow(err, expo1)
        fac = fac11 / pow(facold, BETA)
        fac = max(FAC2, min(FAC1, fac / SAFE))
        hnew = h / fac
        if err <= 1.0:
            facold = max(err, 1e-4)
            tnew = t + hs
            if last:
                tnew = t1
            if keep_dense and nsteps_rec == cap:
                cap *= 2
                grown = np.zeros((cap, 5, B, N))
                grown[:nsteps_rec] = dense_a[:nsteps_rec]
                dense_a = grown
                dense = dense_a
            while ie < T and (te[ie] - tnew) * direction <= 0.0:
                th = (te[ie] - t) / hs
                th1 = 1.0 - th
                for b in range(B):
                    for k in range(N):
                        ydf = y1[b, k] - y[b, k]
                        bsp = hs * k1[b, k] - ydf
                        r5v = hs * (D1 * k1[b, k] + D3 * k3[b, k] + D4 * k4[b, k]
                                    + D5 * k5[b, k] + D6 * k6[b, k] + D7 * k7[b, k])
                        r4v = ydf - hs * k7[b, k] - bsp
                        y_eval[ie, b, k] = y[b, k] + th * (ydf + th1 * (bsp + th * (r4v + th1 * r5v)))
                ie += 1
            for b in range(B):
                for k in range(N):
                    if keep_dense:
                        ydf = y1[b, k] - y[b, k]
                        bsp = hs * k1[b, k] - ydf
                        dense[nsteps_rec, 0, b, k] = y[b, k]
                        dense[nsteps_rec, 1, b, k] = ydf
                        dense[nsteps_rec, 2, b, k] = bsp
                        dense[nsteps_rec, 3, b, k] = ydf - hs * k7[b, k] - bsp
                        dense[nsteps_rec, 4, b, k] = hs * (D1 * k1[b, k] + D3 * k3[b, k] + D4 * k4[b, k]
                                                           + D5 * k5[b, k] + D6 * k6[b, k] + D7 * k7[b, k])
                    k1[b, k] = k7[b, k]
                    y[b, k] = y1[b, k]
            if keep_dense:
                nsteps_rec += 1
            t = tnew
            t_steps.append(t)
            if last:
                break
            if fabs(hnew) > hmax:
                hnew = hmax
            if last_rejected:
                hnew = min(fabs(hnew), fabs(h))
            last_rejected = False
        else:
            hnew = h / min(FAC1, fac11 / SAFE)
            last_rejected = True
        h = hnew
    if keep_dense:
        dense_a = dense_a[:nsteps_rec].copy()
    return y_eval_a, np.array(t_steps), dense_a, nfev, status, t


# ---------------------------------------------------------------- unitaries

cdef enum:
    MAXN = 8
    MAXN2 = 64


cdef inline void _matmul(const double complex* A, const double complex* B,
                         double complex* C, int n) noexcept nogil:
    cdef int i, j, k
    cdef double complex acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc = acc + A[i * n + k] * B[k * n + j]
            C[i * n + j] = acc


cdef void _expm_minus_i(const double complex* G, double complex* E, int n) noexcept nogil:
    """exp(-1j G) by scaling and squaring of a degree-14 Taylor polynomial."""
    cdef double complex M[MAXN2]
    cdef double complex P[MAXN2]
    cdef double complex W[MAXN2]
    cdef int i, j, s = 0, deg
    cdef double nrm = 0.0, a
    cdef int nn = n * n
    for i in range(nn):
        a = G[i].real * G[i].real + G[i].imag * G[i].imag
        nrm += a
    nrm = sqrt(nrm)
    if nrm > 0.25:
        s = <int>ceil(log2(nrm / 0.25))
    cdef double scal = ldexp(1.0, -s)
    for i in range(nn):
        M[i] = -1j * G[i] * scal
    # Horner: P = I + M/deg (I + M/(deg-1) (...))
    for i in range(nn):
        P[i] = 0.0
    for i in range(n):
        P[i * n + i] = 1.0
    for deg in range(14, 0, -1):
        _matmul(M, P, W, n)
        for i in range(nn):
            P[i] = W[i] / deg
        for i in range(n):
            P[i * n + i] = P[i * n + i] + 1.0
    for j in range(s):
        _matmul(P, P, W, n)
        for i in range(nn):
            P[i] = W[i]
    for i in range(nn):
        E[i] = P[i]


def propagate(G, U0, record):
    """See ``_fallback.propagate``; identical contract."""
    cdef double complex[:, :, :, ::1] Gv = np.ascontiguousarray(G, dtype=np.complex128)
    cdef cnp.ndarray Ua = np.array(U0, dtype=np.complex128, order="C", copy=True)
    cdef double complex[:, :, ::1] U = Ua
    cdef cnp.uint8_t[::1] rec = np.ascontiguousarray(record, dtype=np.uint8)
    cdef Py_ssize_t K = Gv.shape[0], B = Gv.shape[1]
    cdef int n = <int>Gv.shape[2]
    if n > MAXN:
        raise ValueError("compiled propagate supports n <= 8")
    cdef Py_ssize_t R = 0, k, b, r = 0, i
    for k in range(K + 1):
        if rec[k]:
            R += 1
    out_a = np.zeros((R, B, n, n), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] out = out_a
    cdef double complex E[MAXN2]
    cdef double complex W[MAXN2]
    cdef int nn = n * n
    with nogil:
        if rec[0]:
            for b in range(B):
                for i in range(nn):
                    out[r, b, i // n, i % n] = U[b, i // n, i % n]
            r += 1
        for k in range(K):
            for b in range(B):
                _expm_minus_i(&Gv[k, b, 0, 0], E, n)
                _matmul(E, &U[b, 0, 0], W, n)
                for i in range(nn):
                    U[b, i // n, i % n] = W[i]
            if rec[k + 1]:
                for b in range(B):
                    for i in range(nn):
                        out[r, b, i // n, i % n] = U[b, i // n, i % n]
                r += 1
    return out_a
