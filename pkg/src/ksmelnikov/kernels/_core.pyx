# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: truncated convolution, ETDRK4 march, backward adjoint.

API mirrors `_fallback`; both are exercised by the backend-parity tests.
"""

import numpy as np

from libc.math cimport cos, isfinite


cdef void _odd_conv(double* line, double* v, double* out, long n,
                    double q) noexcept nogil:
    """out_k = (k q / 2) sum_m line_m line_{k-m}, k = 1..n (odd extension)."""
    cdef long j, k, m
    cdef double s
    line[n] = 0.0
    for j in range(1, n + 1):
        line[n + j] = v[j - 1]
        line[n - j] = -v[j - 1]
    for k in range(1, n + 1):
        s = 0.0
        for m in range(k - n, n + 1):
            s += line[n + m] * line[n + k - m]
        out[k - 1] = 0.5 * q * k * s


cdef void _cplx_conv(double complex* line, double complex* v,
                     double complex* out, long n, double q) noexcept nogil:
    """out_k = -(i k q / 2) sum_m line_m line_{k-m}, k = 0..n (hermitian ext)."""
    cdef long j, k, m
    cdef double complex s
    cdef double complex iq = 1j * q
    line[n] = 0.0
    for j in range(1, n + 1):
        line[n + j] = v[j]
        line[n - j] = v[j].conjugate()
    out[0] = 0.0
    for k in range(1, n + 1):
        s = 0.0
        for m in range(k - n, n + 1):
            s = s + line[n + m] * line[n + k - m]
        out[k] = -0.5 * iq * k * s


def ks_rhs_odd(b, lin, double q):
    b = np.ascontiguousarray(b, dtype=np.float64)
    lin = np.ascontiguousarray(lin, dtype=np.float64)
    cdef double[::1] bv = b
    cdef double[::1] lv = lin
    cdef long n = bv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    line_arr = np.empty(2 * n + 1, dtype=np.float64)
    cdef double[::1] line = line_arr
    cdef long i
    _odd_conv(&line[0], &bv[0], &ov[0], n, q)
    for i in range(n):
        ov[i] += lv[i] * bv[i]
    return out


def ks_rhs_cplx(a, lin, double q):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    lin = np.ascontiguousarray(lin, dtype=np.float64)
    cdef double complex[::1] av = a
    cdef double[::1] lv = lin
    cdef long n = av.shape[0] - 1
    out = np.empty(n + 1, dtype=np.complex128)
    cdef double complex[::1] ov = out
    line_arr = np.empty(2 * n + 1, dtype=np.complex128)
    cdef double complex[::1] line = line_arr
    cdef long i
    _cplx_conv(&line[0], &av[0], &ov[0], n, q)
    for i in range(1, n + 1):
        ov[i] = ov[i] + lv[i] * av[i]
    ov[0] = 0.0
    return out


def _record_steps(long n_steps, long stride):
    rec = np.arange(0, n_steps + 1, stride, dtype=np.int64)
    if rec[rec.size - 1] != n_steps:
        rec = np.append(rec, np.int64(n_steps))
    return rec


def etdrk4_run_odd(b0, lin, double q, double dt, long n_steps, long stride,
                   E, E2, Q, f1, f2, f3, ghat=None, double eps=0.0,
                   double omega=0.0, double t_start=0.0, noise=None):
    b0 = np.ascontiguousarray(b0, dtype=np.float64)
    cdef long n = b0.shape[0]
    cdef double[::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef double[::1] E2v = np.ascontiguousarray(E2, dtype=np.float64)
    cdef double[::1] Qv = np.ascontiguousarray(Q, dtype=np.float64)
    cdef double[::1] f1v = np.ascontiguousarray(f1, dtype=np.float64)
    cdef double[::1] f2v = np.ascontiguousarray(f2, dtype=np.float64)
    cdef double[::1] f3v = np.ascontiguousarray(f3, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lin, dtype=np.float64)

    cdef bint forced = ghat is not None and eps != 0.0
    cdef double[::1] gv
    if forced:
        gv = np.ascontiguousarray(ghat, dtype=np.float64)
    else:
        gv = np.zeros(1, dtype=np.float64)

    cdef bint noisy = noise is not None
    cdef double[:, ::1] nz
    if noisy:
        nz = np.ascontiguousarray(noise, dtype=np.float64)
    else:
        nz = np.zeros((1, 1), dtype=np.float64)

    rec = _record_steps(n_steps, stride)
    cdef long[::1] recv = rec
    samples = np.empty((rec.size, n), dtype=np.float64)
    derivs = np.empty((rec.size, n), dtype=np.float64)
    cdef double[:, ::1] smp = samples
    cdef double[:, ::1] drv = derivs

    work = np.empty((6, n), dtype=np.float64)
    cdef double[:, ::1] w = work
    line_arr = np.empty(2 * n + 1, dtype=np.float64)
    cdef double[::1] line = line_arr
    v_arr = np.array(b0, dtype=np.float64)
    cdef double[::1] v = v_arr

    cdef long step = 0, ptr = 0, i
    cdef double t, fs
    cdef bint ok = True
    # w rows: 0 nv, 1 na, 2 nb, 3 nc, 4 stage state, 5 stage state 2
    with nogil:
        while True:
            t = t_start + step * dt
            if ptr < recv.shape[0] and step == recv[ptr]:
                for i in range(n):
                    if not isfinite(v[i]):
                        ok = False
                        break
                if not ok:
                    break
                _odd_conv(&line[0], &v[0], &w[0, 0], n, q)
                if forced:
                    fs = eps * cos(omega * t)
                    for i in range(n):
                        w[0, i] += fs * gv[i]
                for i in range(n):
                    smp[ptr, i] = v[i]
                    drv[ptr, i] = lv[i] * v[i] + w[0, i]
                ptr += 1
            if step == n_steps:
                break
            # nv
            _odd_conv(&line[0], &v[0], &w[0, 0], n, q)
            if forced:
                fs = eps * cos(omega * t)
                for i in range(n):
                    w[0, i] += fs * gv[i]
            # a-stage
            for i in range(n):
                w[4, i] = E2v[i] * v[i] + Qv[i] * w[0, i]
            _odd_conv(&line[0], &w[4, 0], &w[1, 0], n, q)
            if forced:
                fs = eps * cos(omega * (t + 0.5 * dt))
                for i in range(n):
                    w[1, i] += fs * gv[i]
            # b-stage
            for i in range(n):
                w[5, i] = E2v[i] * v[i] + Qv[i] * w[1, i]
            _odd_conv(&line[0], &w[5, 0], &w[2, 0], n, q)
            if forced:
                fs = eps * cos(omega * (t + 0.5 * dt))
                for i in range(n):
                    w[2, i] += fs * gv[i]
            # c-stage (reuses a-stage state in w[4])
            for i in range(n):
                w[5, i] = E2v[i] * w[4, i] + Qv[i] * (2.0 * w[2, i] - w[0, i])
            _odd_conv(&line[0], &w[5, 0], &w[3, 0], n, q)
            if forced:
                fs = eps * cos(omega * (t + dt))
                for i in range(n):
                    w[3, i] += fs * gv[i]
            for i in range(n):
                v[i] = (Ev[i] * v[i] + f1v[i] * w[0, i]
                        + 2.0 * f2v[i] * (w[1, i] + w[2, i]) + f3v[i] * w[3, i])
            if noisy:
                for i in range(n):
                    v[i] += nz[step, i]
            step += 1
    if not ok:
        raise FloatingPointError(f"non-finite state at step {step}")
    return rec, samples, derivs


def etdrk4_run_cplx(a0, lin, double q, double dt, long n_steps, long stride,
                    E, E2, Q, f1, f2, f3, ghat=None, double eps=0.0,
                    double omega=0.0, double t_start=0.0, noise=None):
    a0 = np.ascontiguousarray(a0, dtype=np.complex128)
    cdef long n = a0.shape[0] - 1
    cdef double[::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef double[::1] E2v = np.ascontiguousarray(E2, dtype=np.float64)
    cdef double[::1] Qv = np.ascontiguousarray(Q, dtype=np.float64)
    cdef double[::1] f1v = np.ascontiguousarray(f1, dtype=np.float64)
    cdef double[::1] f2v = np.ascontiguousarray(f2, dtype=np.float64)
    cdef double[::1] f3v = np.ascontiguousarray(f3, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lin, dtype=np.float64)

    cdef bint forced = ghat is not None and eps != 0.0
    cdef double complex[::1] gv
    if forced:
        gv = np.ascontiguousarray(ghat, dtype=np.complex128)
    else:
        gv = np.zeros(1, dtype=np.complex128)

    cdef bint noisy = noise is not None
    cdef double complex[:, ::1] nz
    if noisy:
        nz = np.ascontiguousarray(noise, dtype=np.complex128)
    else:
        nz = np.zeros((1, 1), dtype=np.complex128)

    rec = _record_steps(n_steps, stride)
    cdef long[::1] recv = rec
    samples = np.empty((rec.size, n + 1), dtype=np.complex128)
    derivs = np.empty((rec.size, n + 1), dtype=np.complex128)
    cdef double complex[:, ::1] smp = samples
    cdef double complex[:, ::1] drv = derivs

    work = np.empty((6, n + 1), dtype=np.complex128)
    cdef double complex[:, ::1] w = work
    line_arr = np.empty(2 * n + 1, dtype=np.complex128)
    cdef double complex[::1] line = line_arr
    v_arr = np.array(a0, dtype=np.complex128)
    cdef double complex[::1] v = v_arr

    cdef long step = 0, ptr = 0, i
    cdef double t, fs
    cdef bint ok = True
    with nogil:
        while True:
            t = t_start + step * dt
            if ptr < recv.shape[0] and step == recv[ptr]:
                for i in range(n + 1):
                    if not (isfinite(v[i].real) and isfinite(v[i].imag)):
                        ok = False
                        break
                if not ok:
                    break
                _cplx_conv(&line[0], &v[0], &w[0, 0], n, q)
                if forced:
                    fs = eps * cos(omega * t)
                    for i in range(n + 1):
                        w[0, i] = w[0, i] + fs * gv[i]
                    w[0, 0] = 0.0
                for i in range(n + 1):
                    smp[ptr, i] = v[i]
                    drv[ptr, i] = lv[i] * v[i] + w[0, i]
                drv[ptr, 0] = 0.0
                ptr += 1
            if step == n_steps:
                break
            _cplx_conv(&line[0], &v[0], &w[0, 0], n, q)
            if forced:
                fs = eps * cos(omega * t)
                for i in range(1, n + 1):
                    w[0, i] = w[0, i] + fs * gv[i]
            for i in range(n + 1):
                w[4, i] = E2v[i] * v[i] + Qv[i] * w[0, i]
            _cplx_conv(&line[0], &w[4, 0], &w[1, 0], n, q)
            if forced:
                fs = eps * cos(omega * (t + 0.5 * dt))
                for i in range(1, n + 1):
                    w[1, i] = w[1, i] + fs * gv[i]
            for i in range(n + 1):
                w[5, i] = E2v[i] * v[i] + Qv[i] * w[1, i]
            _cplx_conv(&line[0], &w[5, 0], &w[2, 0], n, q)
            if forced:
                fs = eps * cos(omega * (t + 0.5 * dt))
                for i in range(1, n + 1):
                    w[2, i] = w[2, i] + fs * gv[i]
            for i in range(n + 1):
                w[5, i] = E2v[i] * w[4, i] + Qv[i] * (2.0 * w[2, i] - w[0, i])
            _cplx_conv(&line[0], &w[5, 0], &w[3, 0], n, q)
            if forced:
                fs = eps * cos(omega * (t + dt))
                for i in range(1, n + 1):
                    w[3, i] = w[3, i] + fs * gv[i]
            for i in range(n + 1):
                v[i] = (Ev[i] * v[i] + f1v[i] * w[0, i]
                        + 2.0 * f2v[i] * (w[1, i] + w[2, i]) + f3v[i] * w[3, i])
            v[0] = 0.0
            if noisy:
                for i in range(n + 1):
                    v[i] = v[i] + nz[step, i]
            step += 1
    if not ok:
        raise FloatingPointError(f"non-finite state at step {step}")
    return rec, samples, derivs


cdef inline double _bval(double* b, long j, long n) noexcept nogil:
    """Odd extension lookup: b_j for |j| <= n, zero outside."""
    if 1 <= j <= n:
        return b[j - 1]
    if -n <= j <= -1:
        return -b[-j - 1]
    return 0.0


cdef void _minus_bt(double* b, double* psi, double* out, long n,
                    double q) noexcept nogil:
    """out = -(J - diag)^T psi on the odd chart, J_kj = kq (b_{k-j} - b_{k+j})."""
    cdef long j, k
    cdef double s
    for j in range(1, n + 1):
        s = 0.0
        for k in range(1, n + 1):
            s += k * (_bval(b, k - j, n) - _bval(b, k + j, n)) * psi[k - 1]
        out[j - 1] = -q * s


def adjoint_backward_odd(states, derivs, double dt_sample, lin, double q,
                         psi_end, long n_sub):
    states = np.ascontiguousarray(states, dtype=np.float64)
    derivs = np.ascontiguousarray(derivs, dtype=np.float64)
    cdef double[:, ::1] sv = states
    cdef double[:, ::1] dv = derivs
    cdef long n_rec = sv.shape[0]
    cdef long n = sv.shape[1]
    cdef double[::1] lv = np.ascontiguousarray(lin, dtype=np.float64)

    cdef double h = -dt_sample / n_sub
    E_arr = np.exp(np.asarray(lin) * (-h))
    E2_arr = np.exp(np.asarray(lin) * (-0.5 * h))
    cdef double[::1] E = np.ascontiguousarray(E_arr, dtype=np.float64)
    cdef double[::1] E2 = np.ascontiguousarray(E2_arr, dtype=np.float64)

    # Hermite weights on the half-substep grid s = 1 - j/(2 n_sub)
    sgrid = 1.0 - np.arange(2 * n_sub + 1, dtype=np.float64) / (2.0 * n_sub)
    h00_arr = (1.0 + 2.0 * sgrid) * (1.0 - sgrid) ** 2
    h10_arr = sgrid * (1.0 - sgrid) ** 2 * dt_sample
    h01_arr = sgrid * sgrid * (3.0 - 2.0 * sgrid)
    h11_arr = sgrid * sgrid * (sgrid - 1.0) * dt_sample
    cdef double[::1] h00 = np.ascontiguousarray(h00_arr)
    cdef double[::1] h10 = np.ascontiguousarray(h10_arr)
    cdef double[::1] h01 = np.ascontiguousarray(h01_arr)
    cdef double[::1] h11 = np.ascontiguousarray(h11_arr)

    out = np.empty((n_rec, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    psi_arr = np.ascontiguousarray(psi_end, dtype=np.float64).copy()
    cdef double[::1] psi = psi_arr
    work = np.empty((6, n), dtype=np.float64)
    cdef double[:, ::1] w = work
    # w rows: 0 k1, 1 k2, 2 k3, 3 k4, 4 stage psi, 5 interpolated state

    cdef long i0, m, i, j
    cdef bint ok = True
    cdef double hh = h
    with nogil:
        for i in range(n):
            ov[n_rec - 1, i] = psi[i]
        for i0 in range(n_rec - 2, -1, -1):
            for m in range(n_sub):
                # k1 at s-index 2m
                j = 2 * m
                for i in range(n):
                    w[5, i] = (h00[j] * sv[i0, i] + h10[j] * dv[i0, i]
                               + h01[j] * sv[i0 + 1, i] + h11[j] * dv[i0 + 1, i])
                _minus_bt(&w[5, 0], &psi[0], &w[0, 0], n, q)
                # k2 at s-index 2m+1
                j = 2 * m + 1
                for i in range(n):
                    w[5, i] = (h00[j] * sv[i0, i] + h10[j] * dv[i0, i]
                               + h01[j] * sv[i0 + 1, i] + h11[j] * dv[i0 + 1, i])
                for i in range(n):
                    w[4, i] = E2[i] * (psi[i] + 0.5 * hh * w[0, i])
                _minus_bt(&w[5, 0], &w[4, 0], &w[1, 0], n, q)
                # k3 at same state
                for i in range(n):
                    w[4, i] = E2[i] * psi[i] + 0.5 * hh * w[1, i]
                _minus_bt(&w[5, 0], &w[4, 0], &w[2, 0], n, q)
                # k4 at s-index 2m+2
                j = 2 * m + 2
                for i in range(n):
                    w[5, i] = (h00[j] * sv[i0, i] + h10[j] * dv[i0, i]
                               + h01[j] * sv[i0 + 1, i] + h11[j] * dv[i0 + 1, i])
                for i in range(n):
                    w[4, i] = E[i] * psi[i] + hh * E2[i] * w[2, i]
                _minus_bt(&w[5, 0], &w[4, 0], &w[3, 0], n, q)
                for i in range(n):
                    psi[i] = (E[i] * psi[i]
                              + (hh / 6.0) * (E[i] * w[0, i]
                                              + 2.0 * E2[i] * (w[1, i] + w[2, i])
                                              + w[3, i]))
            for i in range(n):
                if not isfinite(psi[i]):
                    ok = False
                    break
                ov[i0, i] = psi[i]
            if not ok:
                break
    if not ok:
        raise FloatingPointError("non-finite adjoint state")
    return out
