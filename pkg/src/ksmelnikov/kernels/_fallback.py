"""Pure-numpy implementations of the hot kernels.

Same call signatures as the compiled module `_core`; selected at import
time by the package `__init__` when the extension is unavailable.  The
convolutions use np.convolve on the full coefficient line, which performs
exactly the Galerkin-truncated sum (no modes beyond N exist to alias).
"""

from __future__ import annotations

import numpy as np


def _odd_line(b: np.ndarray) -> np.ndarray:
    """Odd extension b_{-N}..b_N with b_{-k} = -b_k and b_0 = 0."""
    n = b.size
    line = np.zeros(2 * n + 1, dtype=np.float64)
    line[n + 1 :] = b
    line[:n] = -b[::-1]
    return line


def _cplx_line(a: np.ndarray) -> np.ndarray:
    """Hermitian extension a_{-N}..a_N with a_{-k} = conj(a_k)."""
    n = a.size - 1
    line = np.empty(2 * n + 1, dtype=np.complex128)
    line[n:] = a
    line[:n] = np.conj(a[1:][::-1])
    return line


def ks_rhs_odd(b, lin, q):
    """Right-hand side on the odd chart: db_k/dt = lin_k b_k + (k q / 2) c_k."""
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    line = _odd_line(b)
    conv = np.convolve(line, line)[2 * n + 1 : 3 * n + 1]
    k = np.arange(1, n + 1)
    return lin * b + 0.5 * q * k * conv


def ks_rhs_cplx(a, lin, q):
    """Right-hand side on the complex half line a_0..a_N."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.size - 1
    line = _cplx_line(a)
    conv = np.convolve(line, line)[2 * n : 3 * n + 1]
    k = np.arange(n + 1)
    out = lin * a - 0.5j * q * k * conv
    out[0] = 0.0
    return out


def _record_steps(n_steps: int, stride: int) -> np.ndarray:
    rec = np.arange(0, n_steps + 1, stride)
    if rec[-1] != n_steps:
        rec = np.append(rec, n_steps)
    return rec


def etdrk4_run_odd(
    b0,
    lin,
    q,
    dt,
    n_steps,
    stride,
    E,
    E2,
    Q,
    f1,
    f2,
    f3,
    ghat=None,
    eps=0.0,
    omega=0.0,
    t_start=0.0,
    noise=None,
):
    """ETDRK4 time march on the odd chart with optional harmonic forcing.

    `noise`, when given, is an (n_steps, N) array of increments added after
    each deterministic step.  Returns (recorded step indices, states,
    autonomous-plus-forcing right-hand sides at the records).  Raises
    FloatingPointError on blow-up.
    """
    v = np.array(b0, dtype=np.float64)
    n = v.size
    k = np.arange(1, n + 1)
    kq_half = 0.5 * q * k
    forced = ghat is not None and eps != 0.0

    def nl(u, t):
        line = _odd_line(u)
        out = kq_half * np.convolve(line, line)[2 * n + 1 : 3 * n + 1]
        if forced:
            out = out + (eps * np.cos(omega * t)) * ghat
        return out

    rec = _record_steps(n_steps, stride)
    samples = np.empty((rec.size, n), dtype=np.float64)
    derivs = np.empty((rec.size, n), dtype=np.float64)
    ptr = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps + 1):
            t = t_start + step * dt
            if ptr < rec.size and step == rec[ptr]:
                if not np.all(np.isfinite(v)):
                    raise FloatingPointError(f"non-finite state at step {step}")
                samples[ptr] = v
                derivs[ptr] = lin * v + nl(v, t)
                ptr += 1
            if step == n_steps:
                break
            nv = nl(v, t)
            a = E2 * v + Q * nv
            na = nl(a, t + 0.5 * dt)
            b = E2 * v + Q * na
            nb = nl(b, t + 0.5 * dt)
            c = E2 * a + Q * (2.0 * nb - nv)
            nc = nl(c, t + dt)
            v = E * v + f1 * nv + 2.0 * f2 * (na + nb) + f3 * nc
            if noise is not None:
                v = v + noise[step]
    return rec, samples, derivs


def etdrk4_run_cplx(
    a0,
    lin,
    q,
    dt,
    n_steps,
    stride,
    E,
    E2,
    Q,
    f1,
    f2,
    f3,
    ghat=None,
    eps=0.0,
    omega=0.0,
    t_start=0.0,
    noise=None,
):
    """ETDRK4 time march on the complex half line a_0..a_N."""
    v = np.array(a0, dtype=np.complex128)
    n = v.size - 1
    k = np.arange(n + 1)
    coef = -0.5j * q * k
    forced = ghat is not None and eps != 0.0

    def nl(u, t):
        line = _cplx_line(u)
        out = coef * np.convolve(line, line)[2 * n : 3 * n + 1]
        if forced:
            out = out + (eps * np.cos(omega * t)) * ghat
        out[0] = 0.0
        return out

    rec = _record_steps(n_steps, stride)
    samples = np.empty((rec.size, n + 1), dtype=np.complex128)
    derivs = np.empty((rec.size, n + 1), dtype=np.complex128)
    ptr = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps + 1):
            t = t_start + step * dt
            if ptr < rec.size and step == rec[ptr]:
                if not np.all(np.isfinite(v.view(np.float64))):
                    raise FloatingPointError(f"non-finite state at step {step}")
                samples[ptr] = v
                derivs[ptr] = lin * v + nl(v, t)
                ptr += 1
            if step == n_steps:
                break
            nv = nl(v, t)
            a = E2 * v + Q * nv
            na = nl(a, t + 0.5 * dt)
            b = E2 * v + Q * na
            nb = nl(b, t + 0.5 * dt)
            c = E2 * a + Q * (2.0 * nb - nv)
            nc = nl(c, t + dt)
            v = E * v + f1 * nv + 2.0 * f2 * (na + nb) + f3 * nc
            v[0] = 0.0
            if noise is not None:
                v = v + noise[step]
    return rec, samples, derivs


def _convection_matrix(b_line_padded, idx_minus, idx_plus, kq_col):
    """Off-diagonal Jacobian block kq (b_{k-j} - b_{k+j}) on the odd chart."""
    return kq_col * (b_line_padded[idx_minus] - b_line_padded[idx_plus])


def adjoint_backward_odd(states, derivs, dt_sample, lin, q, psi_end, n_sub):
    """Backward integration of psi' = -J(t)^T psi along a sampled odd orbit.

    The diagonal (stiff) part of J is handled exactly per step via an
    integrating-factor RK4; the convection part is explicit.  The orbit
    state between samples comes from cubic Hermite interpolation of
    (states, derivs).  Returns psi at every sample time, shape like states.
    """
    states = np.asarray(states, dtype=np.float64)
    derivs = np.asarray(derivs, dtype=np.float64)
    n_rec, n = states.shape
    h = -dt_sample / n_sub
    k = np.arange(1, n + 1)
    kq_col = (q * k)[:, None]
    jj = np.arange(1, n + 1)
    idx_minus = 2 * n + (k[:, None] - jj[None, :])
    idx_plus = 2 * n + (k[:, None] + jj[None, :])

    # exp((-lin) * h) for the diagonal of the adjoint system
    E = np.exp(-lin * h)
    E2 = np.exp(-lin * (0.5 * h))

    pad = np.zeros(4 * n + 1, dtype=np.float64)

    def b_of(i0, s):
        """Hermite value of the orbit state at fraction s of interval i0."""
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return (
            h00 * states[i0]
            + (h10 * dt_sample) * derivs[i0]
            + h01 * states[i0 + 1]
            + (h11 * dt_sample) * derivs[i0 + 1]
        )

    def minus_bt(i0, s, psi):
        b = b_of(i0, s)
        pad[n : 3 * n + 1] = _odd_line(b)
        bm = _convection_matrix(pad, idx_minus, idx_plus, kq_col)
        return -(bm.T @ psi)

    psi = np.array(psi_end, dtype=np.float64)
    out = np.empty_like(states)
    out[n_rec - 1] = psi
    ds = 1.0 / n_sub
    for i0 in range(n_rec - 2, -1, -1):
        for m in range(n_sub):
            s = 1.0 - m * ds
            k1 = minus_bt(i0, s, psi)
            k2 = minus_bt(i0, s - 0.5 * ds, E2 * (psi + (0.5 * h) * k1))
            k3 = minus_bt(i0, s - 0.5 * ds, E2 * psi + (0.5 * h) * k2)
            k4 = minus_bt(i0, s - ds, E * psi + (h * E2) * k3)
            psi = E * psi + (h / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)
        if not np.all(np.isfinite(psi)):
            raise FloatingPointError(f"non-finite adjoint state at sample {i0}")
        out[i0] = psi
    return out
