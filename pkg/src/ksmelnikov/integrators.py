"""Time integration: stiff ETDRK4, classical RK4, and dense-output paths.

The ETDRK4 weights are evaluated by averaging over points on a complex
contour around each z = lambda dt, the standard cancellation-safe recipe
for the phi-function combinations.  Linear time-dependent systems go
through an RK4 with an optional exponential integrating factor for a
stiff diagonal part (with a zero diagonal it reduces exactly to classical
RK4); that is what makes backward adjoint integration stable at the same
step size as the flow itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import NonFiniteError, OutOfRangeError, ValidationError

__all__ = [
    "IntegrationConfig",
    "SampledPath",
    "Etdrk4Weights",
    "etdrk4_weights",
    "etdrk4_integrate",
    "rk4_integrate",
    "rk4_integrate_linear",
    "hermite_eval",
]


@dataclass(frozen=True)
class IntegrationConfig:
    """Step size, horizon, output decimation, and contour resolution."""

    dt: float = 1e-3
    horizon: float = 200.0
    sample_stride: int = 50
    contour_points: int = 32

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValidationError("dt", "must be positive")
        if not (self.horizon > 0):
            raise ValidationError("horizon", "must be positive")
        if self.sample_stride < 1:
            raise ValidationError("sample_stride", "must be >= 1")
        if self.contour_points < 16:
            raise ValidationError("contour_points", "must be >= 16")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class SampledPath:
    """Dense output: states and right-hand sides at increasing sample times."""

    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    derivs: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ValidationError("times", "need at least two samples")
        if not np.all(np.diff(t) > 0):
            raise ValidationError("times", "must be strictly increasing")
        s = np.asarray(self.states)
        d = np.asarray(self.derivs)
        if s.shape != (t.size, s.shape[1]) or d.shape != s.shape:
            raise ValidationError("states", "states/derivs must be (n_times, dim)")
        for arr in (t, s, d):
            flat = arr.view(np.float64) if np.iscomplexobj(arr) else arr
            if not np.all(np.isfinite(flat)):
                raise ValidationError("path", "all samples must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "derivs", d)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def interpolate(self, t):
        """Cubic Hermite value(s) at time(s) t; C1 in t."""
        return hermite_eval(self.times, self.states, self.derivs, t)

    def interpolate_deriv(self, t):
        """Time derivative of the Hermite interpolant at t."""
        return hermite_eval(self.times, self.states, self.derivs, t, derivative=True)

    def shifted(self, offset: float) -> "SampledPath":
        return SampledPath(self.times + offset, self.states, self.derivs)

    def window(self, t_lo: float, t_hi: float) -> "SampledPath":
        """Restriction to samples with t_lo <= t <= t_hi."""
        mask = (self.times >= t_lo - 1e-12) & (self.times <= t_hi + 1e-12)
        if np.count_nonzero(mask) < 2:
            raise OutOfRangeError("window contains fewer than two samples")
        return SampledPath(self.times[mask], self.states[mask], self.derivs[mask])


def hermite_eval(times, states, derivs, t, derivative=False):
    """Piecewise-cubic Hermite interpolation using stored derivatives.

    Exact on samples and reproduces cubics; raises OutOfRangeError beyond
    the sampled range (up to a 1e-9 * span slack for roundoff).
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    scalar = np.isscalar(t) or np.asarray(t).ndim == 0
    span = times[-1] - times[0]
    slack = 1e-9 * span
    if np.any(t_arr < times[0] - slack) or np.any(t_arr > times[-1] + slack):
        raise OutOfRangeError(
            f"time outside sampled range [{times[0]}, {times[-1]}]"
        )
    idx = np.clip(np.searchsorted(times, t_arr, side="right") - 1, 0, times.size - 2)
    h = times[idx + 1] - times[idx]
    s = np.clip((t_arr - times[idx]) / h, 0.0, 1.0)
    y0 = states[idx]
    y1 = states[idx + 1]
    d0 = derivs[idx]
    d1 = derivs[idx + 1]
    s = s[:, None]
    h = h[:, None]
    if derivative:
        # d/dt of the Hermite basis, chain rule through s = (t - t_i)/h
        g00 = (6.0 * s * s - 6.0 * s) / h
        g10 = 3.0 * s * s - 4.0 * s + 1.0
        g01 = (6.0 * s - 6.0 * s * s) / h
        g11 = 3.0 * s * s - 2.0 * s
        out = g00 * y0 + g10 * d0 + g01 * y1 + g11 * d1
    else:
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        out = h00 * y0 + (h10 * h) * d0 + h01 * y1 + (h11 * h) * d1
    return out[0] if scalar else out


class Etdrk4Weights(NamedTuple):
    E: np.ndarray
    E2: np.ndarray
    Q: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray


def etdrk4_weights(lin_diag, dt: float, contour_points: int = 32) -> Etdrk4Weights:
    """Stage weights for the diagonal linear part, via contour averaging."""
    lam = np.asarray(lin_diag, dtype=np.float64)
    m = contour_points
    r = np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
    lr = dt * lam[:, None] + r[None, :]
    elr = np.exp(lr)
    E = np.exp(dt * lam)
    E2 = np.exp(0.5 * dt * lam)
    Q = dt * np.real(np.mean((np.exp(lr / 2.0) - 1.0) / lr, axis=1))
    f1 = dt * np.real(np.mean((-4.0 - lr + elr * (4.0 - 3.0 * lr + lr**2)) / lr**3, axis=1))
    f2 = dt * np.real(np.mean((2.0 + lr + elr * (lr - 2.0)) / lr**3, axis=1))
    f3 = dt * np.real(np.mean((-4.0 - 3.0 * lr - lr**2 + elr * (4.0 - lr)) / lr**3, axis=1))
    return Etdrk4Weights(E, E2, Q, f1, f2, f3)


def etdrk4_integrate(
    initial,
    lin_diag,
    nonlinear: Callable | None,
    cfg: IntegrationConfig,
    t_start: float = 0.0,
) -> SampledPath:
    """Generic ETDRK4 march for v' = diag(lin) v + nonlinear(v, t).

    Works on real or complex vectors.  The KS systems route through the
    compiled kernels instead; this generic path backs tests and the planar
    machinery.  Raises NonFiniteError on blow-up.
    """
    v = np.array(initial)
    wts = etdrk4_weights(lin_diag, cfg.dt, cfg.contour_points)
    E, E2, Q, f1, f2, f3 = wts

    def nl(u, t):
        if nonlinear is None:
            return np.zeros_like(u)
        return nonlinear(u, t)

    n_steps = cfg.n_steps
    rec = np.arange(0, n_steps + 1, cfg.sample_stride)
    if rec[-1] != n_steps:
        rec = np.append(rec, n_steps)
    times = t_start + rec * cfg.dt
    states = np.empty((rec.size, v.size), dtype=v.dtype)
    derivs = np.empty_like(states)
    ptr = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps + 1):
            t = t_start + step * cfg.dt
            if ptr < rec.size and step == rec[ptr]:
                flat = v.view(np.float64) if np.iscomplexobj(v) else v
                if not np.all(np.isfinite(flat)):
                    raise NonFiniteError(f"non-finite state at t = {t}")
                states[ptr] = v
                derivs[ptr] = lin_diag * v + nl(v, t)
                ptr += 1
            if step == n_steps:
                break
            nv = nl(v, t)
            a = E2 * v + Q * nv
            na = nl(a, t + 0.5 * cfg.dt)
            b = E2 * v + Q * na
            nb = nl(b, t + 0.5 * cfg.dt)
            c = E2 * a + Q * (2.0 * nb - nv)
            nc = nl(c, t + cfg.dt)
            v = E * v + f1 * nv + 2.0 * f2 * (na + nb) + f3 * nc
    return SampledPath(times, states, derivs)


def rk4_integrate(
    f: Callable,
    x0,
    cfg: IntegrationConfig,
    t_start: float = 0.0,
) -> SampledPath:
    """Classical RK4 for x' = f(x, t) on non-stiff systems."""
    x = np.array(x0, dtype=np.float64)
    dt = cfg.dt
    n_steps = cfg.n_steps
    rec = np.arange(0, n_steps + 1, cfg.sample_stride)
    if rec[-1] != n_steps:
        rec = np.append(rec, n_steps)
    times = t_start + rec * dt
    states = np.empty((rec.size, x.size), dtype=np.float64)
    derivs = np.empty_like(states)
    ptr = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps + 1):
            t = t_start + step * dt
            if ptr < rec.size and step == rec[ptr]:
                if not np.all(np.isfinite(x)):
                    raise NonFiniteError(f"non-finite state at t = {t}")
                states[ptr] = x
                derivs[ptr] = f(x, t)
                ptr += 1
            if step == n_steps:
                break
            k1 = f(x, t)
            k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = f(x + dt * k3, t + dt)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return SampledPath(times, states, derivs)


def rk4_integrate_linear(
    matrix_fn: Callable[[float], np.ndarray],
    v0,
    t_start: float,
    t_end: float,
    dt: float,
    lin_diag=None,
    sample_stride: int = 1,
) -> SampledPath:
    """Fourth-order march of v' = A(t) v, forward or backward in time.

    With `lin_diag` given, A(t) is treated as diag(lin) + B(t) and the
    diagonal is integrated exactly per step through the Lawson
    integrating-factor transformation (classical RK4 when lin_diag is
    absent or zero).  t_end < t_start integrates backward; the returned
    path always has increasing times.  Raises NonFiniteError on overflow,
    the typical symptom of integrating a dichotomy the wrong way.
    """
    if dt <= 0:
        raise ValidationError("dt", "must be positive")
    v = np.array(v0, dtype=np.float64)
    span = t_end - t_start
    n_steps = max(1, int(round(abs(span) / dt)))
    h = span / n_steps

    if lin_diag is None:
        lam = np.zeros(v.size)
    else:
        lam = np.asarray(lin_diag, dtype=np.float64)
    E = np.exp(lam * h)
    E2 = np.exp(lam * (0.5 * h))

    def offdiag(t, u):
        return matrix_fn(t) @ u - lam * u

    rec = np.arange(0, n_steps + 1, sample_stride)
    if rec[-1] != n_steps:
        rec = np.append(rec, n_steps)
    times = t_start + rec * h
    states = np.empty((rec.size, v.size), dtype=np.float64)
    derivs = np.empty_like(states)
    ptr = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps + 1):
            t = t_start + step * h
            if ptr < rec.size and step == rec[ptr]:
                if not np.all(np.isfinite(v)):
                    raise NonFiniteError(f"non-finite state at t = {t}")
                states[ptr] = v
                derivs[ptr] = matrix_fn(t) @ v
                ptr += 1
            if step == n_steps:
                break
            k1 = offdiag(t, v)
            k2 = offdiag(t + 0.5 * h, E2 * (v + 0.5 * h * k1))
            k3 = offdiag(t + 0.5 * h, E2 * v + 0.5 * h * k2)
            k4 = offdiag(t + h, E * v + h * E2 * k3)
            v = E * v + (h / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)
    if h < 0:
        times = times[::-1].copy()
        states = states[::-1].copy()
        derivs = derivs[::-1].copy()
    return SampledPath(times, states, derivs)
