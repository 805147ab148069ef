"""Fourier-Galerkin representation of the Kuramoto-Sivashinsky field.

The solution u(x, t) on the periodic domain [0, L] is carried as complex
coefficients a_k, k = 0..N, with the negative modes implied by the reality
condition a_{-k} = conj(a_k).  The spatial mean a_0 is pinned to zero: the
flow conserves it and the whole analysis lives in the zero-mean subspace.

Sign conventions: u(x) = sum_k a_k exp(i k q x) with q = 2 pi / L, so a
pure sine mode sin(k q x) has a_k = -i/2.  The "Mode 1 / Mode 2" plane used
for phase-space projections is the pair of sine amplitudes (-2 Im a_1,
-2 Im a_2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "DomainConfig",
    "ModalState",
    "RealField",
    "linear_growth_rate",
    "growth_rates",
    "ks_rhs",
    "tangent_apply",
    "to_physical",
    "from_physical",
    "project_modes",
    "real_coordinates",
    "state_from_real",
    "odd_coordinates",
    "state_from_odd",
    "zero_state",
    "sine_state",
]


@dataclass(frozen=True)
class DomainConfig:
    """Periodic domain [0, L] truncated at Fourier mode N."""

    length: float
    n_modes: int

    def __post_init__(self):
        if not (self.length > 0):
            raise ValidationError("length", "must be positive")
        if not (isinstance(self.n_modes, (int, np.integer)) and self.n_modes >= 1):
            raise ValidationError("n_modes", "must be an integer >= 1")

    @property
    def q(self) -> float:
        """Fundamental wavenumber 2 pi / L, always recomputed from L."""
        return 2.0 * np.pi / self.length


@dataclass(frozen=True)
class ModalState:
    """Complex coefficients a_k, k = 0..N; a_{-k} = conj(a_k) is implied."""

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.size < 2:
            raise ValidationError("coeffs", "must be a 1-d array of length N+1 >= 2")
        if not np.all(np.isfinite(c.view(np.float64))):
            raise ValidationError("coeffs", "must be finite")
        if c[0] != 0:
            raise ValidationError("coeffs", "zero mode a_0 must be exactly 0")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self) -> int:
        return self.coeffs.size - 1


@dataclass(frozen=True)
class RealField:
    """Equispaced grid samples of u(x) on [0, L)."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size < 2:
            raise ValidationError("samples", "must be a 1-d array of length >= 2")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def grid_size(self) -> int:
        return self.samples.size


def zero_state(dom: DomainConfig) -> ModalState:
    return ModalState(np.zeros(dom.n_modes + 1, dtype=np.complex128))


def sine_state(dom: DomainConfig, harmonic: int = 1, amplitude: float = 1.0) -> ModalState:
    """State whose field is amplitude * sin(harmonic * q * x)."""
    if not (1 <= harmonic <= dom.n_modes):
        raise ValidationError("harmonic", f"must be in 1..{dom.n_modes}")
    c = np.zeros(dom.n_modes + 1, dtype=np.complex128)
    c[harmonic] = -0.5j * amplitude
    return ModalState(c)


def linear_growth_rate(k: int, dom: DomainConfig) -> float:
    """Growth rate k^2 q^2 - k^4 q^4 of mode k in the linearized flow."""
    if abs(k) > dom.n_modes:
        raise ValidationError("k", f"|k| must be <= N = {dom.n_modes}")
    kq2 = (k * dom.q) ** 2
    return kq2 - kq2 * kq2


def growth_rates(dom: DomainConfig) -> np.ndarray:
    """Array of linear growth rates for k = 0..N."""
    kq2 = (np.arange(dom.n_modes + 1) * dom.q) ** 2
    return kq2 - kq2 * kq2


def _extend_line(coeffs: np.ndarray) -> np.ndarray:
    """Full coefficient line a_{-N}..a_N from the stored half line."""
    n = coeffs.size - 1
    line = np.empty(2 * n + 1, dtype=np.complex128)
    line[n:] = coeffs
    line[:n] = np.conj(coeffs[1:][::-1])
    return line


def convolve_truncated(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Galerkin-truncated convolution sum_m a_m b_{k-m} for k = 0..N.

    Both index constraints |m| <= N and |k-m| <= N are enforced by
    construction: the full lines carry no modes beyond N.
    """
    n = a.size - 1
    full = np.convolve(_extend_line(a), _extend_line(b))
    return full[2 * n : 3 * n + 1]


def ks_rhs(state: ModalState, dom: DomainConfig) -> np.ndarray:
    """Galerkin right-hand side; returns the tangent array for k = 0..N.

    da_k/dt = (k^2 q^2 - k^4 q^4) a_k - (i k q / 2) sum_m a_m a_{k-m},
    convolution truncated to the retained modes.  The k = 0 component is
    structurally zero.
    """
    if state.n_modes != dom.n_modes:
        raise ValidationError("state", "mode count does not match domain")
    a = state.coeffs
    k = np.arange(dom.n_modes + 1)
    conv = convolve_truncated(a, a)
    out = growth_rates(dom) * a - 0.5j * k * dom.q * conv
    out[0] = 0.0
    return out


def tangent_apply(state: ModalState, tangent: np.ndarray, dom: DomainConfig) -> np.ndarray:
    """Directional derivative of ks_rhs at `state` applied to `tangent`.

    The quadratic term differentiates to twice the symmetric convolution.
    """
    a = state.coeffs
    v = np.asarray(tangent, dtype=np.complex128)
    k = np.arange(dom.n_modes + 1)
    conv = convolve_truncated(a, v)
    out = growth_rates(dom) * v - 1.0j * k * dom.q * conv
    out[0] = 0.0
    return out


def to_physical(state: ModalState, grid_size: int) -> RealField:
    """Reconstruct u(x) on `grid_size` equispaced points of [0, L)."""
    n = state.n_modes
    if grid_size < 2 * n + 2:
        raise ValidationError("grid_size", f"must be >= 2N+2 = {2 * n + 2} to avoid aliasing")
    spec = np.zeros(grid_size // 2 + 1, dtype=np.complex128)
    spec[: n + 1] = state.coeffs
    return RealField(grid_size * np.fft.irfft(spec, n=grid_size))


def from_physical(fieldvals: RealField, dom: DomainConfig) -> ModalState:
    """Project grid samples back onto the retained modes."""
    m = fieldvals.grid_size
    if m < 2 * dom.n_modes + 1:
        raise ValidationError("grid_size", f"must be >= 2N+1 = {2 * dom.n_modes + 1}")
    spec = np.fft.rfft(fieldvals.samples) / m
    coeffs = spec[: dom.n_modes + 1].copy()
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    if abs(coeffs[0]) > 1e-8 * scale:
        raise ValidationError("samples", "field has a nonzero spatial mean")
    coeffs[0] = 0.0
    return ModalState(coeffs)


def project_modes(state: ModalState) -> tuple[float, float]:
    """Sine amplitudes of the first two modes, the standard projection plane."""
    c = state.coeffs
    return (-2.0 * float(c[1].imag), -2.0 * float(c[2].imag))


# ---------------------------------------------------------------------------
# Coordinate charts used by the dense linear algebra.
#
# Full chart: 2N real coordinates (Re a_1, Im a_1, ..., Re a_N, Im a_N).
# Odd chart: N real coordinates b_k = Im a_k for states with purely
# imaginary coefficients (odd fields u(-x) = -u(x)); the KS flow preserves
# that subspace and on it the translation zero-mode is absent.
# ---------------------------------------------------------------------------


def real_coordinates(state: ModalState) -> np.ndarray:
    """Interleaved real coordinates (Re a_k, Im a_k), k = 1..N."""
    c = state.coeffs[1:]
    out = np.empty(2 * c.size, dtype=np.float64)
    out[0::2] = c.real
    out[1::2] = c.imag
    return out


def state_from_real(x: np.ndarray, dom: DomainConfig) -> ModalState:
    x = np.asarray(x, dtype=np.float64)
    if x.size != 2 * dom.n_modes:
        raise ValidationError("x", f"expected length 2N = {2 * dom.n_modes}")
    c = np.zeros(dom.n_modes + 1, dtype=np.complex128)
    c[1:] = x[0::2] + 1.0j * x[1::2]
    return ModalState(c)


def odd_coordinates(state: ModalState, tol: float = 1e-10) -> np.ndarray:
    """Coordinates b_k = Im a_k on the odd subspace; rejects non-odd states."""
    c = state.coeffs[1:]
    scale = max(1.0, float(np.max(np.abs(c)) if c.size else 0.0))
    if np.max(np.abs(c.real)) > tol * scale:
        raise ValidationError("state", "not in the odd (purely imaginary) subspace")
    return c.imag.copy()


def state_from_odd(b: np.ndarray, dom: DomainConfig) -> ModalState:
    b = np.asarray(b, dtype=np.float64)
    if b.size != dom.n_modes:
        raise ValidationError("b", f"expected length N = {dom.n_modes}")
    c = np.zeros(dom.n_modes + 1, dtype=np.complex128)
    c[1:] = 1.0j * b
    return ModalState(c)
