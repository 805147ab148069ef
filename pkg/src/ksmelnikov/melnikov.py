"""Bounded adjoint profile along an orbit and Melnikov splitting functions.

The adjoint system psi' = -J(t)^T psi is seeded at the orbit's final time
with the left eigenvector of the equilibrium Jacobian for the leading
unstable eigenvalue and integrated backward: backward in time that is the
expanding direction, so the bounded solution dominates numerically.  The
pairing <psi(t), da/dt(t)> is a conserved quantity of the exact dynamics
along any true trajectory; a single global rescale sets it to one at the
orbit center (t = 0) and the residual spread of the pairing over time is
the integration-quality diagnostic.  Per-step renormalization would mask
exactly the errors that diagnostic must expose, so it is deliberately
absent.

All inner products are Euclidean dots on the working real coordinates.
The L2 pairing of the continuous problem differs by a fixed Parseval
factor of the domain length; zeros, transversality, and variance-ratio
statements are invariant under that overall scale, and the same
convention is used on the forcing side, so the factor cancels everywhere
it could matter.  Absolute magnitudes of the splitting coefficients are
therefore convention-bound; documented here once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegeneratePairingError, OutOfRangeError, ValidationError
from .homoclinic import OrbitTrajectory
from .integrators import SampledPath, rk4_integrate_linear

__all__ = [
    "AdjointTrajectory",
    "ForcingProfile",
    "MelnikovResult",
    "adjoint_solve",
    "jacobian_on_orbit",
    "melnikov_general",
    "melnikov_periodic",
    "frequency_sweep",
    "transversality_check",
    "simpson_weights",
    "sine_forcing",
    "harmonic_zeros",
]


@dataclass(frozen=True)
class AdjointTrajectory:
    """Normalized adjoint samples aligned with the orbit sample grid."""

    path: SampledPath
    normalization_residual: float
    scale_factor: float
    pairing: np.ndarray = field(repr=False)
    bounded_proxy: bool = True

    @property
    def spacing(self) -> float:
        return float(self.path.times[1] - self.path.times[0])


@dataclass(frozen=True)
class ForcingProfile:
    """Spatial forcing profile on working coordinates; zero-mean by chart."""

    vec: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValidationError("vec", "must be finite")
        object.__setattr__(self, "vec", v)


def sine_forcing(system, harmonic: int = 1) -> ForcingProfile:
    """Profile of G(x) = sin(harmonic * q * x) on the system's chart."""
    n = system.n
    if not (1 <= harmonic <= n):
        raise ValidationError("harmonic", f"must be in 1..{n}")
    if system.subspace == "odd":
        vec = np.zeros(n)
        vec[harmonic - 1] = -0.5  # Im of the -i/2 sine coefficient
    else:
        vec = np.zeros(2 * n)
        vec[2 * (harmonic - 1) + 1] = -0.5
    return ForcingProfile(vec, f"sin({harmonic}qx)")


@dataclass(frozen=True)
class MelnikovResult:
    """Harmonic splitting function M(t0) = A cos(w t0) + B sin(w t0)."""

    omega: float
    coeff_cos: float  # A
    coeff_sin: float  # B
    amplitude: float
    t0_samples: np.ndarray = field(repr=False)
    m_samples: np.ndarray = field(repr=False)
    zeros: tuple  # ((t0, slope), ...) within one period, ascending t0


def jacobian_on_orbit(orbit: OrbitTrajectory, system, t: float, clamp: bool = False):
    """Jacobian along the orbit; with clamp=True, times beyond the span
    evaluate at the anchor equilibrium (the asymptotic limit)."""
    try:
        x = orbit.path.interpolate(t)
    except OutOfRangeError:
        if not clamp:
            raise
        x = orbit.steady.x
    return system.jacobian(x)


def _leading_left_unstable(jac: np.ndarray) -> tuple[np.ndarray, complex]:
    vals, vecs = scipy.linalg.eig(jac.T)
    i = int(np.argmax(vals.real))
    if vals[i].real <= 0:
        raise ValidationError("steady", "no unstable eigenvalue to seed the adjoint")
    v = vecs[:, i]
    vr = v.real if np.linalg.norm(v.real) >= np.linalg.norm(v.imag) else v.imag
    return vr / np.linalg.norm(vr), complex(vals[i])


def adjoint_solve(
    system,
    orbit: OrbitTrajectory,
    n_sub: int | None = None,
    window: tuple[float, float] | None = None,
) -> AdjointTrajectory:
    """Backward adjoint integration along the orbit with a single global rescale.

    n_sub is the number of integration substeps per orbit sample interval
    (default: one substep per underlying flow step).  The returned samples
    share the orbit's time grid (restricted to `window` when given).
    """
    path = orbit.path if window is None else orbit.path.window(*window)
    spacing = np.diff(path.times)
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
        raise ValidationError("orbit", "adjoint solve needs uniform sample spacing")
    dt_sample = float(spacing[0])
    if n_sub is None:
        n_sub = max(1, int(round(dt_sample / 1e-3)))

    psi_end, _ = _leading_left_unstable(system.jacobian(orbit.steady.x))

    if hasattr(system, "adjoint_backward"):
        psi = system.adjoint_backward(path, psi_end, n_sub)
    else:
        interp_t = path.times

        def a_of(t):
            return path.interpolate(t)

        def matrix_fn(t):
            return -system.jacobian(a_of(t)).T

        lin = getattr(system, "lin_diag", None)
        adj_path = rk4_integrate_linear(
            matrix_fn,
            psi_end,
            t_start=float(path.times[-1]),
            t_end=float(path.times[0]),
            dt=dt_sample / n_sub,
            lin_diag=None if lin is None else -np.asarray(lin),
            sample_stride=n_sub,
        )
        if adj_path.times.size != interp_t.size:
            raise ValidationError("adjoint", "sample grid mismatch")
        psi = adj_path.states

    pairing = np.einsum("ij,ij->i", psi, path.derivs)
    i0 = int(np.argmin(np.abs(path.times)))
    p0 = float(pairing[i0])
    if abs(p0) < 1e-12:
        raise DegeneratePairingError(
            f"pairing at the orbit center is {p0:.3e}; cannot normalize"
        )
    scale = 1.0 / p0
    psi = psi * scale
    pairing = pairing * scale
    residual = float(np.max(np.abs(pairing - 1.0)))

    norms = np.linalg.norm(psi, axis=1)
    peak = float(np.max(norms))
    bounded = norms[0] <= peak + 1e-300 and norms[-1] <= peak + 1e-300

    derivs = np.empty_like(psi)
    for i in range(psi.shape[0]):
        derivs[i] = -system.jacobian(path.states[i]).T @ psi[i]
    adj = AdjointTrajectory(
        path=SampledPath(path.times, psi, derivs),
        normalization_residual=residual,
        scale_factor=scale,
        pairing=pairing,
        bounded_proxy=bounded,
    )
    return adj


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights on a uniform grid of n points.

    Odd interval counts get a 3/8 closure on the last three intervals;
    n = 2 degenerates to the trapezoid rule.
    """
    if n < 2:
        raise ValidationError("n", "need at least two samples")
    if n == 2:
        return np.array([0.5, 0.5]) * h
    w = np.zeros(n)
    intervals = n - 1
    if intervals % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * (h / 3.0)
    # Simpson on the first (n-4) intervals, 3/8 rule on the final three
    head = n - 3
    w_head = simpson_weights(head, h) if head >= 2 else np.zeros(1)
    w[:head] += w_head
    w[head - 1 :] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


def _quadrature_slice(adjoint: AdjointTrajectory, window):
    times = adjoint.path.times
    psi = adjoint.path.states
    if window is not None:
        lo, hi = window
        mask = (times >= lo - 1e-12) & (times <= hi + 1e-12)
        if np.count_nonzero(mask) < 2:
            raise OutOfRangeError("quadrature window contains fewer than two samples")
        times = times[mask]
        psi = psi[mask]
    w = simpson_weights(times.size, float(times[1] - times[0]))
    return times, psi, w


def melnikov_general(
    orbit: OrbitTrajectory,
    adjoint: AdjointTrajectory,
    forcing,
    t0: float = 0.0,
    window: tuple[float, float] | None = None,
) -> float:
    """Quadrature of <psi(t), F(t + t0)> over the orbit samples.

    `forcing` maps a time to a working-coordinate vector.
    """
    times, psi, w = _quadrature_slice(adjoint, window)
    vals = np.array([psi[i] @ np.asarray(forcing(t + t0)) for i, t in enumerate(times)])
    return float(w @ vals)


def harmonic_zeros(coeff_cos: float, coeff_sin: float, omega: float) -> tuple:
    """Zeros of A cos(w t0) + B sin(w t0) in [0, 2 pi / w), with slopes.

    For a nonzero amplitude and omega > 0 there are exactly two per
    period, with slopes -+ omega * amplitude of alternating sign.
    """
    amplitude = float(np.hypot(coeff_cos, coeff_sin))
    if omega <= 0 or amplitude == 0.0:
        return ()
    period = 2.0 * np.pi / omega
    phi = np.arctan2(coeff_sin, coeff_cos)
    roots = []
    for nhalf in range(-2, 4):
        t0 = ((phi + 0.5 * np.pi + nhalf * np.pi) / omega) % period
        dup = any(
            abs(t0 - r) < 1e-12 * period or abs(abs(t0 - r) - period) < 1e-12 * period
            for r, _ in roots
        )
        if not dup:
            slope = omega * (-coeff_cos * np.sin(omega * t0) + coeff_sin * np.cos(omega * t0))
            roots.append((float(t0), float(slope)))
    roots.sort(key=lambda z: z[0])
    return tuple(roots)


def melnikov_periodic(
    orbit: OrbitTrajectory,
    adjoint: AdjointTrajectory,
    profile: ForcingProfile,
    omega: float,
    n_phase_samples: int = 128,
    window: tuple[float, float] | None = None,
) -> MelnikovResult:
    """Splitting coefficients for forcing G(x) cos(omega (t + t0)).

    Uses the same quadrature weights as melnikov_general, so the harmonic
    decomposition M(t0) = A cos + B sin is a discrete identity, not an
    approximation.  Zeros are solved analytically from (A, B); for
    amplitude > 0 and omega > 0 there are exactly two per period with
    slopes of alternating sign and magnitude omega * amplitude.
    """
    if omega < 0:
        raise ValidationError("omega", "must be >= 0")
    times, psi, w = _quadrature_slice(adjoint, window)
    proj = psi @ profile.vec
    coeff_cos = float(np.dot(w * proj, np.cos(omega * times)))
    if omega == 0.0:
        coeff_sin = 0.0
    else:
        coeff_sin = -float(np.dot(w * proj, np.sin(omega * times)))
    amplitude = float(np.hypot(coeff_cos, coeff_sin))

    if omega > 0:
        period = 2.0 * np.pi / omega
    else:
        period = 1.0
    t0s = np.linspace(0.0, period, n_phase_samples, endpoint=False)
    msamp = coeff_cos * np.cos(omega * t0s) + coeff_sin * np.sin(omega * t0s)

    zeros = harmonic_zeros(coeff_cos, coeff_sin, omega)
    return MelnikovResult(
        omega=float(omega),
        coeff_cos=coeff_cos,
        coeff_sin=coeff_sin,
        amplitude=amplitude,
        t0_samples=t0s,
        m_samples=msamp,
        zeros=zeros,
    )


def frequency_sweep(
    orbit: OrbitTrajectory,
    adjoint: AdjointTrajectory,
    profile: ForcingProfile,
    omega_grid,
    window: tuple[float, float] | None = None,
    threads: int = 1,
) -> list[MelnikovResult]:
    """One MelnikovResult per frequency; deterministic order."""
    omega_grid = np.asarray(omega_grid, dtype=np.float64)
    if omega_grid.size == 0:
        raise ValidationError("omega_grid", "must be nonempty")

    def one(w):
        return melnikov_periodic(orbit, adjoint, profile, float(w), window=window)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, omega_grid))
    return [one(w) for w in omega_grid]


def transversality_check(result: MelnikovResult, tol: float = 1e-12) -> bool:
    """True when the harmonic amplitude clears the degeneracy tolerance,
    i.e. simple zeros exist at exactly two phases per period."""
    return result.amplitude > tol
