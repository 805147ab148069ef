"""Approximate homoclinic orbits by shooting along the unstable subspace.

A shot launches from the equilibrium displaced by delta along a unit
direction in the unstable subspace and integrates for a fixed duration;
its quality is the relative return distance: the minimum of
||a(t) - a_s|| over the second half of the run, normalized by the peak
excursion.  The search optimizes (delta, direction) with a derivative-free
method; delta mainly re-times the excursion (it slides the launch point
along the unstable manifold), the direction angles select the manifold
trajectory.

The best orbit is truncated at its closest return, clipped where the
excursion falls below clip_fraction * peak, and recentred so that t = 0
sits on the sample of maximum excursion.  Orbits that miss return_tol are
returned flagged (converged = False) rather than raised: downstream
quadrature only needs an exact trajectory of the truncated system, which
any shot is.

clip_fraction trades tail coverage against adjoint-pairing conditioning:
along a true homoclinic the tangent decays like exp(-lambda t), so the
conserved pairing constant shrinks like exp(-2 lambda T_clip) while
roundoff in it grows like exp(+lambda T_clip); clipping around 1e-3 of
the peak keeps the normalization well above the noise floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.optimize

from .equilibria import SpectralData, SteadyState, unstable_basis
from .errors import (
    NonFiniteError,
    OutOfRangeError,
    UnstableSubspaceEmptyError,
    ValidationError,
)
from .integrators import IntegrationConfig, SampledPath

__all__ = [
    "ShootingConfig",
    "ShotResult",
    "OrbitTrajectory",
    "shoot",
    "find_homoclinic",
    "orbit_interpolate",
    "tail_decay_rate",
]

_FAIL_DISTANCE = 2.0  # objective value for blown-up shots; real ones are <= 1


@dataclass(frozen=True)
class ShootingConfig:
    duration: float = 200.0
    dt: float = 1e-3
    sample_stride: int = 50
    delta_range: tuple[float, float] = (1e-6, 5e-2)
    return_tol: float = 1e-3
    clip_fraction: float = 1e-3
    max_evals: int = 120
    contour_points: int = 32

    def __post_init__(self):
        if not (self.duration > 0):
            raise ValidationError("duration", "must be positive")
        lo, hi = self.delta_range
        if not (0.0 < lo < hi < 0.1):
            raise ValidationError("delta_range", "must satisfy 0 < lo < hi < 0.1")
        if not (self.return_tol > 0):
            raise ValidationError("return_tol", "must be positive")
        if not (0 < self.clip_fraction < 1):
            raise ValidationError("clip_fraction", "must be in (0, 1)")

    def integration(self) -> IntegrationConfig:
        return IntegrationConfig(
            dt=self.dt,
            horizon=self.duration,
            sample_stride=self.sample_stride,
            contour_points=self.contour_points,
        )


@dataclass(frozen=True)
class ShotResult:
    path: SampledPath
    return_distance: float
    peak: float
    t_peak: float
    t_return: float
    delta: float
    direction: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class OrbitTrajectory:
    """Truncated, recentred approximate connecting orbit."""

    path: SampledPath
    steady: SteadyState
    return_distance: float
    initial_return_distance: float
    t_center: float  # original (pre-shift) time of maximum excursion
    time_offset_applied: bool
    converged: bool
    clip_fraction: float
    n_evaluations: int
    delta: float
    direction: np.ndarray = field(repr=False)

    @property
    def peak_excursion(self) -> float:
        return float(np.max(np.linalg.norm(self.path.states - self.steady.x, axis=1)))

    def excursion(self) -> np.ndarray:
        return np.linalg.norm(self.path.states - self.steady.x, axis=1)


def shoot(system, steady: SteadyState, direction, delta: float, cfg: ShootingConfig) -> ShotResult:
    """Single shot from steady.x + delta * direction; never optimizes."""
    direction = np.asarray(direction, dtype=np.float64)
    nrm = np.linalg.norm(direction)
    if not nrm > 0:
        raise ValidationError("direction", "must be nonzero")
    direction = direction / nrm
    lo, hi = cfg.delta_range
    if not (lo <= abs(delta) <= hi):
        raise ValidationError("delta", f"|delta| must lie in [{lo}, {hi}]")
    x0 = steady.x + delta * direction
    path = system.integrate(x0, cfg.integration())
    dist = np.linalg.norm(path.states - steady.x, axis=1)
    peak = float(np.max(dist))
    i_peak = int(np.argmax(dist))
    half = np.searchsorted(path.times, path.times[0] + cfg.duration / 2.0)
    i_ret = half + int(np.argmin(dist[half:]))
    return ShotResult(
        path=path,
        return_distance=float(dist[i_ret] / peak),
        peak=peak,
        t_peak=float(path.times[i_peak]),
        t_return=float(path.times[i_ret]),
        delta=float(delta),
        direction=direction,
    )


def _sphere_direction(basis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Unit direction in span(basis) from hyperspherical angles."""
    m = basis.shape[1]
    if m == 1:
        return basis[:, 0]
    if m == 2:
        u = np.array([np.cos(angles[0]), np.sin(angles[0])])
    else:
        u = np.array(
            [
                np.cos(angles[0]) * np.sin(angles[1]),
                np.sin(angles[0]) * np.sin(angles[1]),
                np.cos(angles[1]),
            ]
        )
    return basis @ u


def find_homoclinic(
    system,
    steady: SteadyState,
    spectral: SpectralData,
    cfg: ShootingConfig,
) -> OrbitTrajectory:
    """Minimize the relative return distance over (delta, direction).

    Golden-section style bounded scalar search when the unstable subspace
    is one-dimensional (both branch signs tried), Nelder-Mead over at most
    three parameters otherwise.  Returns the best orbit found; converged
    marks whether return_tol was met.
    """
    if spectral.n_unstable == 0:
        raise UnstableSubspaceEmptyError("equilibrium has no unstable directions")
    basis = unstable_basis(spectral, max_dim=3)
    m = basis.shape[1]
    lo, hi = cfg.delta_range
    log_lo, log_hi = np.log10(lo), np.log10(hi)
    log_mid = 0.5 * (log_lo + log_hi)

    evals = [0]
    best: list = [None]
    initial_distance = [None]

    def evaluate(delta: float, direction: np.ndarray) -> float:
        evals[0] += 1
        try:
            shot = shoot(system, steady, direction, delta, cfg)
        except NonFiniteError:
            return _FAIL_DISTANCE
        if initial_distance[0] is None:
            initial_distance[0] = shot.return_distance
        if best[0] is None or shot.return_distance < best[0].return_distance:
            best[0] = shot
        return shot.return_distance

    if m == 1:
        for sign in (+1.0, -1.0):
            if evals[0] >= cfg.max_evals:
                break
            scipy.optimize.minimize_scalar(
                lambda p: evaluate(sign * 10.0**p, basis[:, 0]),
                bounds=(log_lo, log_hi),
                method="bounded",
                options={"xatol": 1e-4, "maxiter": max(4, cfg.max_evals // 2 - 2)},
            )
    else:
        n_params = m  # log10 delta + (m - 1) angles
        x0 = np.zeros(n_params)
        x0[0] = log_mid
        if m == 3:
            x0[2] = 0.5 * np.pi

        def objective(params):
            if evals[0] >= cfg.max_evals:
                return _FAIL_DISTANCE
            p = float(np.clip(params[0], log_lo, log_hi))
            direction = _sphere_direction(basis, params[1:])
            penalty = 0.1 * abs(params[0] - p)
            return evaluate(10.0**p, direction) + penalty

        step = np.full(n_params, 0.6)
        step[0] = 0.5 * (log_hi - log_lo) * 0.4
        simplex = np.vstack([x0] + [x0 + step[i] * np.eye(n_params)[i] for i in range(n_params)])
        scipy.optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "maxfev": cfg.max_evals,
                "xatol": 1e-6,
                "fatol": 1e-12,
            },
        )

    shot = best[0]
    if shot is None:
        raise NonFiniteError("every shot blew up; shrink delta_range")
    orbit = _build_orbit(shot, steady, cfg, float(initial_distance[0]), evals[0])
    return orbit


def _build_orbit(
    shot: ShotResult,
    steady: SteadyState,
    cfg: ShootingConfig,
    initial_distance: float,
    n_evals: int,
) -> OrbitTrajectory:
    path = shot.path
    dist = np.linalg.norm(path.states - steady.x, axis=1)
    i_ret = int(np.searchsorted(path.times, shot.t_return))
    # keep departure..closest-return, then clip tails below the excursion floor
    keep = slice(0, i_ret + 1)
    d = dist[keep]
    thresh = cfg.clip_fraction * shot.peak
    above = np.nonzero(d >= thresh)[0]
    if above.size < 2:
        raise ValidationError("orbit", "excursion never exceeded the clip threshold")
    i0, i1 = int(above[0]), int(above[-1])
    times = path.times[keep][i0 : i1 + 1]
    states = path.states[keep][i0 : i1 + 1]
    derivs = path.derivs[keep][i0 : i1 + 1]
    i_peak = int(np.argmax(np.linalg.norm(states - steady.x, axis=1)))
    t_center = float(times[i_peak])
    trimmed = SampledPath(times - t_center, states, derivs)
    return OrbitTrajectory(
        path=trimmed,
        steady=steady,
        return_distance=shot.return_distance,
        initial_return_distance=initial_distance,
        t_center=t_center,
        time_offset_applied=True,
        converged=shot.return_distance <= cfg.return_tol,
        clip_fraction=cfg.clip_fraction,
        n_evaluations=n_evals,
        delta=shot.delta,
        direction=shot.direction,
    )


def orbit_interpolate(orbit: OrbitTrajectory, t: float):
    """Cubic Hermite state on the orbit; OutOfRangeError beyond its span."""
    return orbit.path.interpolate(t)


def tail_decay_rate(orbit: OrbitTrajectory, fraction: float = 0.1) -> float:
    """Log-linear slope of the excursion over the trailing `fraction` of the orbit."""
    if not (0 < fraction < 1):
        raise ValidationError("fraction", "must be in (0, 1)")
    times = orbit.path.times
    t_cut = times[-1] - fraction * (times[-1] - times[0])
    mask = times >= t_cut
    if np.count_nonzero(mask) < 3:
        raise OutOfRangeError("too few samples in the tail window")
    d = np.linalg.norm(orbit.path.states[mask] - orbit.steady.x, axis=1)
    if np.any(d <= 0):
        raise ValidationError("orbit", "zero excursion in the tail")
    slope = np.polyfit(times[mask], np.log(d), 1)[0]
    return float(slope)
