"""Random Melnikov functional under discrete white noise.

The discrete sum M = sum_n <psi(t_n), eta_n> dt with independent Gaussian
eta_n of componentwise variance D/dt is itself exactly Gaussian with
variance D sum_n ||psi(t_n)||^2 dt, so the ensemble statistics here are
identities to check, not approximations.  Noise acts directly on the real
working coordinates; realization r draws from the deterministic stream
SeedSequence(seed, spawn_key=(stream, r)), which parallelizes and merges
reproducibly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGridError, ValidationError
from .melnikov import AdjointTrajectory

__all__ = [
    "NoiseConfig",
    "EnsembleResult",
    "predicted_variance",
    "sample_melnikov",
    "run_ensemble",
    "histogram_data",
    "fit_loglog_slope",
    "rms_scaling_fit",
    "gaussian_density",
]


@dataclass(frozen=True)
class NoiseConfig:
    intensity: float = 0.02  # D
    dt: float = 1e-3
    ensemble: int = 500
    seed: int = 1889604818

    def __post_init__(self):
        if self.intensity < 0:
            raise ValidationError("intensity", "must be >= 0")
        if not (self.dt > 0):
            raise ValidationError("dt", "must be positive")
        if self.ensemble < 1:
            raise ValidationError("ensemble", "must be >= 1")


@dataclass(frozen=True)
class EnsembleResult:
    samples: np.ndarray = field(repr=False)
    sample_mean: float
    sample_var: float
    predicted_var: float
    rms: float

    @property
    def ensemble(self) -> int:
        return self.samples.size


def predicted_variance(adjoint: AdjointTrajectory, noise: NoiseConfig) -> float:
    """D * sum_n ||psi(t_n)||^2 * dt with dt the adjoint sample spacing."""
    dt = adjoint.spacing
    return float(noise.intensity * np.sum(adjoint.path.states**2) * dt)


def _stream(noise: NoiseConfig, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(noise.seed, spawn_key=(stream, index)))


def sample_melnikov(
    adjoint: AdjointTrajectory,
    noise: NoiseConfig,
    realization: int,
    stream: int = 0,
) -> float:
    """One draw of the random splitting integral; deterministic in
    (seed, stream, realization)."""
    if noise.intensity == 0.0:
        return 0.0
    dt = adjoint.spacing
    psi = adjoint.path.states
    rng = _stream(noise, realization, stream)
    eta = rng.normal(0.0, np.sqrt(noise.intensity / dt), size=psi.shape)
    return float(dt * np.sum(psi * eta))


def run_ensemble(
    adjoint: AdjointTrajectory,
    noise: NoiseConfig,
    stream: int = 0,
    threads: int = 1,
) -> EnsembleResult:
    """Ensemble of independent realizations, merged by realization index."""
    idx = range(noise.ensemble)

    def one(r):
        return sample_melnikov(adjoint, noise, r, stream)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = np.fromiter(pool.map(one, idx), dtype=np.float64, count=noise.ensemble)
    else:
        samples = np.fromiter((one(r) for r in idx), dtype=np.float64, count=noise.ensemble)
    mean = float(np.mean(samples))
    var = float(np.var(samples, ddof=1)) if samples.size > 1 else 0.0
    rms = float(np.sqrt(np.mean(samples**2)))
    return EnsembleResult(
        samples=samples,
        sample_mean=mean,
        sample_var=var,
        predicted_var=predicted_variance(adjoint, noise),
        rms=rms,
    )


def histogram_data(result: EnsembleResult, n_bins: int = 30, span_sigmas: float = 4.0):
    """Bin edges/counts over +-span_sigmas predicted deviations, plus the
    Gaussian density at bin centers (for the overlay column)."""
    sigma = np.sqrt(result.predicted_var)
    if sigma == 0.0:
        sigma = max(1.0, float(np.max(np.abs(result.samples))) or 1.0)
    edges = np.linspace(-span_sigmas * sigma, span_sigmas * sigma, n_bins + 1)
    counts, _ = np.histogram(result.samples, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    if result.predicted_var > 0:
        pdf = np.array([gaussian_density(c, result.predicted_var) for c in centers])
    else:
        pdf = np.zeros_like(centers)
    return edges, counts, pdf


def fit_loglog_slope(values_x, values_y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(values_x, dtype=np.float64)
    y = np.asarray(values_y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValidationError("grid", "need matching arrays of length >= 2")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValidationError("grid", "log-log fit needs positive values")
    if np.allclose(x, x[0]):
        raise DegenerateGridError("all abscissae equal; slope undefined")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def rms_scaling_fit(
    adjoint: AdjointTrajectory,
    intensity_grid,
    ensemble: int,
    seed: int = 1889604818,
) -> tuple[float, list[EnsembleResult]]:
    """Slope of log(rms) vs log(D) over an intensity grid; expected 1/2.

    Each grid point uses its own deterministic stream family.
    """
    grid = np.asarray(intensity_grid, dtype=np.float64)
    if grid.size < 3:
        raise ValidationError("intensity_grid", "need at least 3 intensities")
    if np.any(grid <= 0):
        raise ValidationError("intensity_grid", "intensities must be positive")
    if np.allclose(grid, grid[0]):
        raise DegenerateGridError("all intensities equal; slope undefined")
    results = []
    for i, d in enumerate(grid):
        cfg = NoiseConfig(intensity=float(d), dt=1e-3, ensemble=ensemble, seed=seed)
        results.append(run_ensemble(adjoint, cfg, stream=i))
    slope = fit_loglog_slope(grid, [r.rms for r in results])
    return slope, results


def gaussian_density(m: float, variance: float) -> float:
    """Zero-mean Gaussian density at m."""
    if variance <= 0:
        raise ValidationError("variance", "must be positive")
    return float(np.exp(-0.5 * m * m / variance) / np.sqrt(2.0 * np.pi * variance))
