"""Planar end-to-end oracle for the adjoint-Melnikov machinery.

The double-well oscillator x'' = x - x^3 has the closed-form homoclinic
loop x_h(t) = sqrt(2) sech(t) to the saddle at the origin, which makes
every pipeline stage independently checkable: the adjoint profile, the
splitting coefficients, and their zeros can all be compared against a
brute-force measurement of the actual manifold gap of the time-periodic
perturbation eps * (0, cos(omega t)).

The brute-force route never consults the adjoint: it locates the
perturbed stroboscopic saddle, seeds the linear stable/unstable subspaces
at distance 1e-6, propagates a fan across one fundamental domain of the
map, and intersects the resulting manifold trace with the section
{y = 0, x > 0} through the loop apex (sqrt(2), 0).  The signed gap is the
x-offset between the unstable and stable traces there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibria import SteadyState
from .errors import NonFiniteError, SectionMissError, ValidationError
from .homoclinic import OrbitTrajectory
from .integrators import IntegrationConfig, SampledPath, rk4_integrate
from .melnikov import AdjointTrajectory, ForcingProfile, MelnikovResult, adjoint_solve, melnikov_periodic

__all__ = [
    "PlanarDoubleWell",
    "duffing_homoclinic",
    "analytic_orbit",
    "melnikov_planar",
    "brute_force_split",
    "brute_force_zero_crossings",
]

APEX = np.array([np.sqrt(2.0), 0.0])


class PlanarDoubleWell:
    """x' = y, y' = x - x^3; saddle at the origin with eigenvalues +-1."""

    dim = 2
    lin_diag = None
    subspace = "planar"

    def rhs(self, x, t: float = 0.0):
        return np.array([x[1], x[0] - x[0] ** 3])

    def jacobian(self, x):
        return np.array([[0.0, 1.0], [1.0 - 3.0 * x[0] ** 2, 0.0]])

    def integrate(self, x0, cfg: IntegrationConfig, t_start: float = 0.0):
        return rk4_integrate(self.rhs, x0, cfg, t_start=t_start)

    def adjoint_backward(self, path: SampledPath, psi_end, n_sub: int):
        """Backward RK4 of psi' = -J(t)^T psi with precomputed stage states.

        Only the (2,1) Jacobian entry 1 - 3 x^2 varies along the orbit, so
        the stage loop runs on scalars after one vectorized Hermite pass.
        """
        times = path.times
        dt_sample = float(times[1] - times[0])
        n_int = times.size - 1
        h = -dt_sample / n_sub
        # Hermite stage states on the half-substep grid s = 1 - j/(2 n_sub)
        s = 1.0 - np.arange(2 * n_sub + 1) / (2.0 * n_sub)
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2 * dt_sample
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0) * dt_sample
        y0 = path.states[:-1]
        y1 = path.states[1:]
        d0 = path.derivs[:-1]
        d1 = path.derivs[1:]
        xs = (
            h00[None, :, None] * y0[:, None, :]
            + h10[None, :, None] * d0[:, None, :]
            + h01[None, :, None] * y1[:, None, :]
            + h11[None, :, None] * d1[:, None, :]
        )
        cgrid = 1.0 - 3.0 * xs[:, :, 0] ** 2  # J[1,0] along the orbit
        out = np.empty((times.size, 2))
        p1, p2 = float(psi_end[0]), float(psi_end[1])
        out[-1] = (p1, p2)
        hh = h
        for i0 in range(n_int - 1, -1, -1):
            crow = cgrid[i0]
            for m in range(n_sub):
                c0 = crow[2 * m]
                c1 = crow[2 * m + 1]
                c2 = crow[2 * m + 2]
                # -J^T psi = (-c * psi2, -psi1)
                k1a = -c0 * p2
                k1b = -p1
                q1 = p1 + 0.5 * hh * k1a
                q2 = p2 + 0.5 * hh * k1b
                k2a = -c1 * q2
                k2b = -q1
                q1 = p1 + 0.5 * hh * k2a
                q2 = p2 + 0.5 * hh * k2b
                k3a = -c1 * q2
                k3b = -q1
                q1 = p1 + hh * k3a
                q2 = p2 + hh * k3b
                k4a = -c2 * q2
                k4b = -q1
                p1 += (hh / 6.0) * (k1a + 2.0 * (k2a + k3a) + k4a)
                p2 += (hh / 6.0) * (k1b + 2.0 * (k2b + k3b) + k4b)
            out[i0] = (p1, p2)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("planar adjoint integration blew up")
        return out


def duffing_homoclinic(t):
    """Analytic loop (sqrt(2) sech t, -sqrt(2) sech t tanh t); checks by substitution."""
    t = np.asarray(t, dtype=np.float64)
    sech = 1.0 / np.cosh(t)
    x = np.sqrt(2.0) * sech
    y = -np.sqrt(2.0) * sech * np.tanh(t)
    return np.stack([x, y], axis=-1)


def analytic_orbit(clip_fraction: float = 4e-2, spacing: float = 0.002) -> OrbitTrajectory:
    """Orbit container built from the closed-form loop, recentred at the apex.

    Samples run symmetrically to the time where the excursion decays to
    clip_fraction of the peak (see the pairing-conditioning note in the
    homoclinic module for why the default clip is not tighter).
    """
    if not (0 < clip_fraction < 1):
        raise ValidationError("clip_fraction", "must be in (0, 1)")
    system = PlanarDoubleWell()
    peak = np.linalg.norm(APEX)

    def excursion(t):
        return float(np.linalg.norm(duffing_homoclinic(t)))

    t_hi = 1.0
    while excursion(t_hi) > clip_fraction * peak:
        t_hi *= 1.5
    lo, hi = t_hi / 1.5, t_hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if excursion(mid) > clip_fraction * peak:
            lo = mid
        else:
            hi = mid
    t_max = spacing * int(np.floor(0.5 * (lo + hi) / spacing))
    times = np.arange(-t_max, t_max + 0.5 * spacing, spacing)
    states = duffing_homoclinic(times)
    derivs = np.array([system.rhs(s) for s in states])
    steady = SteadyState(np.zeros(2), 0.0, 0)
    rd = excursion(t_max) / peak
    return OrbitTrajectory(
        path=SampledPath(times, states, derivs),
        steady=steady,
        return_distance=float(rd),
        initial_return_distance=float(rd),
        t_center=0.0,
        time_offset_applied=True,
        converged=True,
        clip_fraction=clip_fraction,
        n_evaluations=0,
        delta=float(excursion(-t_max)),
        direction=np.array([1.0, 1.0]) / np.sqrt(2.0),
    )


def vertical_forcing() -> ForcingProfile:
    """Perturbation direction (0, 1): forcing eps * cos(omega t) on y'."""
    return ForcingProfile(np.array([0.0, 1.0]), "(0, cos)")


def melnikov_planar(
    omega: float,
    orbit: OrbitTrajectory | None = None,
    n_sub: int = 5,
) -> tuple[MelnikovResult, AdjointTrajectory, OrbitTrajectory]:
    """Adjoint-route splitting function for the (0, cos omega t) perturbation."""
    system = PlanarDoubleWell()
    if orbit is None:
        orbit = analytic_orbit()
    adjoint = adjoint_solve(system, orbit, n_sub=n_sub)
    result = melnikov_periodic(orbit, adjoint, vertical_forcing(), omega)
    return result, adjoint, orbit


# ---------------------------------------------------------------------------
# Brute-force manifold gap
# ---------------------------------------------------------------------------


def _rk4_forced_many(states, t0, duration, dt, epsilon, omega):
    """Vectorized RK4 of the forced system for a (m, 2) batch of states."""
    x = np.array(states, dtype=np.float64)
    n_steps = int(round(abs(duration) / dt))
    h = duration / n_steps
    a = x[:, 0].copy()
    b = x[:, 1].copy()
    t = t0
    h2 = 0.5 * h
    for _ in range(n_steps):
        f0 = epsilon * np.cos(omega * t)
        f1 = epsilon * np.cos(omega * (t + h2))
        f2 = epsilon * np.cos(omega * (t + h))
        k1a = b
        k1b = a - a * a * a + f0
        qa = a + h2 * k1a
        qb = b + h2 * k1b
        k2a = qb
        k2b = qa - qa * qa * qa + f1
        qa = a + h2 * k2a
        qb = b + h2 * k2b
        k3a = qb
        k3b = qa - qa * qa * qa + f1
        qa = a + h * k3a
        qb = b + h * k3b
        k4a = qb
        k4b = qa - qa * qa * qa + f2
        a = a + (h / 6.0) * (k1a + 2.0 * (k2a + k3a) + k4a)
        b = b + (h / 6.0) * (k1b + 2.0 * (k2b + k3b) + k4b)
        t += h
    out = np.stack([a, b], axis=1)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("forced planar integration blew up")
    return out


@dataclass(frozen=True)
class _Stroboscopic:
    epsilon: float
    omega: float
    t0: float
    dt: float

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def apply(self, states, k: int = 1, backward: bool = False):
        x = np.atleast_2d(states)
        sign = -1.0 if backward else 1.0
        t = self.t0
        for _ in range(k):
            x = _rk4_forced_many(x, t, sign * self.period, self.dt, self.epsilon, self.omega)
            t += sign * self.period
        return x

    def fixed_point(self) -> np.ndarray:
        """Newton on P(x) - x from the origin; the perturbed saddle."""
        x = np.zeros(2)
        h = 1e-7
        for _ in range(40):
            px = self.apply(x)[0]
            res = px - x
            if np.linalg.norm(res) < 1e-13:
                break
            jac = np.empty((2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                jac[:, j] = (self.apply(x + e)[0] - self.apply(x - e)[0]) / (2 * h)
            step = np.linalg.solve(jac - np.eye(2), -res)
            x = x + step
        return x

    def map_eigvecs(self, x_star):
        h = 1e-7
        jac = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            jac[:, j] = (self.apply(x_star + e)[0] - self.apply(x_star - e)[0]) / (2 * h)
        vals, vecs = np.linalg.eig(jac)
        iu = int(np.argmax(np.abs(vals)))
        istab = int(np.argmin(np.abs(vals)))
        eu = np.real(vecs[:, iu])
        es = np.real(vecs[:, istab])
        return eu / np.linalg.norm(eu), es / np.linalg.norm(es), np.abs(vals[iu])


def _trace_crossing(strob, x_star, evec, mult, backward, seed_delta, n_fan, k_max):
    """x-coordinate where a manifold trace crosses {y = 0, x > 0.5} near the apex."""
    deltas = seed_delta * mult ** np.linspace(0.0, 1.0, n_fan)
    lo_hi = (deltas[0], deltas[-1])
    for k in range(1, k_max + 1):
        pts = strob.apply(x_star[None, :] + deltas[:, None] * evec[None, :], k=k, backward=backward)
        near = (np.abs(pts[:, 0] - APEX[0]) < 0.9) & (pts[:, 0] > 0.5)
        ys = pts[:, 1]
        for i in range(n_fan - 1):
            if near[i] and near[i + 1] and ys[i] * ys[i + 1] <= 0 and ys[i] != ys[i + 1]:
                # zoom the seed interval twice, then interpolate linearly
                a, b = deltas[i], deltas[i + 1]
                for _ in range(3):
                    sub = np.linspace(a, b, 12)
                    spts = strob.apply(x_star[None, :] + sub[:, None] * evec[None, :], k=k, backward=backward)
                    sy = spts[:, 1]
                    found = False
                    for j in range(11):
                        if sy[j] * sy[j + 1] <= 0 and sy[j] != sy[j + 1]:
                            a, b = sub[j], sub[j + 1]
                            pa, pb = spts[j], spts[j + 1]
                            found = True
                            break
                    if not found:
                        break
                frac = pa[1] / (pa[1] - pb[1])
                return float(pa[0] + frac * (pb[0] - pa[0]))
    raise SectionMissError(
        f"manifold trace never crossed the apex section (delta in {lo_hi}, k <= {k_max})"
    )


def brute_force_split(
    epsilon: float,
    omega: float,
    t0: float,
    dt: float = 2e-3,
    seed_delta: float = 1e-6,
    n_fan: int = 24,
    k_max: int = 6,
) -> float:
    """Signed manifold gap of the forced double well at stroboscopic phase t0.

    Positive when the unstable trace crosses the apex section at larger x
    than the stable trace.  Independent oracle: no adjoint quantities
    enter.  epsilon = 0 returns the numerical coincidence gap (~1e-9).
    """
    if not (0.0 <= epsilon <= 1e-2):
        raise ValidationError("epsilon", "must be in [0, 1e-2]")
    if omega <= 0:
        raise ValidationError("omega", "must be positive")
    strob = _Stroboscopic(epsilon, omega, t0, dt)
    x_star = strob.fixed_point()
    eu, es, mult = strob.map_eigvecs(x_star)
    # orient both eigvecs toward the right half-plane the loop lives in
    if eu[0] + eu[1] < 0:
        eu = -eu
    if es[0] - es[1] < 0:
        es = -es
    xu = _trace_crossing(strob, x_star, eu, mult, False, seed_delta, n_fan, k_max)
    xs = _trace_crossing(strob, x_star, es, mult, True, seed_delta, n_fan, k_max)
    return float(xu - xs)


def brute_force_zero_crossings(
    epsilon: float,
    omega: float,
    n_coarse: int = 16,
    refine_iters: int = 12,
    dt: float = 2e-3,
) -> list[float]:
    """Phases in [0, 2 pi / omega) where the measured gap changes sign."""
    period = 2.0 * np.pi / omega
    grid = np.linspace(0.0, period, n_coarse, endpoint=False)
    gaps = [brute_force_split(epsilon, omega, float(t), dt=dt) for t in grid]
    crossings = []
    for i in range(n_coarse):
        a, b = grid[i], grid[(i + 1) % n_coarse] + (period if i == n_coarse - 1 else 0.0)
        ga, gb = gaps[i], gaps[(i + 1) % n_coarse]
        if ga == 0.0:
            crossings.append(float(a))
            continue
        if ga * gb < 0:
            lo, hi, glo = a, b, ga
            for _ in range(refine_iters):
                mid = 0.5 * (lo + hi)
                gm = brute_force_split(epsilon, omega, float(mid % period), dt=dt)
                if glo * gm <= 0:
                    hi = mid
                else:
                    lo, glo = mid, gm
            crossings.append(float((0.5 * (lo + hi)) % period))
    return sorted(crossings)
