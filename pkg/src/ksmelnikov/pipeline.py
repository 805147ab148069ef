"""Stage orchestration and bit-deterministic CSV emission.

A Pipeline binds one RunConfig to an output directory and materializes
stages lazily: steady state -> spectrum -> orbit -> adjoint -> Melnikov /
ensemble.  The orbit is persisted to a versioned cache file keyed by the
orbit-relevant slice of the config; a matching file skips the shooting
search (logged).  CSV payloads carry the config hash, code version, and
seed in comment lines; no timestamps, so identical config + seed gives
byte-identical files.  All diagnostics go to the logger (stderr in the
CLI); data goes to files written atomically.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig, config_hash, orbit_cache_key, preset
from .equilibria import SpectralData, SteadyState, eigen_analysis, newton_steady
from .errors import CacheFormatError, ValidationError
from .homoclinic import OrbitTrajectory, find_homoclinic
from .integrators import IntegrationConfig
from .melnikov import (
    AdjointTrajectory,
    MelnikovResult,
    adjoint_solve,
    frequency_sweep,
    melnikov_periodic,
    sine_forcing,
)
from .orbit_cache import read_orbit_cache, write_orbit_cache
from .spectral import sine_state
from .stochastic import EnsembleResult, histogram_data, run_ensemble
from .systems import HarmonicForcing, KSSystem

log = logging.getLogger("ksmelnikov.pipeline")

VERBS = ("steady", "orbit", "adjoint", "melnikov", "sweep", "stochastic", "wander", "oracle", "figures")

# fig2 fan construction (manifold sketch from linearized eigenvectors)
FAN_DELTA = 1e-3
FAN_DURATION = 60.0
FAN_CAP = 1.2
# fig6 distance proxy decimation of the reference orbit
PROXY_DECIMATE = 10


@dataclass
class FigureBundle:
    """Written files plus the metadata stamped into each of them."""

    files: dict = field(default_factory=dict)
    config_digest: str = ""
    seed: int = 0
    not_converged: bool = False

    def add(self, name: str, path: str, **meta):
        self.files[name] = {"path": path, **meta}


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def write_csv(path: str, columns: list[str], rows, header_lines: list[str]) -> None:
    """Atomic CSV write: '#' metadata lines, column header, 17-digit data."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    os.replace(tmp, path)


class Pipeline:
    def __init__(self, cfg: RunConfig, output_dir: str | None = None, threads: int = 1):
        self.cfg = cfg
        self.out = output_dir or cfg.output_dir
        self.threads = max(1, threads)
        self.system = KSSystem(cfg.domain, cfg.subspace)
        self.digest = config_hash(cfg)
        self._steady: SteadyState | None = None
        self._spectral: SpectralData | None = None
        self._orbit: OrbitTrajectory | None = None
        self._adjoint: AdjointTrajectory | None = None
        os.makedirs(self.out, exist_ok=True)
        os.makedirs(self._cache_dir, exist_ok=True)

    # -- stages -----------------------------------------------------------

    @property
    def _cache_dir(self) -> str:
        return os.path.join(self.out, ".cache")

    def _meta_lines(self) -> list[str]:
        return [
            f"ksmelnikov {__version__}",
            f"config_hash={self.digest} seed={self.cfg.noise.seed}",
        ]

    def steady(self) -> tuple[SteadyState, SpectralData]:
        if self._steady is None:
            cfg = self.cfg
            guess_state = sine_state(cfg.domain, cfg.steady.seed_harmonic, cfg.steady.seed_amplitude)
            x0 = self.system.from_state(guess_state)
            if cfg.steady.seed_transient > 0:
                relax = IntegrationConfig(
                    dt=cfg.integration.dt,
                    horizon=cfg.steady.seed_transient,
                    sample_stride=max(1, cfg.integration.sample_stride),
                    contour_points=cfg.integration.contour_points,
                )
                x0 = self.system.integrate(x0, relax).states[-1]
            st = newton_steady(self.system, x0, tol=cfg.steady.tol, max_iter=cfg.steady.max_iter)
            spec = eigen_analysis(self.system.jacobian(st.x), residual_tol=cfg.forcing.adjoint_tol)
            log.info(
                "steady state: residual %.3e after %d iterations, %d unstable directions",
                st.residual_norm,
                st.newton_iterations,
                spec.n_unstable,
            )
            self._steady, self._spectral = st, spec
        return self._steady, self._spectral

    def orbit(self) -> OrbitTrajectory:
        if self._orbit is None:
            cache = os.path.join(self._cache_dir, f"orbit_{orbit_cache_key(self.cfg)}.ksorb")
            if os.path.exists(cache):
                try:
                    orbit, _ = read_orbit_cache(cache)
                    log.info("orbit cache hit: %s (skipping shooting search)", cache)
                    self._orbit = orbit
                    return orbit
                except CacheFormatError as exc:
                    log.warning("orbit cache unusable (%s); recomputing", exc)
            st, spec = self.steady()
            log.info("shooting search starting (max %d evaluations)", self.cfg.shooting.max_evals)
            orbit = find_homoclinic(self.system, st, spec, self.cfg.shooting)
            log.info(
                "orbit: return distance %.4e (initial %.4e, %.1fx), converged=%s",
                orbit.return_distance,
                orbit.initial_return_distance,
                orbit.initial_return_distance / max(orbit.return_distance, 1e-300),
                orbit.converged,
            )
            write_orbit_cache(orbit, cache, meta={"config": orbit_cache_key(self.cfg)})
            self._orbit = orbit
        return self._orbit

    def adjoint(self) -> AdjointTrajectory:
        if self._adjoint is None:
            orbit = self.orbit()
            n_sub = max(1, int(round((orbit.path.times[1] - orbit.path.times[0]) / self.cfg.shooting.dt)))
            adj = adjoint_solve(self.system, orbit, n_sub=n_sub)
            log.info(
                "adjoint: pairing residual %.3e, scale %.3e, bounded_proxy=%s",
                adj.normalization_residual,
                adj.scale_factor,
                adj.bounded_proxy,
            )
            self._adjoint = adj
        return self._adjoint

    def forcing_profile(self):
        return sine_forcing(self.system, self.cfg.forcing.harmonic)

    def melnikov_window(self) -> tuple[float, float]:
        w = self.cfg.forcing.window
        orbit = self.orbit()
        return (max(-w, orbit.path.t_start), min(w, orbit.path.t_end))

    # -- emitters -----------------------------------------------------------

    def _modes(self, states: np.ndarray) -> np.ndarray:
        out = np.empty((states.shape[0], 2))
        for i in range(states.shape[0]):
            out[i] = self.system.project_modes(states[i])
        return out

    def emit_fig1(self, bundle: FigureBundle):
        orbit = self.orbit()
        modes = self._modes(orbit.path.states)
        exc = orbit.excursion()
        rows = [
            (float(t), float(m[0]), float(m[1]), float(e))
            for t, m, e in zip(orbit.path.times, modes, exc)
        ]
        path = os.path.join(self.out, "fig1_orbit.csv")
        write_csv(
            path,
            ["t", "mode1", "mode2", "excursion_norm"],
            rows,
            self._meta_lines()
            + [
                "columns: t: time (dimensionless); mode1/mode2: sine amplitudes of modes 1,2;"
                " excursion_norm: Euclidean distance from the anchor equilibrium (working coordinates)",
                f"orbit: return_distance={orbit.return_distance!r} converged={orbit.converged}",
            ],
        )
        bundle.add("fig1", path, rows=len(rows))

    def emit_fig2(self, bundle: FigureBundle):
        st, spec = self.steady()
        rows = []
        # unstable branches: nonlinear forward flow from eigen-seeded points
        basis_vec = spec.eigenvectors[:, 0].real
        basis_vec = basis_vec / np.linalg.norm(basis_vec)
        icfg = IntegrationConfig(
            dt=self.cfg.integration.dt,
            horizon=FAN_DURATION,
            sample_stride=self.cfg.integration.sample_stride,
            contour_points=self.cfg.integration.contour_points,
        )
        for branch, sign in ((0, +1.0), (1, -1.0)):
            path = self.system.integrate(st.x + sign * FAN_DELTA * basis_vec, icfg)
            dist = np.linalg.norm(path.states - st.x, axis=1)
            keep = dist <= FAN_CAP
            modes = self._modes(path.states[keep])
            rows += [
                (branch, float(t), float(m[0]), float(m[1]))
                for t, m in zip(path.times[keep], modes)
            ]
        # stable branches: backward linearized flow (nonlinear backward
        # integration of the KS flow is ill-posed; the table prescribes
        # linearized eigenvectors)
        lam = spec.leading_stable()
        vs = spec.eigenvectors[:, np.argmin(np.abs(spec.eigenvalues - lam))]
        rate = abs(lam.real)
        freq = lam.imag
        tau_max = np.log(FAN_CAP / FAN_DELTA) / rate
        taus = np.arange(0.0, tau_max, self.cfg.integration.dt * self.cfg.integration.sample_stride)
        for branch, sign in ((2, +1.0), (3, -1.0)):
            disp = sign * FAN_DELTA * np.real(
                np.exp((rate - 1j * freq) * taus)[:, None] * vs[None, :]
            )
            pts = st.x[None, :] + disp
            modes = self._modes(pts)
            rows += [
                (branch, float(-tau), float(m[0]), float(m[1]))
                for tau, m in zip(taus, modes)
            ]
        path_out = os.path.join(self.out, "fig2_manifolds.csv")
        write_csv(
            path_out,
            ["branch_id", "t", "mode1", "mode2"],
            rows,
            self._meta_lines()
            + [
                "columns: branch_id: 0/1 unstable +-, 2/3 stable +- (backward linearized flow); "
                "t: time (negative on stable branches); mode1/mode2: sine amplitudes",
                "stable branches are linearized-eigenvector traces: the stiff fourth-derivative "
                "term makes nonlinear backward integration ill-posed",
            ],
        )
        bundle.add("fig2", path_out, rows=len(rows))

    def emit_fig3(self, bundle: FigureBundle):
        orbit = self.orbit()
        st, _ = self.steady()
        fc = self.cfg.forcing
        forcing = HarmonicForcing(
            profile=self.forcing_profile().vec, epsilon=fc.epsilon, omega=fc.omega
        )
        icfg = IntegrationConfig(
            dt=self.cfg.integration.dt,
            horizon=fc.duration,
            sample_stride=self.cfg.integration.sample_stride,
            contour_points=self.cfg.integration.contour_points,
        )
        x0 = st.x + orbit.delta * orbit.direction
        path = self.system.integrate(x0, icfg, forcing=forcing)
        modes = self._modes(path.states)
        rows = [(float(t), float(m[0]), float(m[1])) for t, m in zip(path.times, modes)]
        out = os.path.join(self.out, "fig3_splitting.csv")
        write_csv(
            out,
            ["t", "mode1", "mode2"],
            rows,
            self._meta_lines()
            + [
                f"columns: t: time; mode1/mode2: sine amplitudes; forcing: epsilon={fc.epsilon!r}"
                f" G=sin({fc.harmonic}qx) omega={fc.omega!r}",
            ],
        )
        bundle.add("fig3", out, rows=len(rows))

    def sweep(self) -> list[MelnikovResult]:
        orbit = self.orbit()
        adj = self.adjoint()
        grid = self.cfg.forcing.omega_grid()
        return frequency_sweep(
            orbit, adj, self.forcing_profile(), grid, window=self.melnikov_window(), threads=self.threads
        )

    def _write_sweep_csv(self, results, filename, bundle, key):
        rows = [
            (float(r.omega), float(r.coeff_cos), float(r.coeff_sin), float(r.amplitude))
            for r in results
        ]
        out = os.path.join(self.out, filename)
        write_csv(
            out,
            ["omega", "A", "B", "amplitude"],
            rows,
            self._meta_lines()
            + [
                "columns: omega: forcing frequency; A/B: cosine/sine splitting coefficients "
                "(Euclidean working-coordinate pairing; overall scale convention-bound); "
                "amplitude: sqrt(A^2+B^2)",
            ],
        )
        bundle.add(key, out, rows=len(rows))

    def emit_fig4(self, bundle: FigureBundle):
        self._write_sweep_csv(self.sweep(), "fig4_sweep.csv", bundle, "fig4")

    def melnikov_single(self) -> MelnikovResult:
        orbit = self.orbit()
        adj = self.adjoint()
        return melnikov_periodic(
            orbit,
            adj,
            self.forcing_profile(),
            self.cfg.forcing.omega,
            n_phase_samples=self.cfg.forcing.phase_samples,
            window=self.melnikov_window(),
        )

    def _write_phase_csv(self, result: MelnikovResult, bundle: FigureBundle):
        rows = [(float(t), float(m)) for t, m in zip(result.t0_samples, result.m_samples)]
        out = os.path.join(self.out, "melnikov_phase.csv")
        write_csv(
            out,
            ["t0", "M"],
            rows,
            self._meta_lines()
            + [
                f"columns: t0: forcing phase; M: splitting function at omega={result.omega!r}",
                f"A={result.coeff_cos!r} B={result.coeff_sin!r} zeros={[z[0] for z in result.zeros]!r}",
            ],
        )
        bundle.add("melnikov_phase", out, rows=len(rows))

    def ensemble(self) -> EnsembleResult:
        adj = self.adjoint()
        return run_ensemble(adj, self.cfg.noise, threads=self.threads)

    def _write_hist_csv(self, ens: EnsembleResult, filename: str, bundle: FigureBundle, key: str):
        edges, counts, pdf = histogram_data(ens)
        rows = [
            (float(edges[i]), float(edges[i + 1]), int(counts[i]), float(pdf[i]))
            for i in range(counts.size)
        ]
        out = os.path.join(self.out, filename)
        write_csv(
            out,
            ["bin_left", "bin_right", "count", "gaussian_pdf"],
            rows,
            self._meta_lines()
            + [
                "columns: bin edges of the sampled splitting values; count: realizations per bin; "
                "gaussian_pdf: predicted zero-mean density at the bin center",
                f"ensemble={ens.ensemble} sample_var={ens.sample_var!r} predicted_var={ens.predicted_var!r}",
            ],
        )
        bundle.add(key, out, rows=len(rows))

    def emit_fig5(self, bundle: FigureBundle):
        self._write_hist_csv(self.ensemble(), "fig5_hist.csv", bundle, "fig5")

    def wander_path(self):
        orbit = self.orbit()
        st, _ = self.steady()
        icfg = IntegrationConfig(
            dt=self.cfg.noise.dt,
            horizon=self.cfg.wander.duration,
            sample_stride=self.cfg.integration.sample_stride,
            contour_points=self.cfg.integration.contour_points,
        )
        n_steps = icfg.n_steps
        rng = np.random.default_rng(np.random.SeedSequence(self.cfg.noise.seed, spawn_key=(9, 0)))
        scale = np.sqrt(self.cfg.noise.intensity * icfg.dt)
        increments = scale * rng.standard_normal((n_steps, self.system.dim))
        x0 = st.x + orbit.delta * orbit.direction
        return self.system.integrate(x0, icfg, noise_increments=increments)

    def emit_fig6(self, bundle: FigureBundle):
        orbit = self.orbit()
        path = self.wander_path()
        ref = orbit.path.states[::PROXY_DECIMATE]
        modes = self._modes(path.states)
        proxy = np.empty(path.times.size)
        for i, x in enumerate(path.states):
            proxy[i] = np.min(np.linalg.norm(ref - x, axis=1))
        rows = [
            (float(t), float(m[0]), float(m[1]), float(p))
            for t, m, p in zip(path.times, modes, proxy)
        ]
        out = os.path.join(self.out, "fig6_wander.csv")
        write_csv(
            out,
            ["t", "mode1", "mode2", "manifold_distance_proxy"],
            rows,
            self._meta_lines()
            + [
                "columns: t: time; mode1/mode2: sine amplitudes of the noise-forced trajectory; "
                "manifold_distance_proxy: distance to the nearest cached orbit sample -- a stated "
                "proxy, not a manifold-splitting measurement",
                f"noise intensity={self.cfg.noise.intensity!r}",
            ],
        )
        bundle.add("fig6", out, rows=len(rows))

    def _write_scaling_csv(self, grid, results, bundle: FigureBundle):
        rows = [
            (float(d), float(r.rms), float(np.sqrt(r.predicted_var)))
            for d, r in zip(grid, results)
        ]
        out = os.path.join(self.out, "scaling.csv")
        write_csv(
            out,
            ["D", "rms", "predicted_rms"],
            rows,
            self._meta_lines()
            + ["columns: D: noise intensity; rms: sampled root-mean-square splitting; predicted_rms: sqrt(D * sum ||psi||^2 dt)"],
        )
        bundle.add("scaling", out, rows=len(rows))

    # -- verbs -----------------------------------------------------------

    def run(self, verb: str) -> FigureBundle:
        if verb not in VERBS:
            raise ValidationError("verb", f"unknown verb {verb!r} (have {VERBS})")
        bundle = FigureBundle(config_digest=self.digest, seed=self.cfg.noise.seed)
        if verb == "figures":
            self._run_figures(bundle)
        elif verb == "steady":
            st, spec = self.steady()
            self._write_json(
                bundle,
                "steady_state.json",
                {
                    "x": list(st.x),
                    "residual_norm": st.residual_norm,
                    "newton_iterations": st.newton_iterations,
                    "n_unstable": spec.n_unstable,
                    "leading_eigenvalues": [[v.real, v.imag] for v in spec.eigenvalues[:6]],
                },
            )
        elif verb == "orbit":
            orbit = self.orbit()
            bundle.not_converged = not orbit.converged
            self.emit_fig1(bundle)
            self._write_json(
                bundle,
                "orbit_summary.json",
                {
                    "return_distance": orbit.return_distance,
                    "initial_return_distance": orbit.initial_return_distance,
                    "converged": orbit.converged,
                    "n_evaluations": orbit.n_evaluations,
                    "t_span": [orbit.path.t_start, orbit.path.t_end],
                    "peak_excursion": orbit.peak_excursion,
                },
            )
        elif verb == "adjoint":
            adj = self.adjoint()
            bundle.not_converged = not self.orbit().converged
            self._write_json(
                bundle,
                "adjoint_summary.json",
                {
                    "normalization_residual": adj.normalization_residual,
                    "scale_factor": adj.scale_factor,
                    "bounded_proxy": adj.bounded_proxy,
                    "samples": int(adj.path.times.size),
                },
            )
        elif verb == "melnikov":
            res = self.melnikov_single()
            bundle.not_converged = not self.orbit().converged
            self._write_phase_csv(res, bundle)
        elif verb == "sweep":
            results = self.sweep()
            bundle.not_converged = not self.orbit().converged
            self._write_sweep_csv(results, "melnikov_sweep.csv", bundle, "melnikov_sweep")
        elif verb == "stochastic":
            ens = self.ensemble()
            bundle.not_converged = not self.orbit().converged
            self._write_hist_csv(ens, "stochastic_hist.csv", bundle, "stochastic_hist")
            from .stochastic import NoiseConfig, run_ensemble as _run

            grid = [0.005, 0.01, 0.02, 0.04]
            results = [
                _run(self.adjoint(), NoiseConfig(intensity=d, dt=self.cfg.noise.dt,
                                                 ensemble=self.cfg.noise.ensemble,
                                                 seed=self.cfg.noise.seed), stream=i)
                for i, d in enumerate(grid)
            ]
            self._write_scaling_csv(grid, results, bundle)
        elif verb == "wander":
            bundle.not_converged = not self.orbit().converged
            self.emit_fig6(bundle)
        elif verb == "oracle":
            self._run_oracle(bundle)
        self._write_manifest(bundle, verb)
        return bundle

    def _run_figures(self, bundle: FigureBundle):
        self.emit_fig1(bundle)
        self.emit_fig2(bundle)
        self.emit_fig3(bundle)
        self.emit_fig4(bundle)
        self.emit_fig5(bundle)
        self.emit_fig6(bundle)
        bundle.not_converged = not self.orbit().converged

    def _run_oracle(self, bundle: FigureBundle):
        from .planar import analytic_orbit, brute_force_split, melnikov_planar

        result, adjoint, orbit = melnikov_planar(omega=1.0)
        phases = [z[0] for z in result.zeros]
        gap_checks = []
        period = 2.0 * np.pi
        for frac in (0.25, 0.75):
            t0 = frac * period
            gap = brute_force_split(1e-3, 1.0, t0)
            m = result.coeff_cos * np.cos(t0) + result.coeff_sin * np.sin(t0)
            gap_checks.append({"t0": t0, "gap": gap, "adjoint_m": m, "sign_match": bool(gap * m > 0)})
        self._write_json(
            bundle,
            "oracle_summary.json",
            {
                "pairing_residual": adjoint.normalization_residual,
                "coeff_cos": result.coeff_cos,
                "coeff_sin": result.coeff_sin,
                "zeros": phases,
                "gap_checks": gap_checks,
                "orbit_span": [orbit.path.t_start, orbit.path.t_end],
            },
        )

    def _write_json(self, bundle: FigureBundle, name: str, payload: dict):
        out = os.path.join(self.out, name)
        tmp = out + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(
                {"version": __version__, "config_hash": self.digest, **payload},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        os.replace(tmp, out)
        bundle.add(name, out)

    def _write_manifest(self, bundle: FigureBundle, verb: str):
        out = os.path.join(self.out, "manifest.json")
        tmp = out + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "version": __version__,
                    "verb": verb,
                    "config_hash": bundle.config_digest,
                    "seed": bundle.seed,
                    "not_converged": bundle.not_converged,
                    "files": bundle.files,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        os.replace(tmp, out)


def run_all_figure_presets(output_dir: str, threads: int = 1) -> FigureBundle:
    """The `figures` verb across presets fig1..fig6 into one directory.

    All six share the Table-1 domain/integration parameters, so the orbit
    search runs once and later presets reuse the cache file.
    """
    bundle = FigureBundle()
    not_conv = False
    for name, emit in (
        ("fig1", Pipeline.emit_fig1),
        ("fig2", Pipeline.emit_fig2),
        ("fig3", Pipeline.emit_fig3),
        ("fig4", Pipeline.emit_fig4),
        ("fig5", Pipeline.emit_fig5),
        ("fig6", Pipeline.emit_fig6),
    ):
        pipe = Pipeline(preset(name), output_dir=output_dir, threads=threads)
        emit(pipe, bundle)
        bundle.config_digest = pipe.digest
        bundle.seed = pipe.cfg.noise.seed
        not_conv = not_conv or (not pipe.orbit().converged)
    bundle.not_converged = not_conv
    pipe._write_manifest(bundle, "figures")
    return bundle
