"""Run-configuration parsing: flat INI sections, table-derived defaults.

Sections and keys are closed sets; unknown ones are rejected so that a
typo cannot silently fall back to a default.  domain.length and
domain.n_modes are required (they define the run identity), everything
else defaults to the standard table parameters and the fallback is
logged.  KSM_SEED in the environment overrides the noise seed.
"""

from __future__ import annotations

import configparser
import hashlib
import logging
import os
from dataclasses import dataclass, field, fields as dc_fields

from .errors import ParseError, ValidationError
from .homoclinic import ShootingConfig
from .integrators import IntegrationConfig
from .spectral import DomainConfig
from .stochastic import NoiseConfig

log = logging.getLogger("ksmelnikov.config")

_REQUIRED = object()

__all__ = ["RunConfig", "SteadyConfig", "ForcingConfig", "parse_config", "preset", "PRESETS", "config_hash"]

DEFAULT_SEED = 1889604818


@dataclass(frozen=True)
class SteadyConfig:
    tol: float = 1e-8
    max_iter: int = 80
    seed_harmonic: int = 2
    seed_amplitude: float = 0.5
    seed_transient: float = 50.0

    def __post_init__(self):
        if not (self.tol > 0):
            raise ValidationError("shooting.steady_tol", "must be positive")
        if self.max_iter < 1:
            raise ValidationError("shooting.steady_max_iter", "must be >= 1")
        if self.seed_harmonic < 1:
            raise ValidationError("shooting.seed_harmonic", "must be >= 1")
        if not (self.seed_transient >= 0):
            raise ValidationError("shooting.seed_transient", "must be >= 0")


@dataclass(frozen=True)
class ForcingConfig:
    profile: str = "sin"
    harmonic: int = 1
    epsilon: float = 0.01
    omega: float = 0.5
    duration: float = 300.0
    omega_min: float = 0.0
    omega_max: float = 2.0
    omega_step: float = 0.02
    window: float = 150.0
    phase_samples: int = 128
    adjoint_tol: float = 1e-8

    def __post_init__(self):
        if self.profile != "sin":
            raise ValidationError("forcing.profile", "only 'sin' profiles are supported")
        if self.epsilon < 0:
            raise ValidationError("forcing.epsilon", "must be >= 0")
        if self.omega < 0:
            raise ValidationError("forcing.omega", "must be >= 0")
        if not (self.omega_step > 0):
            raise ValidationError("forcing.omega_step", "must be positive")
        if self.omega_max < self.omega_min:
            raise ValidationError("forcing.omega_max", "must be >= omega_min")
        if self.phase_samples < 4:
            raise ValidationError("forcing.phase_samples", "must be >= 4")

    def omega_grid(self):
        import numpy as np

        n = int(round((self.omega_max - self.omega_min) / self.omega_step)) + 1
        return self.omega_min + self.omega_step * np.arange(n)


@dataclass(frozen=True)
class WanderConfig:
    duration: float = 100.0

    def __post_init__(self):
        if not (self.duration > 0):
            raise ValidationError("noise.wander_duration", "must be positive")


@dataclass(frozen=True)
class RunConfig:
    domain: DomainConfig
    subspace: str
    integration: IntegrationConfig
    shooting: ShootingConfig
    steady: SteadyConfig
    forcing: ForcingConfig
    noise: NoiseConfig
    wander: WanderConfig
    output_dir: str = "out"

    def __post_init__(self):
        if self.subspace not in ("odd", "full"):
            raise ValidationError("domain.subspace", "must be 'odd' or 'full'")


# section -> key -> (attribute path, converter)
def _to_int(s):
    return int(s)


def _to_float(s):
    return float(s)


def _to_str(s):
    return str(s).strip()


_SCHEMA = {
    "domain": {
        "length": _to_float,
        "n_modes": _to_int,
        "subspace": _to_str,
    },
    "integration": {
        "dt": _to_float,
        "horizon": _to_float,
        "sample_stride": _to_int,
        "contour_points": _to_int,
    },
    "shooting": {
        "duration": _to_float,
        "dt": _to_float,
        "sample_stride": _to_int,
        "delta_min": _to_float,
        "delta_max": _to_float,
        "return_tol": _to_float,
        "clip_fraction": _to_float,
        "max_evals": _to_int,
        "steady_tol": _to_float,
        "steady_max_iter": _to_int,
        "seed_harmonic": _to_int,
        "seed_amplitude": _to_float,
        "seed_transient": _to_float,
    },
    "forcing": {
        "profile": _to_str,
        "harmonic": _to_int,
        "epsilon": _to_float,
        "omega": _to_float,
        "duration": _to_float,
        "omega_min": _to_float,
        "omega_max": _to_float,
        "omega_step": _to_float,
        "window": _to_float,
        "phase_samples": _to_int,
        "adjoint_tol": _to_float,
    },
    "noise": {
        "intensity": _to_float,
        "dt": _to_float,
        "ensemble": _to_int,
        "seed": _to_int,
        "wander_duration": _to_float,
    },
    "output": {
        "directory": _to_str,
    },
}


def parse_config(text: str) -> RunConfig:
    """Parse INI text into a validated RunConfig; unknown keys rejected."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError(exc.lineno, "content before any [section] header") from exc
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else 0
        raise ParseError(lineno, str(exc).splitlines()[0]) from exc
    except configparser.Error as exc:
        raise ParseError(0, str(exc)) from exc

    vals: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ValidationError(section, "unknown section")
        vals[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ValidationError(f"{section}.{key}", "unknown key")
            try:
                vals[section][key] = _SCHEMA[section][key](raw)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{section}.{key}", f"cannot parse {raw!r}") from exc

    def get(section, key, default=_REQUIRED):
        if key in vals.get(section, {}):
            return vals[section][key]
        if default is _REQUIRED:
            raise ValidationError(f"{section}.{key}", "required key is missing")
        log.debug("config default: %s.%s = %r", section, key, default)
        return default

    domain = DomainConfig(get("domain", "length"), get("domain", "n_modes"))
    subspace = get("domain", "subspace", "odd")
    integration = IntegrationConfig(
        dt=get("integration", "dt", 1e-3),
        horizon=get("integration", "horizon", 200.0),
        sample_stride=get("integration", "sample_stride", 10),
        contour_points=get("integration", "contour_points", 32),
    )
    shooting = ShootingConfig(
        duration=get("shooting", "duration", 200.0),
        dt=get("shooting", "dt", integration.dt),
        sample_stride=get("shooting", "sample_stride", integration.sample_stride),
        delta_range=(get("shooting", "delta_min", 1e-6), get("shooting", "delta_max", 5e-2)),
        return_tol=get("shooting", "return_tol", 1e-3),
        clip_fraction=get("shooting", "clip_fraction", 1e-3),
        max_evals=get("shooting", "max_evals", 120),
        contour_points=integration.contour_points,
    )
    steady = SteadyConfig(
        tol=get("shooting", "steady_tol", 1e-8),
        max_iter=get("shooting", "steady_max_iter", 80),
        seed_harmonic=get("shooting", "seed_harmonic", 2),
        seed_amplitude=get("shooting", "seed_amplitude", 0.5),
        seed_transient=get("shooting", "seed_transient", 50.0),
    )
    forcing = ForcingConfig(
        profile=get("forcing", "profile", "sin"),
        harmonic=get("forcing", "harmonic", 1),
        epsilon=get("forcing", "epsilon", 0.01),
        omega=get("forcing", "omega", 0.5),
        duration=get("forcing", "duration", 300.0),
        omega_min=get("forcing", "omega_min", 0.0),
        omega_max=get("forcing", "omega_max", 2.0),
        omega_step=get("forcing", "omega_step", 0.02),
        window=get("forcing", "window", 150.0),
        phase_samples=get("forcing", "phase_samples", 128),
        adjoint_tol=get("forcing", "adjoint_tol", 1e-8),
    )
    seed = get("noise", "seed", DEFAULT_SEED)
    env_seed = os.environ.get("KSM_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as exc:
            raise ValidationError("KSM_SEED", f"cannot parse {env_seed!r}") from exc
        log.info("seed overridden by KSM_SEED = %d", seed)
    noise = NoiseConfig(
        intensity=get("noise", "intensity", 0.02),
        dt=get("noise", "dt", integration.dt),
        ensemble=get("noise", "ensemble", 500),
        seed=seed,
    )
    wander = WanderConfig(duration=get("noise", "wander_duration", 100.0))
    output_dir = get("output", "directory", "out")
    if forcing.harmonic > domain.n_modes:
        raise ValidationError("forcing.harmonic", "exceeds the mode cutoff")
    return RunConfig(
        domain=domain,
        subspace=subspace,
        integration=integration,
        shooting=shooting,
        steady=steady,
        forcing=forcing,
        noise=noise,
        wander=wander,
        output_dir=output_dir,
    )


_BASE = """
[domain]
length = 22
n_modes = 32
subspace = odd

[integration]
dt = 1e-3
horizon = 200
sample_stride = 10

[shooting]
duration = 200
steady_tol = 1e-8
seed_harmonic = 2
seed_amplitude = 0.5
seed_transient = 50
delta_min = 1e-6
delta_max = 5e-2
return_tol = 1e-3
clip_fraction = 1e-3
max_evals = 120
"""

PRESETS = {
    "fig1": _BASE,
    "fig2": _BASE,
    "fig3": _BASE
    + """
[forcing]
epsilon = 0.01
harmonic = 1
omega = 0.5
duration = 300
""",
    "fig4": _BASE
    + """
[forcing]
omega_min = 0
omega_max = 2
omega_step = 0.02
window = 150
adjoint_tol = 1e-8
""",
    "fig5": _BASE
    + """
[noise]
intensity = 0.02
dt = 1e-3
ensemble = 500
""",
    "fig6": _BASE
    + """
[noise]
intensity = 0.02
wander_duration = 100
""",
    "oracle": _BASE,
}


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ValidationError("preset", f"unknown preset {name!r} (have {sorted(PRESETS)})")
    return parse_config(PRESETS[name])


def _canonical_lines(cfg: RunConfig) -> list[str]:
    lines = []

    def emit(prefix, obj):
        for f in dc_fields(obj):
            v = getattr(obj, f.name)
            lines.append(f"{prefix}.{f.name}={v!r}")

    emit("domain", cfg.domain)
    lines.append(f"domain.subspace={cfg.subspace!r}")
    emit("integration", cfg.integration)
    emit("shooting", cfg.shooting)
    emit("steady", cfg.steady)
    emit("forcing", cfg.forcing)
    emit("noise", cfg.noise)
    emit("wander", cfg.wander)
    return sorted(lines)


def config_hash(cfg: RunConfig) -> str:
    """12-hex digest of the canonical config; output path excluded."""
    blob = "\n".join(_canonical_lines(cfg)).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def orbit_cache_key(cfg: RunConfig) -> str:
    """Digest over exactly the inputs that determine the orbit."""
    keep = [
        ln
        for ln in _canonical_lines(cfg)
        if ln.startswith(("domain.", "integration.", "shooting.", "steady."))
    ]
    return hashlib.sha256("\n".join(keep).encode()).hexdigest()[:12]
