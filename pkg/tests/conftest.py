"""Shared fixtures.

The expensive shooting search (the fig1 preset orbit) runs once per
session through the pipeline's orbit cache; everything downstream reuses
it.  Mini configs with short horizons back the orchestration tests.
"""

import numpy as np
import pytest

from ksmelnikov.config import preset
from ksmelnikov.equilibria import eigen_analysis, newton_steady
from ksmelnikov.integrators import IntegrationConfig
from ksmelnikov.pipeline import Pipeline
from ksmelnikov.spectral import DomainConfig, sine_state
from ksmelnikov.systems import make_ks_system

MINI_CONFIG = """
[domain]
length = 22
n_modes = 32

[integration]
dt = 1e-3
horizon = 40
sample_stride = 20

[shooting]
duration = 40
max_evals = 8

[noise]
ensemble = 40
"""


@pytest.fixture(scope="session")
def dom():
    return DomainConfig(22.0, 32)


@pytest.fixture(scope="session")
def odd_system(dom):
    return make_ks_system(dom, "odd")


@pytest.fixture(scope="session")
def full_system(dom):
    return make_ks_system(dom, "full")


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture(scope="session")
def anchor(odd_system, dom):
    """2-cell saddle-focus equilibrium plus its spectrum (fig preset seeding)."""
    x0 = odd_system.from_state(sine_state(dom, 2, 0.5))
    relax = IntegrationConfig(dt=1e-3, horizon=50.0, sample_stride=1000)
    x0 = odd_system.integrate(x0, relax).states[-1]
    st = newton_steady(odd_system, x0, tol=1e-8, max_iter=80)
    spec = eigen_analysis(odd_system.jacobian(st.x))
    return st, spec


@pytest.fixture(scope="session")
def fig_pipeline(tmp_path_factory):
    """Pipeline on the fig1 preset with a session-lived cache directory."""
    out = tmp_path_factory.mktemp("figrun")
    return Pipeline(preset("fig1"), output_dir=str(out))


@pytest.fixture(scope="session")
def ks_orbit(fig_pipeline):
    return fig_pipeline.orbit()


@pytest.fixture(scope="session")
def ks_adjoint(fig_pipeline):
    return fig_pipeline.adjoint()


@pytest.fixture(scope="session")
def ks_sweep(fig_pipeline):
    return fig_pipeline.sweep()


@pytest.fixture(scope="session")
def oracle_orbit():
    from ksmelnikov.planar import analytic_orbit

    return analytic_orbit()


@pytest.fixture(scope="session")
def oracle_run(oracle_orbit):
    from ksmelnikov.planar import melnikov_planar

    result, adjoint, orbit = melnikov_planar(omega=1.0, orbit=oracle_orbit)
    return result, adjoint, orbit
