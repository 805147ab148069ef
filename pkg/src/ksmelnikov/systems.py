"""Dynamical-system wrappers binding the Galerkin flow to coordinate charts.

A "system" bundles the right-hand side, its Jacobian, and an integrator on
a fixed real coordinate chart, which is what the equilibrium, shooting,
adjoint, and Melnikov layers consume.  Two charts exist for the KS flow:

- odd chart (default): N coordinates b_k = Im a_k, the antisymmetric
  subspace.  The flow preserves it and the translation zero-mode of
  nonzero equilibria is absent there, which keeps Newton Jacobians
  invertible.
- full chart: 2N interleaved coordinates (Re a_k, Im a_k).

Integration goes through the kernel backend (compiled or numpy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, spectral
from .errors import NonFiniteError, ValidationError
from .integrators import IntegrationConfig, SampledPath, etdrk4_weights
from .spectral import DomainConfig, ModalState

__all__ = ["HarmonicForcing", "KSSystem", "make_ks_system"]


@dataclass(frozen=True)
class HarmonicForcing:
    """Additive forcing eps * profile * cos(omega t) on working coordinates."""

    profile: np.ndarray
    epsilon: float
    omega: float


class KSSystem:
    """KS Galerkin flow on either the odd or the full coordinate chart."""

    def __init__(self, dom: DomainConfig, subspace: str = "odd"):
        if subspace not in ("odd", "full"):
            raise ValidationError("subspace", "must be 'odd' or 'full'")
        self.dom = dom
        self.subspace = subspace
        self.n = dom.n_modes
        self.dim = self.n if subspace == "odd" else 2 * self.n
        self._rates = spectral.growth_rates(dom)  # k = 0..N
        if subspace == "odd":
            self.lin_diag = self._rates[1:].copy()
        else:
            self.lin_diag = np.repeat(self._rates[1:], 2)
        # gather indices for the closed-form odd Jacobian
        k = np.arange(1, self.n + 1)
        self._idx_minus = 2 * self.n + (k[:, None] - k[None, :])
        self._idx_plus = 2 * self.n + (k[:, None] + k[None, :])
        self._kq_col = (dom.q * k)[:, None]

    # -- chart conversions ---------------------------------------------------

    def to_state(self, x: np.ndarray) -> ModalState:
        if self.subspace == "odd":
            return spectral.state_from_odd(x, self.dom)
        return spectral.state_from_real(x, self.dom)

    def from_state(self, state: ModalState) -> np.ndarray:
        if self.subspace == "odd":
            return spectral.odd_coordinates(state)
        return spectral.real_coordinates(state)

    def _to_complex(self, x: np.ndarray) -> np.ndarray:
        a = np.zeros(self.n + 1, dtype=np.complex128)
        if self.subspace == "odd":
            a[1:] = 1.0j * x
        else:
            a[1:] = x[0::2] + 1.0j * x[1::2]
        return a

    def _from_complex(self, a: np.ndarray) -> np.ndarray:
        if self.subspace == "odd":
            return a[1:].imag.copy()
        out = np.empty(2 * self.n, dtype=np.float64)
        out[0::2] = a[1:].real
        out[1::2] = a[1:].imag
        return out

    def project_modes(self, x: np.ndarray) -> tuple[float, float]:
        """Sine amplitudes of modes 1 and 2 at a working-coordinate point."""
        a = self._to_complex(x)
        return (-2.0 * float(a[1].imag), -2.0 * float(a[2].imag))

    # -- vector field and linearization ---------------------------------------

    def rhs(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        if self.subspace == "odd":
            return kernels.ks_rhs_odd(np.asarray(x, dtype=np.float64), self.lin_diag, self.dom.q)
        adot = kernels.ks_rhs_cplx(self._to_complex(x), self._rates, self.dom.q)
        return self._from_complex(adot)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Dense Jacobian of rhs at x on the working chart."""
        if self.subspace == "odd":
            return self._jacobian_odd(np.asarray(x, dtype=np.float64))
        return self._jacobian_full(np.asarray(x, dtype=np.float64))

    def _jacobian_odd(self, b: np.ndarray) -> np.ndarray:
        pad = np.zeros(4 * self.n + 1, dtype=np.float64)
        pad[self.n : 2 * self.n] = -b[::-1]
        pad[2 * self.n + 1 : 3 * self.n + 1] = b
        jac = self._kq_col * (pad[self._idx_minus] - pad[self._idx_plus])
        jac[np.diag_indices(self.n)] += self.lin_diag
        return jac

    def _jacobian_full(self, x: np.ndarray) -> np.ndarray:
        state = self.to_state(x)
        jac = np.empty((self.dim, self.dim), dtype=np.float64)
        basis = np.zeros(self.n + 1, dtype=np.complex128)
        for j in range(self.dim):
            mode = j // 2 + 1
            basis[mode] = 1.0 if j % 2 == 0 else 1.0j
            col = spectral.tangent_apply(state, basis, self.dom)
            jac[0::2, j] = col[1:].real
            jac[1::2, j] = col[1:].imag
            basis[mode] = 0.0
        return jac

    # -- integration -----------------------------------------------------------

    def integrate(
        self,
        x0: np.ndarray,
        cfg: IntegrationConfig,
        t_start: float = 0.0,
        forcing: HarmonicForcing | None = None,
        noise_increments: np.ndarray | None = None,
    ) -> SampledPath:
        """ETDRK4 march through the kernel backend.

        `noise_increments`, shape (n_steps, dim), are added to the state
        after each step (working coordinates).
        """
        n_steps = cfg.n_steps
        if self.subspace == "odd":
            wts = etdrk4_weights(self.lin_diag, cfg.dt, cfg.contour_points)
            ghat, eps, omega = None, 0.0, 0.0
            if forcing is not None:
                ghat, eps, omega = forcing.profile, forcing.epsilon, forcing.omega
            try:
                rec, states, derivs = kernels.etdrk4_run_odd(
                    np.asarray(x0, dtype=np.float64),
                    self.lin_diag,
                    self.dom.q,
                    cfg.dt,
                    n_steps,
                    cfg.sample_stride,
                    *wts,
                    ghat=ghat,
                    eps=eps,
                    omega=omega,
                    t_start=t_start,
                    noise=noise_increments,
                )
            except FloatingPointError as exc:
                raise NonFiniteError(str(exc)) from exc
            times = t_start + rec * cfg.dt
            return SampledPath(times, states, derivs)

        wts = etdrk4_weights(self._rates, cfg.dt, cfg.contour_points)
        ghat, eps, omega = None, 0.0, 0.0
        if forcing is not None:
            gc = np.zeros(self.n + 1, dtype=np.complex128)
            gc[1:] = forcing.profile[0::2] + 1.0j * forcing.profile[1::2]
            ghat, eps, omega = gc, forcing.epsilon, forcing.omega
        noise_c = None
        if noise_increments is not None:
            noise_c = np.zeros((n_steps, self.n + 1), dtype=np.complex128)
            noise_c[:, 1:] = noise_increments[:, 0::2] + 1.0j * noise_increments[:, 1::2]
        try:
            rec, states_c, derivs_c = kernels.etdrk4_run_cplx(
                self._to_complex(np.asarray(x0, dtype=np.float64)),
                self._rates,
                self.dom.q,
                cfg.dt,
                n_steps,
                cfg.sample_stride,
                *wts,
                ghat=ghat,
                eps=eps,
                omega=omega,
                t_start=t_start,
                noise=noise_c,
            )
        except FloatingPointError as exc:
            raise NonFiniteError(str(exc)) from exc
        times = t_start + rec * cfg.dt
        states = np.empty((times.size, self.dim))
        derivs = np.empty_like(states)
        states[:, 0::2] = states_c[:, 1:].real
        states[:, 1::2] = states_c[:, 1:].imag
        derivs[:, 0::2] = derivs_c[:, 1:].real
        derivs[:, 1::2] = derivs_c[:, 1:].imag
        return SampledPath(times, states, derivs)

    # -- adjoint fast path -------------------------------------------------------

    def adjoint_backward(self, path: SampledPath, psi_end: np.ndarray, n_sub: int) -> np.ndarray:
        """Backward integration of psi' = -J(t)^T psi along a uniform path.

        Odd chart only (the default for all production runs); returns psi
        at every path sample.
        """
        if self.subspace != "odd":
            raise ValidationError("subspace", "fast adjoint path requires the odd chart")
        spacing = np.diff(path.times)
        if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
            raise ValidationError("path", "adjoint integration needs uniform sample spacing")
        try:
            return kernels.adjoint_backward_odd(
                path.states,
                path.derivs,
                float(spacing[0]),
                self.lin_diag,
                self.dom.q,
                np.asarray(psi_end, dtype=np.float64),
                int(n_sub),
            )
        except FloatingPointError as exc:
            raise NonFiniteError(str(exc)) from exc


def make_ks_system(dom: DomainConfig, subspace: str = "odd") -> KSSystem:
    return KSSystem(dom, subspace)
