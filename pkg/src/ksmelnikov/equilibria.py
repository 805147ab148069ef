"""Steady states of the Galerkin flow and their linear stability."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    NoConvergenceError,
    SingularJacobianError,
    ValidationError,
)

__all__ = ["SteadyState", "SpectralData", "newton_steady", "eigen_analysis", "unstable_basis"]

UNSTABLE_THRESHOLD = 1e-10  # Re(lambda) above this counts as genuinely unstable


@dataclass(frozen=True)
class SteadyState:
    """Converged equilibrium on a working chart."""

    x: np.ndarray = field(repr=False)
    residual_norm: float
    newton_iterations: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))


@dataclass(frozen=True)
class SpectralData:
    """Dense eigendecomposition sorted by descending real part."""

    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)  # columns, complex, working chart
    n_unstable: int

    @property
    def leading(self) -> complex:
        return complex(self.eigenvalues[0])

    def leading_stable(self) -> complex:
        """Stable eigenvalue closest to the imaginary axis."""
        stable = self.eigenvalues[self.eigenvalues.real < -UNSTABLE_THRESHOLD]
        if stable.size == 0:
            raise ValidationError("eigenvalues", "no stable eigenvalue present")
        return complex(stable[np.argmax(stable.real)])


def newton_steady(system, guess, tol: float = 1e-8, max_iter: int = 50) -> SteadyState:
    """Damped Newton iteration on system.rhs with residual-norm backtracking.

    Accepts a step only when it reduces ||rhs||_2, halving up to 30 times.
    Raises NoConvergenceError when the budget runs out and
    SingularJacobianError when the linear solve breaks down (e.g. a full-
    chart guess sitting on the translation symmetry orbit).
    """
    if not tol > 0:
        raise ValidationError("tol", "must be positive")
    x = np.array(guess, dtype=np.float64)
    res = system.rhs(x)
    rnorm = float(np.linalg.norm(res))
    history = [rnorm]
    for it in range(1, max_iter + 1):
        if rnorm <= tol:
            st = SteadyState(x, rnorm, it - 1)
            object.__setattr__(st, "residual_history", tuple(history))
            return st
        jac = system.jacobian(x)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(
                "Newton Jacobian is singular; on the full chart a nonzero "
                "equilibrium carries a translation zero-mode (use the odd chart)"
            ) from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError("Newton step is not finite")
        eta = 1.0
        for _ in range(30):
            x_new = x + eta * step
            res_new = system.rhs(x_new)
            rnorm_new = float(np.linalg.norm(res_new))
            if rnorm_new < rnorm:
                break
            eta *= 0.5
        else:
            raise NoConvergenceError(
                "backtracking failed to reduce the residual",
                iterations=it,
                residual=rnorm,
            )
        x, res, rnorm = x_new, res_new, rnorm_new
        history.append(rnorm)
    if rnorm <= tol:
        st = SteadyState(x, rnorm, max_iter)
        object.__setattr__(st, "residual_history", tuple(history))
        return st
    raise NoConvergenceError(
        f"no convergence after {max_iter} iterations (residual {rnorm:.3e})",
        iterations=max_iter,
        residual=rnorm,
    )


def eigen_analysis(jac: np.ndarray, residual_tol: float = 1e-8) -> SpectralData:
    """Full dense eigendecomposition, sorted by descending real part."""
    jac = np.asarray(jac, dtype=np.float64)
    if jac.ndim != 2 or jac.shape[0] != jac.shape[1]:
        raise ValidationError("jac", "must be a square matrix")
    vals, vecs = scipy.linalg.eig(jac)
    order = np.argsort(-vals.real, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    scale = max(1.0, float(np.max(np.abs(vals))))
    for i in range(vals.size):
        res = np.linalg.norm(jac @ vecs[:, i] - vals[i] * vecs[:, i])
        if res > residual_tol * scale * np.linalg.norm(vecs[:, i]):
            raise ValidationError("eigenpair", f"residual {res:.3e} exceeds tolerance")
    n_unstable = int(np.count_nonzero(vals.real > UNSTABLE_THRESHOLD))
    return SpectralData(vals, vecs, n_unstable)


def unstable_basis(spec: SpectralData, max_dim: int | None = None) -> np.ndarray:
    """Real orthonormal basis (columns) of the leading unstable directions.

    Complex pairs contribute their real and imaginary parts once (the
    conjugate partner adds nothing new).
    """
    cols = []
    i = 0
    vals = spec.eigenvalues
    vecs = spec.eigenvectors
    while i < vals.size and vals[i].real > UNSTABLE_THRESHOLD:
        v = vecs[:, i]
        if abs(vals[i].imag) < 1e-12:
            cols.append(v.real)
            i += 1
        else:
            cols.append(v.real)
            cols.append(v.imag)
            i += 2  # skip the conjugate partner
    if not cols:
        return np.zeros((vecs.shape[0], 0))
    basis = np.column_stack(cols)
    qmat, _ = np.linalg.qr(basis)
    if max_dim is not None:
        qmat = qmat[:, :max_dim]
    return qmat
