"""Batched Newton inversion of smooth maps with derivative propagation.

Solves f(x; theta) = y for x, batched over arbitrary leading dims, and exposes
the derivatives of the solution x = g(y; theta) through the inverse/implicit
function theorem:

    dg/dy     = (df/dx)^-1
    dg/dtheta = -(df/dx)^-1 (df/dtheta)

so a camera's iterative undistortion can report exact sensitivities without
differentiating through the iteration itself.  Non-convergence and singular
Jacobians are reported through per-element flags, never exceptions, so batched
warps degrade to invalid pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

__all__ = [
    "SmoothMap",
    "NewtonConfig",
    "InverseResult",
    "newton_solve",
    "inverse_sensitivity_y",
    "inverse_sensitivity_theta",
    "finite_difference_jacobian_x",
    "finite_difference_jacobian_theta",
]

#: Determinant magnitude below which a Jacobian element is treated as singular.
_SINGULAR_DET = 1e-300


def _fd_step(values):
    """Central-difference step sizes scaled to the values' magnitude."""
    eps = np.finfo(np.asarray(values).dtype).eps if np.asarray(
        values
    ).dtype.kind == "f" else np.finfo(np.float64).eps
    return eps ** (1.0 / 3.0) * np.maximum(1.0, np.abs(values))


def finite_difference_jacobian_x(evaluate, x, theta):
    """df/dx of ``evaluate(x, theta)`` by central differences.

    Args:
        evaluate: callable (..., n), (..., m) -> (..., n).
        x: (..., n) evaluation points.
        theta: (..., m) parameters.

    Returns:
        (..., n, n) Jacobian estimates.
    """
    x = np.asarray(x, dtype=np.float64)
    h = _fd_step(x)
    cols = []
    for i in range(x.shape[-1]):
        dx = np.zeros_like(x)
        dx[..., i] = h[..., i]
        cols.append(
            (evaluate(x + dx, theta) - evaluate(x - dx, theta))
            / (2.0 * h[..., i])[..., None]
        )
    return np.stack(cols, axis=-1)


def finite_difference_jacobian_theta(evaluate, x, theta):
    """df/dtheta of ``evaluate(x, theta)`` by central differences."""
    theta = np.asarray(theta, dtype=np.float64)
    h = _fd_step(theta)
    cols = []
    for i in range(theta.shape[-1]):
        dt = np.zeros_like(theta)
        dt[..., i] = h[..., i]
        cols.append(
            (evaluate(x, theta + dt) - evaluate(x, theta - dt))
            / (2.0 * h[..., i])[..., None]
        )
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class SmoothMap:
    """A batched smooth map y = f(x; theta) with Jacobian access.

    ``evaluate`` maps ((..., n), (..., m)) -> (..., n).  The Jacobian callables
    may be omitted, in which case central finite differences of ``evaluate``
    are used; analytic forms are preferred where available.
    """

    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian_x: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    jacobian_theta: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def jac_x(self, x, theta):
        """(..., n, n) df/dx, analytic when supplied else finite-difference."""
        if self.jacobian_x is not None:
            return self.jacobian_x(x, theta)
        return finite_difference_jacobian_x(self.evaluate, x, theta)

    def jac_theta(self, x, theta):
        """(..., n, m) df/dtheta, analytic when supplied else finite-difference."""
        if self.jacobian_theta is not None:
            return self.jacobian_theta(x, theta)
        return finite_difference_jacobian_theta(self.evaluate, x, theta)


@dataclass(frozen=True)
class NewtonConfig:
    """Newton iteration controls.

    ``tolerance=None`` resolves to 1e-9 for 64-bit targets and 1e-6 for 32-bit
    ones at solve time.
    """

    max_iterations: int = 20
    tolerance: Optional[float] = None
    damping: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance is not None and not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")

    def resolved_tolerance(self, dtype):
        if self.tolerance is not None:
            return self.tolerance
        return 1e-6 if np.dtype(dtype) == np.float32 else 1e-9


class InverseResult(NamedTuple):
    """Batched Newton solution.

    Attributes:
        x: (..., n) solutions (last iterate for non-converged elements).
        converged: (...) bool flags; True implies residual <= tolerance.
        residual: (...) final ||f(x; theta) - y||.
        iterations: number of Newton sweeps performed.
    """

    x: np.ndarray
    converged: np.ndarray
    residual: np.ndarray
    iterations: int


def newton_solve(f, y, theta, x0, cfg=NewtonConfig()):
    """Solve f(x; theta) = y by damped Newton iteration, batched.

    Args:
        f: SmoothMap with square input/output dim n.
        y: (..., n) targets.
        theta: (..., m) parameters, batch-compatible with y.
        x0: (..., n) initial guesses.
        cfg: NewtonConfig; defaults to 20 iterations, dtype-resolved tolerance,
            full steps.

    Returns:
        InverseResult.  Elements whose Jacobian turns singular are frozen and
        reported converged=False; no exception is raised for them.
    """
    x = np.array(x0, copy=True)
    if x.dtype.kind != "f":
        x = x.astype(np.float64)
    y = np.asarray(y, dtype=x.dtype)
    tol = cfg.resolved_tolerance(x.dtype)
    n = x.shape[-1]
    eye = np.eye(n, dtype=x.dtype)

    residual_vec = f.evaluate(x, theta) - y
    residual = np.linalg.norm(residual_vec, axis=-1)
    dead = ~np.isfinite(residual)
    converged = (residual <= tol) & ~dead
    iterations = 0

    for _ in range(cfg.max_iterations):
        active = ~(converged | dead)
        if not active.any():
            break
        jac = f.jac_x(x, theta)
        det = np.linalg.det(jac)
        bad = ~np.isfinite(det) | (np.abs(det) < _SINGULAR_DET)
        dead |= active & bad
        active &= ~bad
        jac_safe = np.where(bad[..., None, None], eye, jac)
        step = np.linalg.solve(jac_safe, residual_vec[..., None])[..., 0]
        x = np.where(active[..., None], x - cfg.damping * step, x)
        iterations += 1

        residual_vec = f.evaluate(x, theta) - y
        residual = np.linalg.norm(residual_vec, axis=-1)
        bad_eval = ~np.isfinite(residual)
        dead |= bad_eval
        converged = (residual <= tol) & ~dead

    return InverseResult(x, converged, residual, iterations)


def inverse_sensitivity_y(f, x, theta):
    """dg/dy of the inverse map at a solution x of f(x; theta) = y.

    Equals (df/dx)^-1 evaluated at (x, theta).

    Raises:
        numpy.linalg.LinAlgError: if the Jacobian is singular.
    """
    return np.linalg.inv(f.jac_x(x, theta))


def inverse_sensitivity_theta(f, x, theta):
    """dg/dtheta of the inverse map at a solution x of f(x; theta) = y.

    Equals -(df/dx)^-1 (df/dtheta) evaluated at (x, theta).

    Raises:
        numpy.linalg.LinAlgError: if the Jacobian is singular.
    """
    jac_x = f.jac_x(x, theta)
    jac_theta = f.jac_theta(x, theta)
    return -np.linalg.solve(jac_x, jac_theta)
