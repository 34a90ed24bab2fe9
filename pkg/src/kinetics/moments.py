"""
Gaussian laws and their exact moment flows for quadratic models.

For quadratic V and W the particle system is a linear SDE
dZ = -A Z dt + sigma (0, I)^T dB, so Gaussian laws stay Gaussian and the
mean and covariance solve

    mean' = -A mean
    cov'  = -A cov - cov A^T + D,    D = diag(0, sigma^2 I)

Layouts:

- particle system: (x_1, ..., x_N, y_1, ..., y_N), each block of size d
- nonlinear flow:  (x, y) of size 2d
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import block_diag

from .exceptions import ModelValidationError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
EIGENVALUE_FLOOR = -1e-10
DEFAULT_FLOW_DT = 0.01


@dataclass(frozen=True)
class GaussianLaw:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        cov = np.atleast_2d(np.array(self.cov, dtype=float))
        k = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (k, k):
            raise ModelValidationError(f"Mean {mean.shape} and covariance {cov.shape} do not match.")
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise ModelValidationError('Gaussian law has non-finite entries.')
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > SYMMETRY_TOLERANCE * scale:
            raise ModelValidationError('Covariance is not symmetric.')
        cov = 0.5 * (cov + cov.T)
        eigenvalues, vectors = np.linalg.eigh(cov)
        if eigenvalues.min() < EIGENVALUE_FLOOR * scale:
            raise ModelValidationError(
                f"Covariance is not positive semidefinite (eigenvalue {eigenvalues.min():.3e})."
            )
        if eigenvalues.min() < 0:
            cov = (vectors * np.clip(eigenvalues, 0.0, None)) @ vectors.T
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'cov', cov)

    @property
    def dim(self):
        return self.mean.shape[0]

    def tensor_power(self, n):
        """Law of n independent copies, blocks laid out copy by copy."""
        return GaussianLaw(np.tile(self.mean, n), block_diag(*([self.cov] * n)))

    def marginal(self, indices):
        indices = np.asarray(indices)
        return GaussianLaw(self.mean[indices], self.cov[np.ix_(indices, indices)])

    def factor(self):
        """A matrix L with L L^T = cov, valid for singular covariances too."""
        diagonal = np.diagonal(self.cov)
        if np.array_equal(self.cov, np.diag(diagonal)):
            return np.diag(np.sqrt(np.clip(diagonal, 0.0, None)))
        eigenvalues, vectors = np.linalg.eigh(self.cov)
        return vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))

    def sample(self, rng, n):
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self.factor().T


def diagonal_phase_law(d, mean_x, mean_y, var_x, var_y, copies=1):
    """
    Product law with scalar moments per coordinate.

    With copies > 1 the result uses the particle-system layout: all positions
    first, then all velocities.
    """
    size = d * copies
    mean = np.concatenate([np.full(size, float(mean_x)), np.full(size, float(mean_y))])
    cov = np.diag(np.concatenate([np.full(size, float(var_x)), np.full(size, float(var_y))]))
    return GaussianLaw(mean, cov)


def particle_to_phase_order(n, d):
    """Permutation taking particle-system layout to per-particle (x_i, y_i) blocks."""
    order = []
    for i in range(n):
        order.extend(range(i * d, (i + 1) * d))
        order.extend(range(n * d + i * d, n * d + (i + 1) * d))
    return np.array(order)


def averaging_projector(n):
    return np.full((n, n), 1.0 / n)


def oscillator_drift(coefficient, gamma, d):
    """[[0, -I], [coefficient I, gamma I]] of size 2d."""
    identity = np.eye(d)
    return np.block([
        [np.zeros((d, d)), -identity],
        [coefficient * identity, gamma * identity],
    ])


def particle_drift(a, b, gamma, n, d):
    """
    Drift matrix A of the quadratic N-particle system.

    The position block is a I + b (I - pi) on particle indices, tensored with
    I_d, where pi is the averaging projector.
    """
    size = n * d
    stiffness = np.kron(a * np.eye(n) + b * (np.eye(n) - averaging_projector(n)), np.eye(d))
    return np.block([
        [np.zeros((size, size)), -np.eye(size)],
        [stiffness, gamma * np.eye(size)],
    ])


def noise_matrix(sigma, size):
    """D = diag(0, sigma^2 I) for ``size`` position coordinates."""
    return block_diag(np.zeros((size, size)), sigma ** 2 * np.eye(size))


class FlowKind(str, Enum):
    PARTICLE_SYSTEM = 'particle_system'
    NONLINEAR = 'nonlinear'


@dataclass(frozen=True)
class ParticleSystem:
    n: int
    kind = FlowKind.PARTICLE_SYSTEM


@dataclass(frozen=True)
class NonlinearFlow:
    kind = FlowKind.NONLINEAR


def _rk4(rhs, value, t_target, dt):
    steps = max(1, math.ceil(t_target / dt - 1e-12))
    h = t_target / steps
    for _ in range(steps):
        k1 = rhs(value)
        k2 = rhs(value + 0.5 * h * k1)
        k3 = rhs(value + 0.5 * h * k2)
        k4 = rhs(value + h * k3)
        value = value + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return value


def propagate_gaussian(kind, model, law, t_target, dt=DEFAULT_FLOW_DT):
    """
    Push a Gaussian law forward by ``t_target`` under a quadratic model.

    ``kind`` is ParticleSystem(n) or NonlinearFlow(). Integration is the
    classical fourth-order Runge-Kutta scheme with the largest step not
    exceeding ``dt`` that divides ``t_target``.
    """
    a, b = model.quadratic_coefficients()
    d, gamma, sigma = model.d, model.gamma, model.sigma
    if t_target < 0:
        raise ModelValidationError('Cannot propagate backwards in time.')
    if dt <= 0:
        raise ModelValidationError('Flow step must be > 0.')

    if isinstance(kind, ParticleSystem):
        size = kind.n * d
        mean_drift = cov_drift = particle_drift(a, b, gamma, kind.n, d)
    elif isinstance(kind, NonlinearFlow):
        size = d
        mean_drift = oscillator_drift(a, gamma, d)
        cov_drift = oscillator_drift(a + b, gamma, d)
    else:
        raise ModelValidationError(f"Unknown flow kind: {kind!r}")

    if law.dim != 2 * size:
        raise ModelValidationError(
            f"Law dimension {law.dim} does not match the flow dimension {2 * size}."
        )
    if t_target == 0:
        return law

    diffusion = noise_matrix(sigma, size)
    mean = _rk4(lambda m: -mean_drift @ m, law.mean, t_target, dt)
    cov = _rk4(lambda c: -cov_drift @ c - c @ cov_drift.T + diffusion, law.cov, t_target, dt)
    logger.debug("Propagated %s law of dimension %d to t=%.6g", kind.kind.value, law.dim, t_target)
    return GaussianLaw(mean, 0.5 * (cov + cov.T))


def propagate_gaussian_series(kind, model, law, times, dt=DEFAULT_FLOW_DT):
    """Laws at each of the increasing ``times``, chaining the flow between them."""
    laws = []
    current, clock = law, 0.0
    for t in times:
        if t < clock:
            raise ModelValidationError('Times must be non-decreasing.')
        current = propagate_gaussian(kind, model, current, t - clock, dt)
        clock = t
        laws.append(current)
    return laws
