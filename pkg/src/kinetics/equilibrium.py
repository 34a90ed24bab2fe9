"""
Equilibria of the nonlinear dynamics and of the quadratic particle system.

The nonlinear equilibrium is a product: a centred Gaussian velocity law with
variance sigma^2 / (2 gamma) times a position density nu solving

    nu = normalize(exp(-beta (V + W * nu))),    beta = 2 gamma / sigma^2

In one dimension nu is found by damped fixed-point iteration on a uniform
grid of cell midpoints. Quadratic models have closed forms for both the
nonlinear equilibrium and the N-particle Gibbs law.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .exceptions import ConvergenceError, ModelValidationError
from .moments import GaussianLaw, averaging_projector
from .transport import EmpiricalCloud

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 4096
DEFAULT_GRID_SPAN = 10.0
DEFAULT_TOLERANCE = 1e-9
DEFAULT_DAMPING = 0.5
MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``points`` cells on [lo, hi]."""

    lo: float
    hi: float
    points: int

    def __post_init__(self):
        if not self.hi > self.lo or self.points < 2:
            raise ModelValidationError('Grid needs hi > lo and at least two cells.')

    @property
    def h(self):
        return (self.hi - self.lo) / self.points

    @property
    def midpoints(self):
        return self.lo + self.h * (np.arange(self.points) + 0.5)

    @property
    def edges(self):
        return np.linspace(self.lo, self.hi, self.points + 1)


def default_grid(model, points=DEFAULT_GRID_POINTS, span=DEFAULT_GRID_SPAN):
    """points cells on ± span / sqrt(c1)."""
    half = span / np.sqrt(model.c1)
    return Grid(-half, half, points)


@dataclass(frozen=True)
class FixedPointDensity:
    grid: Grid
    values: np.ndarray
    iterations: int
    residual: float
    history: tuple = ()

    @property
    def mass(self):
        return float(np.sum(self.values) * self.grid.h)

    @property
    def mean(self):
        return float(np.sum(self.grid.midpoints * self.values) * self.grid.h)

    @property
    def variance(self):
        centred = self.grid.midpoints - self.mean
        return float(np.sum(centred * centred * self.values) * self.grid.h)

    def cdf_at_edges(self):
        cumulative = np.concatenate([[0.0], np.cumsum(self.values) * self.grid.h])
        return cumulative / cumulative[-1]

    def cdf(self, x):
        """Piecewise-linear CDF of the grid density."""
        return np.interp(x, self.grid.edges, self.cdf_at_edges())

    def symmetry_residual(self):
        return float(np.max(np.abs(self.values - self.values[::-1])))


def _normalize(values, h):
    return values / (np.sum(values) * h)


def _require_1d(model):
    if model.d != 1:
        raise ModelValidationError('The fixed-point solver supports d = 1 only.')


def interaction_potential(model, grid, values):
    """(W * nu)(x_i) = sum_j W(x_i - x_j) nu_j h on the grid midpoints."""
    P = grid.points
    offsets = grid.h * np.arange(-(P - 1), P)
    kernel = model.W.value(offsets[:, None])
    full = fftconvolve(values, kernel, mode='full')
    return full[P - 1:2 * P - 1] * grid.h


def gibbs_density(model, grid, values=None):
    """normalize(exp(-beta (V + W * nu))); without ``values`` the W term is dropped."""
    beta = model.temperature_factor
    exponent = model.V.value(grid.midpoints[:, None])
    if values is not None and not model.W.is_null:
        exponent = exponent + interaction_potential(model, grid, values)
    exponent = beta * exponent
    return _normalize(np.exp(-(exponent - exponent.min())), grid.h)


def fixed_point_map(model, grid, values, damping=1.0):
    """One damped application of the self-consistency map."""
    return (1.0 - damping) * values + damping * gibbs_density(model, grid, values)


def fixed_point_residual(model, density):
    """L1 change from re-applying the undamped map to a solved density."""
    values = density.values
    return float(np.sum(np.abs(fixed_point_map(model, density.grid, values) - values)) * density.grid.h)


def solve_fixed_point(model, grid_spec=None, tol=DEFAULT_TOLERANCE, damping=DEFAULT_DAMPING,
                      max_iterations=MAX_ITERATIONS):
    """
    Self-consistent position density of the nonlinear equilibrium (d = 1).

    Starts from normalize(exp(-beta V)) and iterates
    nu <- (1 - damping) nu + damping normalize(exp(-beta (V + W * nu)))
    until the L1 change drops below ``tol``.

    Raises:
        ModelValidationError: d > 1 or damping outside (0, 1].
        ConvergenceError: ``max_iterations`` reached first.
    """
    _require_1d(model)
    if not 0 < damping <= 1:
        raise ModelValidationError(f"Damping must lie in (0, 1], got {damping!r}.")
    grid = grid_spec or default_grid(model)
    values = gibbs_density(model, grid)
    history = []
    residual = np.inf
    for iteration in range(1, max_iterations + 1):
        updated = fixed_point_map(model, grid, values, damping)
        residual = float(np.sum(np.abs(updated - values)) * grid.h)
        values = updated
        history.append(residual)
        if residual < tol:
            logger.info("Fixed point converged in %d iterations (residual %.3e)", iteration, residual)
            return FixedPointDensity(grid, values, iteration, residual, tuple(history))
    logger.error("Fixed point did not converge (residual %.3e)", residual)
    raise ConvergenceError('Fixed-point iteration did not converge', max_iterations, residual)


def equilibrium_quadratic(a, b, gamma, sigma, d):
    """
    Nonlinear equilibrium of a quadratic model on (x, y) in R^2d.

    Positions have variance sigma^2 / (2 gamma (a + b)), velocities
    sigma^2 / (2 gamma); means and cross-covariances are zero.
    """
    if not a > 0 or not a + b > 0:
        raise ModelValidationError('Need a > 0 and a + b > 0.')
    velocity = sigma ** 2 / (2.0 * gamma)
    variances = np.concatenate([np.full(d, velocity / (a + b)), np.full(d, velocity)])
    return GaussianLaw(np.zeros(2 * d), np.diag(variances))


def gibbs_particle_quadratic(a, b, gamma, sigma, N, d):
    """
    Invariant law of the quadratic N-particle system, particle-system layout.

    Positions: s (a I + b (I - pi))^-1 tensored with I_d, which is
    s (pi / a + (I - pi) / (a + b)); velocities s I, with s = sigma^2 / (2 gamma).
    """
    if not a > 0 or not a + b > 0:
        raise ModelValidationError('Need a > 0 and a + b > 0.')
    velocity = sigma ** 2 / (2.0 * gamma)
    pi = averaging_projector(N)
    positions = velocity * (pi / a + (np.eye(N) - pi) / (a + b))
    size = N * d
    cov = np.zeros((2 * size, 2 * size))
    cov[:size, :size] = np.kron(positions, np.eye(d))
    cov[size:, size:] = velocity * np.eye(size)
    return GaussianLaw(np.zeros(2 * size), cov)


def sample_equilibrium(density, gamma, sigma, n, seed):
    """
    n i.i.d. (position, velocity) samples of the equilibrium.

    Positions use the inverse of the piecewise-linear grid CDF; velocities
    are centred Gaussian with variance sigma^2 / (2 gamma).
    """
    if n < 1:
        raise ModelValidationError('Need at least one sample.')
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    u = rng.random(n)
    positions = np.interp(u, density.cdf_at_edges(), density.grid.edges)
    velocities = np.sqrt(sigma ** 2 / (2.0 * gamma)) * rng.standard_normal(n)
    return EmpiricalCloud(np.column_stack([positions, velocities]))
