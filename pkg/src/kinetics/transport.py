"""
Distances between laws: exact empirical Wasserstein-2 and closed forms for
Gaussians (Wasserstein-2, relative entropy, L1 of densities).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, eigh, solve_triangular
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import multivariate_normal

from .exceptions import ModelValidationError
from .moments import EIGENVALUE_FLOOR

MAX_CLOUD_SIZE = 8192
GRID_SPAN = 8.0
GRID_POINTS = 2048


@dataclass(frozen=True)
class EmpiricalCloud:
    """n equally weighted points in R^dim."""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[0] < 1:
            raise ModelValidationError('A cloud needs at least one point.')
        if not np.isfinite(points).all():
            raise ModelValidationError('Cloud contains non-finite points.')
        points.flags.writeable = False
        object.__setattr__(self, 'points', points)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @classmethod
    def from_states(cls, states, particle=0):
        """Cloud of (x_i, y_i) of one particle across replica states."""
        return cls(np.array([np.concatenate([s.x[particle], s.y[particle]]) for s in states]))

    @classmethod
    def from_state(cls, state):
        """Empirical measure of all particles of one state."""
        return cls(state.phase)


@dataclass(frozen=True)
class TransportPlanResult:
    cost: float
    assignment: np.ndarray

    @property
    def distance(self):
        return float(np.sqrt(self.cost))


def w2_empirical(a, b):
    """
    Squared Wasserstein-2 distance between equal-size empirical measures.

    The optimal plan is a permutation; it is found by shortest augmenting
    paths on the cost matrix scaled to [0, 1], and the cost is then summed
    on the unscaled matrix.
    """
    if a.n != b.n or a.dim != b.dim:
        raise ModelValidationError(
            f"Clouds must have equal size and dimension, got {a.n}x{a.dim} and {b.n}x{b.dim}."
        )
    if a.n > MAX_CLOUD_SIZE:
        raise ModelValidationError(f"Clouds larger than {MAX_CLOUD_SIZE} points are not supported.")
    cost = cdist(a.points, b.points, 'sqeuclidean')
    scale = cost.max()
    rows, cols = linear_sum_assignment(cost / scale if scale > 0 else cost)
    return TransportPlanResult(cost=float(cost[rows, cols].mean()), assignment=cols)


def _check_pair(g1, g2):
    if g1.dim != g2.dim:
        raise ModelValidationError(f"Laws have different dimensions: {g1.dim} and {g2.dim}.")


def _psd_sqrt(matrix):
    eigenvalues, vectors = eigh(matrix)
    if eigenvalues.min() < EIGENVALUE_FLOOR * max(1.0, abs(eigenvalues).max()):
        raise ModelValidationError('Covariance is not positive semidefinite.')
    return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.T


def w2_gaussian(g1, g2):
    """Wasserstein-2 distance between two Gaussian laws (Bures formula)."""
    _check_pair(g1, g2)
    root2 = _psd_sqrt(g2.cov)
    middle = _psd_sqrt(root2 @ g1.cov @ root2)
    shift = g1.mean - g2.mean
    squared = float(shift @ shift + np.trace(g1.cov + g2.cov - 2.0 * middle))
    return float(np.sqrt(max(squared, 0.0)))


def kl_gaussian(g1, g2):
    """
    KL(g1 || g2) in nats.

    Works with the eigenvalues l of L^-1 cov1 L^-T, L the Cholesky factor of
    cov2, and sums l - 1 - log l through log1p to keep precision when the
    laws are close. Returns inf when cov1 is singular.
    """
    _check_pair(g1, g2)
    try:
        factor, lower = cho_factor(g2.cov, lower=True)
    except LinAlgError as error:
        raise ModelValidationError('Reference covariance is singular.') from error
    chol = np.tril(factor)
    whitened = solve_triangular(chol, g1.cov, lower=True)
    whitened = solve_triangular(chol, whitened.T, lower=True)
    ratios = eigh(0.5 * (whitened + whitened.T), eigvals_only=True)
    if ratios.min() <= 0:
        return float('inf')
    excess = ratios - 1.0
    shift = solve_triangular(chol, g2.mean - g1.mean, lower=True)
    return 0.5 * float(np.sum(excess - np.log1p(excess)) + shift @ shift)


@dataclass(frozen=True)
class GridSpec:
    span: float = GRID_SPAN
    points: int = GRID_POINTS


def l1_gaussian_grid(g1, g2, grid_spec=None):
    """
    ∫ |p1 - p2| by the midpoint rule, for laws of dimension 1 or 2.

    Each axis covers the union of mean ± span * std of both laws. The value
    lies in [0, 2].
    """
    _check_pair(g1, g2)
    grid_spec = grid_spec or GridSpec()
    if g1.dim > 2:
        raise ModelValidationError('Grid L1 distance supports dimension <= 2.')
    axes, widths = [], []
    for k in range(g1.dim):
        lo = min(g.mean[k] - grid_spec.span * np.sqrt(g.cov[k, k]) for g in (g1, g2))
        hi = max(g.mean[k] + grid_spec.span * np.sqrt(g.cov[k, k]) for g in (g1, g2))
        width = (hi - lo) / grid_spec.points
        axes.append(lo + width * (np.arange(grid_spec.points) + 0.5))
        widths.append(width)
    mesh = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, g1.dim)
    p1 = multivariate_normal(g1.mean, g1.cov).pdf(mesh)
    p2 = multivariate_normal(g2.mean, g2.cov).pdf(mesh)
    return float(np.sum(np.abs(p1 - p2)) * np.prod(widths))
