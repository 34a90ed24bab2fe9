"""
Potential families, the N-body potential U_N and the mean-field forces.

Two families are shipped, both even and both with analytic derivatives:

- ``Quadratic(coefficient)``: (coefficient / 2) |x|^2
- ``MollifiedCoulomb(strength, mollifier)``: strength * (mollifier^2 + |x|^2)^(-1/2)

``build_model`` checks the convexity condition c2 < c1 / 2 and fills in the
constants every rate formula needs. Arrays of points always carry the space
dimension on the last axis, so ``x`` may be a single d-vector or an (N, d)
block of particles.
"""
from __future__ import annotations

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ModelValidationError, NumericalFailure

logger = logging.getLogger(__name__)

# Radial profile scan used for the mollified Coulomb Hessian bounds.
COULOMB_GRID_SPAN = 50.0
COULOMB_GRID_POINTS = 100_000

# Pairwise force rows are summed in blocks of this many particles. The block
# size is fixed so that results do not depend on how blocks are scheduled.
FORCE_BLOCK_ROWS = 256


@dataclass(frozen=True)
class Quadratic:
    """(coefficient / 2) |x|^2."""

    coefficient: float

    kind = 'quadratic'

    @property
    def is_null(self):
        return self.coefficient == 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.coefficient * np.sum(x * x, axis=-1)

    def gradient(self, x):
        return self.coefficient * np.asarray(x, dtype=float)

    def hessian_vector(self, x, u):
        return self.coefficient * np.asarray(u, dtype=float)

    def hessian_extremes(self, d):
        """Smallest and largest Hessian eigenvalue over the whole space."""
        return self.coefficient, self.coefficient

    def as_dict(self):
        return {'kind': self.kind, 'coefficient': self.coefficient}


@dataclass(frozen=True)
class MollifiedCoulomb:
    """strength * (mollifier^2 + |x|^2)^(-1/2), a smoothed Coulomb kernel."""

    strength: float
    mollifier: float

    kind = 'mollified_coulomb'

    def __post_init__(self):
        if self.strength < 0:
            raise ModelValidationError('MollifiedCoulomb strength must be >= 0.')
        if self.mollifier <= 0:
            raise ModelValidationError('MollifiedCoulomb mollifier must be > 0.')

    @property
    def is_null(self):
        return self.strength == 0.0

    def _q(self, x):
        return self.mollifier ** 2 + np.sum(x * x, axis=-1, keepdims=True)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.strength * self._q(x)[..., 0] ** -0.5

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return -self.strength * x * self._q(x) ** -1.5

    def hessian_vector(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        q = self._q(x)
        xu = np.sum(x * u, axis=-1, keepdims=True)
        return self.strength * (3.0 * x * xu * q ** -2.5 - u * q ** -1.5)

    def radial_eigenvalues(self, r):
        """Hessian eigenvalues at radius r: (radial, tangential)."""
        r = np.asarray(r, dtype=float)
        q = self.mollifier ** 2 + r * r
        radial = self.strength * (2.0 * r * r - self.mollifier ** 2) * q ** -2.5
        tangential = -self.strength * q ** -1.5
        return radial, tangential

    def hessian_extremes(self, d, span=COULOMB_GRID_SPAN, points=COULOMB_GRID_POINTS):
        """
        Extreme Hessian eigenvalues from a dense scan of the radial profile.

        The grid is r in [0, span * mollifier] with ``points`` nodes. In one
        dimension only the radial eigenvalue exists; from d = 2 on the
        tangential one enters too.
        """
        r = np.linspace(0.0, span * self.mollifier, points)
        radial, tangential = self.radial_eigenvalues(r)
        if d > 1:
            eigenvalues = np.concatenate([radial, tangential])
        else:
            eigenvalues = radial
        return float(eigenvalues.min()), float(eigenvalues.max())

    def as_dict(self):
        return {'kind': self.kind, 'strength': self.strength, 'mollifier': self.mollifier}


Potential = Quadratic | MollifiedCoulomb


def potential_from_dict(data):
    """Build a potential from its ``as_dict`` form."""
    kind = data.get('kind')
    if kind == Quadratic.kind:
        return Quadratic(float(data['coefficient']))
    if kind == MollifiedCoulomb.kind:
        return MollifiedCoulomb(float(data['strength']), float(data['mollifier']))
    raise ModelValidationError(f"Unknown potential kind: {kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    d: int
    gamma: float
    sigma: float
    V: Potential
    W: Potential
    c1: float
    c2: float
    hessV_sup: float
    hessW_sup: float

    @property
    def is_quadratic(self):
        return isinstance(self.V, Quadratic) and isinstance(self.W, Quadratic)

    @property
    def convexity_margin(self):
        """c1 - 2 c2, the lower Hessian bound of U_N."""
        return self.c1 - 2.0 * self.c2

    @property
    def temperature_factor(self):
        """2 gamma / sigma^2, the inverse temperature of the Gibbs laws."""
        return 2.0 * self.gamma / self.sigma ** 2

    def quadratic_coefficients(self):
        """(a, b) of a quadratic model; rejects any other model."""
        if not self.is_quadratic:
            raise ModelValidationError('This operation requires quadratic V and W.')
        return self.V.coefficient, self.W.coefficient

    def as_dict(self):
        return {
            'd': self.d,
            'gamma': self.gamma,
            'sigma': self.sigma,
            'V': self.V.as_dict(),
            'W': self.W.as_dict(),
            'c1': self.c1,
            'c2': self.c2,
            'hessV_sup': self.hessV_sup,
            'hessW_sup': self.hessW_sup,
        }


def build_model(d, gamma, sigma, V, W):
    """
    Validate a model and compute its convexity constants.

    c1 is the smallest eigenvalue of the Hessian of V, c2 the negative part of
    the smallest eigenvalue of the Hessian of W, and the sups are operator
    norms. Raises ModelValidationError when V is not strictly convex or when
    c2 >= c1 / 2.
    """
    if int(d) != d or d < 1:
        raise ModelValidationError(f"Dimension must be a positive integer, got {d!r}.")
    if not gamma > 0:
        raise ModelValidationError(f"Friction gamma must be > 0, got {gamma!r}.")
    if not sigma > 0:
        raise ModelValidationError(f"Noise sigma must be > 0, got {sigma!r}.")
    if isinstance(V, MollifiedCoulomb):
        raise ModelValidationError('The exterior potential V must be strictly convex.')

    v_min, v_max = V.hessian_extremes(d)
    w_min, w_max = W.hessian_extremes(d)
    c1 = v_min
    c2 = max(0.0, -w_min)
    hessV_sup = max(abs(v_min), abs(v_max))
    hessW_sup = max(abs(w_min), abs(w_max))

    if c1 <= 0:
        raise ModelValidationError(f"V is not strictly convex (c1 = {c1:.6g}).")
    if c2 >= c1 / 2:
        raise ModelValidationError(
            f"Interaction too concave: c2 = {c2:.6g} must be < c1 / 2 = {c1 / 2:.6g}."
        )

    model = ModelSpec(
        d=int(d), gamma=float(gamma), sigma=float(sigma), V=V, W=W,
        c1=float(c1), c2=float(c2), hessV_sup=float(hessV_sup), hessW_sup=float(hessW_sup),
    )
    logger.debug("Built model c1=%.6g c2=%.6g hessV_sup=%.6g hessW_sup=%.6g",
                 model.c1, model.c2, model.hessV_sup, model.hessW_sup)
    return model


def _frozen(array):
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class PhaseState:
    """Positions and velocities of N particles in R^d at time t."""

    x: np.ndarray
    y: np.ndarray
    t: float = 0.0
    n: int = field(init=False)
    d: int = field(init=False)

    def __post_init__(self):
        x = _frozen(self.x)
        y = _frozen(self.y)
        if x.ndim != 2 or x.shape != y.shape:
            raise ModelValidationError(
                f"Positions {x.shape} and velocities {y.shape} must be matching (N, d) arrays."
            )
        if self.t < 0:
            raise ModelValidationError('Simulation time must be >= 0.')
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise NumericalFailure('Non-finite particle state')
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 't', float(self.t))
        object.__setattr__(self, 'n', x.shape[0])
        object.__setattr__(self, 'd', x.shape[1])

    def replace(self, x=None, y=None, t=None):
        return PhaseState(
            x=self.x if x is None else x,
            y=self.y if y is None else y,
            t=self.t if t is None else t,
        )

    @property
    def phase(self):
        """(N, 2d) rows (x_i, y_i)."""
        return np.concatenate([self.x, self.y], axis=1)


def interaction_forces(W, x, executor: Executor | None = None):
    """(1/N) sum_j grad W(x_i - x_j) for every i, including j = i."""
    x = np.asarray(x, dtype=float)
    if W.is_null:
        return np.zeros_like(x)
    if isinstance(W, Quadratic):
        return W.coefficient * (x - x.mean(axis=0))
    return pairwise_field(W, x, x, executor=executor)


def pairwise_field(W, targets, sources, executor: Executor | None = None):
    """Average of grad W(target_i - source_j) over the sources, per target."""
    targets = np.asarray(targets, dtype=float)
    sources = np.asarray(sources, dtype=float)
    out = np.empty_like(targets)

    def fill(start):
        stop = min(start + FORCE_BLOCK_ROWS, len(targets))
        diff = targets[start:stop, None, :] - sources[None, :, :]
        out[start:stop] = W.gradient(diff).mean(axis=1)

    starts = range(0, len(targets), FORCE_BLOCK_ROWS)
    if executor is None:
        for start in starts:
            fill(start)
    else:
        list(executor.map(fill, starts))
    return out


def mean_field_forces(model, state_or_x, executor: Executor | None = None):
    """Batch mean-field force grad V(x_i) + (1/N) sum_j grad W(x_i - x_j)."""
    x = state_or_x.x if isinstance(state_or_x, PhaseState) else np.asarray(state_or_x, dtype=float)
    forces = model.V.gradient(x)
    if not model.W.is_null:
        forces = forces + interaction_forces(model.W, x, executor=executor)
    return forces


def mean_field_force(model, state, i):
    """Mean-field force on particle i alone."""
    if not 0 <= i < state.n:
        raise IndexError(f"Particle index {i} out of range for N = {state.n}.")
    x = state.x
    force = model.V.gradient(x[i])
    if model.W.is_null:
        return force
    if isinstance(model.W, Quadratic):
        return force + model.W.coefficient * (x[i] - x.mean(axis=0))
    return force + model.W.gradient(x[i] - x).mean(axis=0)


def potential_energy(model, x):
    """U_N(x) = sum_i V(x_i) + (1 / 2N) sum_{i,j} W(x_i - x_j)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    energy = float(np.sum(model.V.value(x)))
    if model.W.is_null:
        return energy
    if isinstance(model.W, Quadratic):
        centred = x - x.mean(axis=0)
        return energy + 0.5 * model.W.coefficient * float(np.sum(centred * centred))
    total = 0.0
    for start in range(0, n, FORCE_BLOCK_ROWS):
        diff = x[start:start + FORCE_BLOCK_ROWS, None, :] - x[None, :, :]
        total += float(np.sum(model.W.value(diff)))
    return energy + total / (2 * n)


def hessian_quadratic_form(model, x, u):
    """
    u . Hess U_N(x) u assembled from Hessian-vector products.

    Uses sum_i u_i.HV(x_i)u_i + (1/2N) sum_{i,j} (u_i - u_j).HW(x_i - x_j)(u_i - u_j).
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n = len(x)
    value = float(np.sum(u * model.V.hessian_vector(x, u)))
    if model.W.is_null:
        return value
    du = u[:, None, :] - u[None, :, :]
    dx = x[:, None, :] - x[None, :, :]
    value += float(np.sum(du * model.W.hessian_vector(dx, du))) / (2 * n)
    return value


@dataclass(frozen=True)
class HessianScanReport:
    min_quotient: float
    max_quotient: float
    trials: int


def hessian_bound_scan(model, trials, seed, n_particles=8, spread=3.0):
    """
    Extreme Rayleigh quotients of Hess U_N over random (x, u) with |u| = 1.

    Positions are drawn centred Gaussian with standard deviation ``spread`` so
    the scan visits the region where the mollified kernel bends most.
    """
    if trials < 1:
        raise ModelValidationError('The scan needs at least one trial.')
    rng = np.random.default_rng(seed)
    low, high = np.inf, -np.inf
    for _ in range(trials):
        x = spread * rng.standard_normal((n_particles, model.d))
        u = rng.standard_normal((n_particles, model.d))
        u /= np.linalg.norm(u)
        quotient = hessian_quadratic_form(model, x, u)
        low = min(low, quotient)
        high = max(high, quotient)
    return HessianScanReport(min_quotient=float(low), max_quotient=float(high), trials=trials)
