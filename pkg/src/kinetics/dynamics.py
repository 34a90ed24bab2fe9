"""
Time stepping for the interacting particle system and the nonlinear process.

Two schemes share one noise layout per particle:

- ``euler``: Euler-Maruyama, d variates per particle per step
- ``splitting``: O(dt/2) B(dt/2) A(dt) B(dt/2) O(dt/2) with exact
  Ornstein-Uhlenbeck velocity half-steps, 2d variates per particle per step

The nonlinear process replaces the empirical interaction by the mean-field
integral against its own law, supplied by a surrogate: ``ExactGaussian``
(quadratic models, exact mean flow) or ``ReferenceEnsemble`` (an independent
interacting system of size M). A ``CoupledPair`` drives both processes with
the same noise addresses, so particle i of each sees identical Brownian
increments.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import expm

from .exceptions import ModelValidationError, NumericalFailure, SurrogateMismatch
from .moments import diagonal_phase_law, oscillator_drift
from .noise import NoiseRole, NoiseStream
from .potentials import PhaseState, Quadratic, mean_field_forces, pairwise_field, potential_energy

logger = logging.getLogger(__name__)

DEFAULT_REPLICAS = 64
DEFAULT_ENSEMBLE_FACTOR = 16
LYAPUNOV_EPSILON_SCALE = 0.05
DEFAULT_RECORD_INTERVALS = 100

POSITION_MOMENT = 'position_second_moment'
VELOCITY_MOMENT = 'velocity_second_moment'
LYAPUNOV = 'lyapunov'
COUPLING_GAP = 'coupling_gap'


class Scheme(str, Enum):
    EULER = 'euler'
    SPLITTING = 'splitting'

    def noise_width(self, d):
        return d if self is Scheme.EULER else 2 * d


class SurrogateKind(str, Enum):
    EXACT_GAUSSIAN = 'exact_gaussian'
    REFERENCE_ENSEMBLE = 'reference_ensemble'


def ou_variance(gamma, h):
    """Variance per unit sigma^2 of an exact OU velocity update over time h."""
    if gamma == 0:
        return h
    return -math.expm1(-2.0 * gamma * h) / (2.0 * gamma)


def _step_index(state, dt, step):
    return int(round(state.t / dt)) if step is None else int(step)


def _advance(model, state, dt, noise, force, force_next, scheme, step):
    if not dt > 0:
        raise ModelValidationError(f"Time step must be > 0, got {dt!r}.")
    scheme = Scheme(scheme)
    d = state.d
    xi = noise.block(step, state.n, scheme.noise_width(d))
    x, y = state.x, state.y
    gamma, sigma = model.gamma, model.sigma

    if scheme is Scheme.EULER:
        x_new = x + y * dt
        y_new = y - gamma * y * dt - force(x) * dt + sigma * math.sqrt(dt) * xi
    else:
        half = 0.5 * dt
        decay = math.exp(-gamma * half)
        kick = sigma * math.sqrt(ou_variance(gamma, half))
        v = decay * y + kick * xi[:, :d]
        v = v - half * force(x)
        x_new = x + dt * v
        v = v - half * force_next()(x_new)
        y_new = decay * v + kick * xi[:, d:]

    if not (np.isfinite(x_new).all() and np.isfinite(y_new).all()):
        raise NumericalFailure('Non-finite particle state, dt is likely too large', step=step)
    return PhaseState(x=x_new, y=y_new, t=state.t + dt)


def step_interacting(model, state, dt, noise, *, scheme=Scheme.EULER, step=None, executor=None):
    """
    Advance the interacting system by one step.

    Args:
        noise: NoiseStream of this replica's dynamics.
        step: noise counter to use; defaults to round(t / dt).
        executor: optional pool for the pairwise force blocks.

    Returns:
        The new PhaseState at t + dt.
    """
    def force(x):
        return mean_field_forces(model, x, executor=executor)

    return _advance(model, state, dt, noise, force, lambda: force, scheme,
                    _step_index(state, dt, step))


def _surrogate_force(model, surrogate, executor):
    def force(x):
        forces = model.V.gradient(x)
        if not model.W.is_null:
            forces = forces + surrogate.field(x, executor=executor)
        return forces
    return force


def step_nonlinear(model, state, surrogate, dt, noise, *, scheme=Scheme.EULER, step=None,
                   surrogate_next=None, executor=None):
    """
    Advance copies of the nonlinear process by one step.

    The interaction is the surrogate's mean-field integral at the current
    time. The splitting scheme also needs the surrogate one step ahead; pass
    it as ``surrogate_next`` when it is already known.
    """
    if abs(surrogate.t - state.t) > dt / 2:
        raise SurrogateMismatch(surrogate.t, state.t, dt)

    def force_next():
        ahead = surrogate_next if surrogate_next is not None else surrogate.advanced(dt)
        return _surrogate_force(model, ahead, executor)

    return _advance(model, state, dt, noise, _surrogate_force(model, surrogate, executor),
                    force_next, scheme, _step_index(state, dt, step))


class ExactGaussian:
    """Mean-field surrogate for quadratic models from the exact mean flow."""

    def __init__(self, model, mean, t=0.0, propagators=None):
        self.model = model
        self.a, self.b = model.quadratic_coefficients()
        self.mean = np.asarray(mean, dtype=float)
        if self.mean.shape != (2 * model.d,):
            raise ModelValidationError('ExactGaussian needs a (position, velocity) mean of size 2d.')
        self.t = float(t)
        self._propagators = {} if propagators is None else propagators

    @classmethod
    def from_law(cls, model, law):
        return cls(model, law.mean)

    @property
    def mean_x(self):
        return self.mean[:self.model.d]

    def field(self, x, executor=None):
        return self.b * (x - self.mean_x)

    def propagator(self, dt):
        if dt not in self._propagators:
            drift = oscillator_drift(self.a, self.model.gamma, self.model.d)
            self._propagators[dt] = expm(-dt * drift)
        return self._propagators[dt]

    def advanced(self, dt):
        return ExactGaussian(self.model, self.propagator(dt) @ self.mean, self.t + dt,
                             self._propagators)


class ReferenceEnsemble:
    """Mean-field surrogate from an independent interacting system of size M."""

    def __init__(self, model, state, noise, scheme=Scheme.EULER, executor=None):
        self.model = model
        self.state = state
        self.noise = noise
        self.scheme = Scheme(scheme)
        self.executor = executor

    @classmethod
    def sample(cls, model, law, size, replica_stream, scheme=Scheme.EULER, executor=None):
        state = sample_initial(law, size, replica_stream.spawn(int(NoiseRole.ENSEMBLE_INITIAL)))
        noise = replica_stream.spawn(int(NoiseRole.ENSEMBLE_DYNAMICS))
        return cls(model, state, noise, scheme, executor)

    @property
    def t(self):
        return self.state.t

    @property
    def size(self):
        return self.state.n

    def field(self, x, executor=None):
        W = self.model.W
        if isinstance(W, Quadratic):
            return W.coefficient * (x - self.state.x.mean(axis=0))
        return pairwise_field(W, x, self.state.x, executor=executor or self.executor)

    def advanced(self, dt):
        state = step_interacting(self.model, self.state, dt, self.noise,
                                 scheme=self.scheme, executor=self.executor)
        return ReferenceEnsemble(self.model, state, self.noise, self.scheme, self.executor)


def sample_initial(law, n, noise):
    """n i.i.d. particles from a (position, velocity) Gaussian law on R^2d."""
    if law.dim % 2:
        raise ModelValidationError('An initial law must live on (position, velocity) space.')
    d = law.dim // 2
    z = law.mean + noise.block(0, n, 2 * d) @ law.factor().T
    return PhaseState(x=z[:, :d], y=z[:, d:], t=0.0)


def default_initial_law(d):
    return diagonal_phase_law(d, 0.0, 0.0, 1.0, 1.0)


def make_surrogate(kind, model, law, n, replica_stream, *, ensemble_size=None,
                   scheme=Scheme.EULER, executor=None):
    kind = SurrogateKind(kind)
    if kind is SurrogateKind.EXACT_GAUSSIAN:
        return ExactGaussian.from_law(model, law)
    size = ensemble_size or DEFAULT_ENSEMBLE_FACTOR * n
    return ReferenceEnsemble.sample(model, law, size, replica_stream, scheme, executor)


@dataclass(frozen=True)
class CoupledPair:
    interacting: PhaseState
    nonlinear: PhaseState
    noise: NoiseStream
    surrogate: ExactGaussian | ReferenceEnsemble

    def __post_init__(self):
        a, b = self.interacting, self.nonlinear
        if (a.n, a.d) != (b.n, b.d) or a.t != b.t:
            raise ModelValidationError('Coupled states must share N, d and t.')

    @classmethod
    def start(cls, model, law, n, replica_stream, surrogate_kind, *, ensemble_size=None,
              scheme=Scheme.EULER, executor=None):
        """Both members start from the same samples of ``law``."""
        state = sample_initial(law, n, replica_stream.spawn(int(NoiseRole.INITIAL)))
        surrogate = make_surrogate(surrogate_kind, model, law, n, replica_stream,
                                   ensemble_size=ensemble_size, scheme=scheme, executor=executor)
        return cls(state, state, replica_stream.spawn(int(NoiseRole.DYNAMICS)), surrogate)

    @property
    def t(self):
        return self.interacting.t

    def advance(self, model, dt, *, scheme=Scheme.EULER, executor=None):
        step = _step_index(self.interacting, dt, None)
        ahead = self.surrogate.advanced(dt)
        interacting = step_interacting(model, self.interacting, dt, self.noise,
                                       scheme=scheme, step=step, executor=executor)
        nonlinear = step_nonlinear(model, self.nonlinear, self.surrogate, dt, self.noise,
                                   scheme=scheme, step=step, surrogate_next=ahead,
                                   executor=executor)
        return CoupledPair(interacting, nonlinear, self.noise, ahead)

    def gap(self):
        """|Z_N - Z̄_N|^2 / N."""
        dx = self.interacting.x - self.nonlinear.x
        dy = self.interacting.y - self.nonlinear.y
        return float(np.sum(dx * dx) + np.sum(dy * dy)) / self.interacting.n


def lyapunov_epsilon(model):
    return LYAPUNOV_EPSILON_SCALE * min(1.0, model.gamma, model.convexity_margin)


def lyapunov_value(model, state, epsilon):
    """H(x, y) / N with H = U_N(x) + |y|^2 / 2 + epsilon x.y."""
    kinetic = 0.5 * float(np.sum(state.y * state.y))
    cross = epsilon * float(np.sum(state.x * state.y))
    return (potential_energy(model, state.x) + kinetic + cross) / state.n


def record_steps(T, dt, times=None):
    """Step indices at which diagnostics are recorded, always including 0."""
    if not T >= 0 or not dt > 0:
        raise ModelValidationError('Horizon must be >= 0 and dt > 0.')
    total = int(round(T / dt))
    if times is None:
        steps = np.linspace(0, total, min(total, DEFAULT_RECORD_INTERVALS) + 1)
    else:
        steps = np.asarray(times, dtype=float) / dt
    steps = np.unique(np.clip(np.rint(steps).astype(int), 0, total))
    return np.union1d([0], steps)


def run_replicas(task, replicas, threads=1):
    """task(r) for every replica, returned in replica order."""
    if threads <= 1 or replicas <= 1:
        return [task(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(replicas)))


@contextmanager
def force_pool(replicas, threads):
    """
    Pool for the pairwise force blocks, or None.

    Threads go to the force evaluation inside each replica only when there
    are fewer replicas than threads; replicas then run one after another.
    """
    if threads <= 1 or replicas >= threads:
        yield None
        return
    logger.debug("Force pool of %d threads for %d replicas", threads, replicas)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield pool


@dataclass(frozen=True)
class SimulationSeries:
    """Per-replica diagnostics on a shared time grid."""

    t: np.ndarray
    per_replica: dict
    final_states: tuple
    final_nonlinear: tuple | None = None
    snapshots: tuple | None = None

    @property
    def replicas(self):
        return len(self.final_states)

    def mean(self, name):
        return self.per_replica[name].mean(axis=0)

    def stderr(self, name):
        values = self.per_replica[name]
        if values.shape[0] < 2:
            return np.zeros(values.shape[1])
        return values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])


def _observe(model, state, epsilon):
    return {
        POSITION_MOMENT: float(np.mean(np.sum(state.x * state.x, axis=1))),
        VELOCITY_MOMENT: float(np.mean(np.sum(state.y * state.y, axis=1))),
        LYAPUNOV: lyapunov_value(model, state, epsilon),
    }


def _collect(steps, dt, traces, metrics):
    per_replica = {name: np.array([trace[0][name] for trace in traces]) for name in metrics}
    return np.asarray(steps) * dt, per_replica


def simulate_interacting(model, N, T, dt, seed, *, replicas=DEFAULT_REPLICAS, initial=None,
                         scheme=Scheme.EULER, epsilon=None, times=None, threads=1,
                         keep_states=False):
    """
    Interacting system only: moments and Lyapunov series over replicas.

    With keep_states the full state at every recording time is kept per
    replica in SimulationSeries.snapshots.
    """
    law = initial or default_initial_law(model.d)
    steps = record_steps(T, dt, times)
    epsilon = lyapunov_epsilon(model) if epsilon is None else epsilon
    root = NoiseStream(seed)
    wanted = set(int(s) for s in steps)

    def task(replica):
        logger.debug("Replica %d: interacting N=%d up to step %d", replica, N, steps[-1])
        stream = root.spawn(replica)
        noise = stream.spawn(int(NoiseRole.DYNAMICS))
        state = sample_initial(law, N, stream.spawn(int(NoiseRole.INITIAL)))
        series = {name: [] for name in (POSITION_MOMENT, VELOCITY_MOMENT, LYAPUNOV)}
        kept = []
        try:
            for step in range(int(steps[-1]) + 1):
                if step in wanted:
                    for name, value in _observe(model, state, epsilon).items():
                        series[name].append(value)
                    if keep_states:
                        kept.append(state)
                if step < steps[-1]:
                    state = step_interacting(model, state, dt, noise, scheme=scheme, step=step,
                                             executor=pool)
        except NumericalFailure as error:
            raise NumericalFailure(error.detail, step=error.step, replica=replica) from error
        return series, state, tuple(kept)

    with force_pool(replicas, threads) as pool:
        traces = run_replicas(task, replicas, 1 if pool else threads)
    t, per_replica = _collect(steps, dt, traces, (POSITION_MOMENT, VELOCITY_MOMENT, LYAPUNOV))
    return SimulationSeries(
        t=t,
        per_replica=per_replica,
        final_states=tuple(trace[1] for trace in traces),
        snapshots=tuple(trace[2] for trace in traces) if keep_states else None,
    )


def simulate_coupled(model, N, T, dt, surrogate=None, seed=0, *, replicas=DEFAULT_REPLICAS,
                     initial=None, scheme=Scheme.EULER, ensemble_size=None, epsilon=None,
                     times=None, threads=1):
    """
    Run R coupled (interacting, nonlinear) pairs sharing noise and initial samples.

    Args:
        surrogate: SurrogateKind; exact Gaussian for quadratic models when None,
            reference ensemble otherwise.
        ensemble_size: M for the reference ensemble, default 16 N.
        times: recording times, default 101 evenly spaced points on [0, T].
        threads: workers across replicas, or across force blocks when there
            are fewer replicas than threads (see force_pool).

    Returns:
        SimulationSeries with coupling_gap = |Z - Z̄|^2 / N, the per-particle
        second moments of the interacting positions and velocities and the
        Lyapunov function H / N, plus the final states of both members.
    """
    law = initial or default_initial_law(model.d)
    if surrogate is None:
        surrogate = SurrogateKind.EXACT_GAUSSIAN if model.is_quadratic else SurrogateKind.REFERENCE_ENSEMBLE
    surrogate = SurrogateKind(surrogate)
    steps = record_steps(T, dt, times)
    epsilon = lyapunov_epsilon(model) if epsilon is None else epsilon
    root = NoiseStream(seed)
    wanted = set(int(s) for s in steps)
    names = (COUPLING_GAP, POSITION_MOMENT, VELOCITY_MOMENT, LYAPUNOV)

    def task(replica):
        logger.debug("Replica %d: coupled N=%d surrogate=%s", replica, N, surrogate.value)
        pair = CoupledPair.start(model, law, N, root.spawn(replica), surrogate,
                                 ensemble_size=ensemble_size, scheme=scheme, executor=pool)
        series = {name: [] for name in names}
        try:
            for step in range(int(steps[-1]) + 1):
                if step in wanted:
                    series[COUPLING_GAP].append(pair.gap())
                    for name, value in _observe(model, pair.interacting, epsilon).items():
                        series[name].append(value)
                if step < steps[-1]:
                    pair = pair.advance(model, dt, scheme=scheme, executor=pool)
        except NumericalFailure as error:
            raise NumericalFailure(error.detail, step=error.step, replica=replica) from error
        return series, pair

    with force_pool(replicas, threads) as pool:
        traces = run_replicas(task, replicas, 1 if pool else threads)
    t, per_replica = _collect(steps, dt, traces, names)
    return SimulationSeries(
        t=t,
        per_replica=per_replica,
        final_states=tuple(trace[1].interacting for trace in traces),
        final_nonlinear=tuple(trace[1].nonlinear for trace in traces),
    )
