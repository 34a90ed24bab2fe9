"""
Experiment runner.

Each experiment kind is a function ``(config, writer, out) -> (fits, files)``
registered in RUNNERS. ``run`` wires one up with a SeriesWriter, writes the
manifest and returns the RunRecord.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import kstest

from kinetics.dynamics import (
    COUPLING_GAP,
    DEFAULT_ENSEMBLE_FACTOR,
    LYAPUNOV,
    LYAPUNOV_EPSILON_SCALE,
    POSITION_MOMENT,
    VELOCITY_MOMENT,
    Scheme,
    SurrogateKind,
    run_replicas,
    sample_initial,
    simulate_coupled,
    simulate_interacting,
)
from kinetics.equilibrium import (
    DEFAULT_GRID_POINTS,
    DEFAULT_GRID_SPAN,
    default_grid,
    equilibrium_quadratic,
    gibbs_particle_quadratic,
    sample_equilibrium,
    solve_fixed_point,
)
from kinetics.moments import (
    NonlinearFlow,
    ParticleSystem,
    diagonal_phase_law,
    particle_to_phase_order,
    propagate_gaussian_series,
)
from kinetics.noise import NoiseRole, NoiseStream
from kinetics.potentials import build_model, potential_from_dict
from kinetics.rates import chaos_exponent, entropy_envelope, rate_report, spectrum_quadratic
from kinetics.transport import EmpiricalCloud, GridSpec, kl_gaussian, l1_gaussian_grid, w2_empirical, w2_gaussian

from . import __version__
from .fitting import FitError, fit_confidence_envelope, fit_exponential_rate, fit_powerlaw
from .models import ExperimentRun
from .writers import (
    AGGREGATE,
    DENSITY_COLUMNS,
    SERIES_COLUMNS,
    SeriesWriter,
    read_series,
    to_jsonable,
    write_density,
    write_json,
)

logger = logging.getLogger(__name__)

Kind = ExperimentRun.Kind

TOOL_NAME = 'kinetic-lab'
# N column value for series of the limit (nonlinear) law and for solver traces
LIMIT_N = 0
W2_MARGINAL = 'w2_marginal'
RELATIVE_ENTROPY = 'relative_entropy'
W2_TO_EQUILIBRIUM = 'w2_to_equilibrium'
L1_TO_EQUILIBRIUM = 'l1_to_equilibrium'
SAMPLE_DISTANCE = 'w2_to_equilibrium_samples'
ENTROPY_BOUND = 'relative_entropy_bound'
MARGINAL_W2_TO_LIMIT = 'marginal_w2_to_limit'
# equilibrium samples drawn to check the sampler against the grid CDF
SAMPLER_CHECK_SIZE = 4096


@dataclass(frozen=True)
class InitialLaw:
    """Isotropic Gaussian start law of one particle."""

    mean_x: float = 0.0
    mean_y: float = 0.0
    var_x: float = 1.0
    var_y: float = 1.0

    def law(self, d, copies=1):
        return diagonal_phase_law(d, self.mean_x, self.mean_y, self.var_x, self.var_y, copies=copies)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: object
    seed: int
    output_dir: Path
    n_list: tuple = ()
    t_grid: tuple = ()
    dt: float = 1e-3
    replicas: int = 64
    initial: InitialLaw = field(default_factory=InitialLaw)
    surrogate: SurrogateKind | None = None
    ensemble_size: int | None = None
    ensemble_factor: int = DEFAULT_ENSEMBLE_FACTOR
    epsilon_list: tuple = ()
    scheme: Scheme = Scheme.EULER
    fit_window: tuple | None = None
    threads: int = 1
    n_particles: int = 2
    flow_dt: float = 0.01
    lyapunov_epsilon: float | None = None
    lyapunov_epsilon_scale: float = LYAPUNOV_EPSILON_SCALE
    grid_points: int | None = None
    grid_span: float | None = None
    tolerance: float = 1e-9
    damping: float = 0.5

    @classmethod
    def from_validated(cls, data, **extra):
        """Build from ExperimentConfigSerializer.validated_data."""
        spec = data['model']
        model = build_model(spec['d'], spec['gamma'], spec['sigma'],
                            potential_from_dict(spec['V']), potential_from_dict(spec['W']))
        surrogate = data.get('surrogate')
        window = data.get('fit_window')
        return cls(
            kind=str(data['kind']),
            model=model,
            seed=int(data['seed']),
            output_dir=Path(data['output_dir']),
            n_list=tuple(data.get('n_list', ())),
            t_grid=tuple(data.get('t_grid', ())),
            dt=data['dt'],
            replicas=data['replicas'],
            initial=InitialLaw(**data['initial']),
            surrogate=SurrogateKind(surrogate) if surrogate else None,
            ensemble_size=data.get('ensemble_size'),
            epsilon_list=tuple(data.get('epsilon_list', ())),
            scheme=Scheme(data['scheme']),
            fit_window=tuple(window) if window else None,
            threads=data['threads'],
            n_particles=data['n_particles'],
            flow_dt=data['flow_dt'],
            lyapunov_epsilon=data.get('lyapunov_epsilon'),
            grid_points=data.get('grid_points'),
            grid_span=data.get('grid_span'),
            tolerance=data['tolerance'],
            damping=data['damping'],
            **extra,
        )

    @property
    def horizon(self):
        return max(self.t_grid) if self.t_grid else 0.0

    @property
    def epsilon(self):
        """Cross-term weight of the Lyapunov function."""
        if self.lyapunov_epsilon is not None:
            return self.lyapunov_epsilon
        return self.lyapunov_epsilon_scale * min(1.0, self.model.gamma, self.model.convexity_margin)

    def ensemble_for(self, n_max):
        return self.ensemble_size or self.ensemble_factor * n_max

    def echo(self):
        payload = asdict(self)
        payload.update(
            model=self.model.as_dict(),
            output_dir=str(self.output_dir),
            surrogate=self.surrogate.value if self.surrogate else None,
            scheme=self.scheme.value,
        )
        return to_jsonable(payload)


@dataclass
class RunRecord:
    kind: str
    seed: int
    config: dict
    output_dir: str
    series: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    manifest_path: str = ''
    version: str = __version__

    def manifest(self):
        return {
            'tool': TOOL_NAME,
            'version': self.version,
            'kind': self.kind,
            'seed': str(self.seed),
            'config': self.config,
            'series': {
                metric: {'path': Path(path).name, 'columns': list(SERIES_COLUMNS)}
                for metric, path in self.series.items()
            },
            'files': {name: Path(path).name for name, path in self.files.items()},
            'fits': self.fits,
            'wall_clock_seconds': self.wall_clock_seconds,
        }

    def verify(self):
        """Every referenced CSV exists and parses with the documented columns."""
        for metric, path in self.series.items():
            table = read_series(path)
            if tuple(table) != SERIES_COLUMNS:
                raise ValueError(f"{metric}: {path} does not hold a long-format series.")
        for path in self.files.values():
            if not Path(path).exists():
                raise FileNotFoundError(path)
            if path.endswith('.csv') and tuple(read_series(path)) != DENSITY_COLUMNS:
                raise ValueError(f"{path} does not hold a density table.")
        return True


def _fit_or_reason(fit, *args, **kwargs):
    try:
        return fit(*args, **kwargs).as_dict()
    except FitError as error:
        return {'error': str(error)}


def _exact_rate(model, n=1):
    if not model.is_quadratic:
        return None
    a, b = model.quadratic_coefficients()
    return spectrum_quadratic(a, b, model.gamma, n, model.d).chi_exact


def _fixed_point(config):
    grid = default_grid(config.model, points=config.grid_points or DEFAULT_GRID_POINTS,
                        span=config.grid_span or DEFAULT_GRID_SPAN)
    return solve_fixed_point(config.model, grid, tol=config.tolerance, damping=config.damping)


def run_entropy_decay(config, writer, out):
    """
    KL and W2 of the particle-system law to its Gibbs law, by exact moment flows.

    Also records the certified envelope KL(0) exp(-kappa t (1 - e^-t)^2) and
    the W2 distance from the first particle's marginal to the limit equilibrium.
    """
    model = config.model
    a, b = model.quadratic_coefficients()
    t = np.asarray(config.t_grid, dtype=float)
    limit = equilibrium_quadratic(a, b, model.gamma, model.sigma, model.d)
    kappa = rate_report(model).kappa
    envelope = np.array([entropy_envelope(kappa, 1, s) for s in t])
    fits = {}
    for n in config.n_list:
        start = config.initial.law(model.d, copies=n)
        target = gibbs_particle_quadratic(a, b, model.gamma, model.sigma, n, model.d)
        laws = propagate_gaussian_series(ParticleSystem(n), model, start, t, config.flow_dt)
        first = particle_to_phase_order(n, model.d)[:2 * model.d]
        entropy = [kl_gaussian(law, target) for law in laws]
        marginal = [w2_gaussian(law.marginal(first), limit) for law in laws]
        writer.add_series(RELATIVE_ENTROPY, n, t, entropy)
        writer.add_series(W2_TO_EQUILIBRIUM, n, t, [w2_gaussian(law, target) for law in laws])
        writer.add_series(ENTROPY_BOUND, n, t, entropy[0] * envelope)
        writer.add_series(MARGINAL_W2_TO_LIMIT, n, t, marginal)
        per_particle = kl_gaussian(start, target) / n
        writer.add('initial_entropy_per_particle', AGGREGATE, n, 0.0, per_particle)
        fits[str(n)] = {
            RELATIVE_ENTROPY: _fit_or_reason(fit_exponential_rate, t, entropy, config.fit_window),
            'initial_entropy_per_particle': per_particle,
            'chi_exact': _exact_rate(model, n),
            'within_bound': bool(np.all(np.asarray(entropy) <= entropy[0] * envelope * (1 + 1e-9) + 1e-12)),
            MARGINAL_W2_TO_LIMIT: marginal[-1],
        }
        logger.info("EntropyDecay N=%d: %s", n, fits[str(n)][RELATIVE_ENTROPY])
    return fits, {}


def run_nonlinear_decay(config, writer, out):
    """L1, W2 and KL of the nonlinear Gaussian flow to its equilibrium (d = 1)."""
    model = config.model
    a, b = model.quadratic_coefficients()
    t = np.asarray(config.t_grid, dtype=float)
    target = equilibrium_quadratic(a, b, model.gamma, model.sigma, model.d)
    laws = propagate_gaussian_series(NonlinearFlow(), model, config.initial.law(model.d), t, config.flow_dt)
    grid = GridSpec(**{key: value for key, value in
                       (('span', config.grid_span), ('points', config.grid_points)) if value})
    metrics = {
        L1_TO_EQUILIBRIUM: [l1_gaussian_grid(law, target, grid) for law in laws],
        W2_TO_EQUILIBRIUM: [w2_gaussian(law, target) for law in laws],
        RELATIVE_ENTROPY: [kl_gaussian(law, target) for law in laws],
    }
    report = rate_report(model)
    fits = {'chi_exact': report.chi_exact, 'chi_prime': report.chi_prime}
    for name, values in metrics.items():
        writer.add_series(name, LIMIT_N, t, values)
        fits[name] = _fit_or_reason(fit_exponential_rate, t, values, config.fit_window)
    logger.info("NonlinearDecay: L1 fit %s against chi_prime %.6g", fits[L1_TO_EQUILIBRIUM], report.chi_prime)
    return fits, {}


def run_chaos_scaling(config, writer, out):
    """W2 between the one-particle marginals of the coupled pair at the horizon, per N."""
    model = config.model
    horizon = config.horizon
    ensemble_size = config.ensemble_for(max(config.n_list))
    distances = {}
    for n in config.n_list:
        series = simulate_coupled(
            model, n, horizon, config.dt, config.surrogate, config.seed,
            replicas=config.replicas, initial=config.initial.law(model.d), scheme=config.scheme,
            ensemble_size=ensemble_size, epsilon=config.epsilon, times=config.t_grid,
            threads=config.threads,
        )
        writer.add_replicas(COUPLING_GAP, n, series.t, series.per_replica[COUPLING_GAP])
        plan = w2_empirical(EmpiricalCloud.from_states(series.final_states),
                            EmpiricalCloud.from_states(series.final_nonlinear))
        distances[n] = plan.distance
        writer.add(W2_MARGINAL, AGGREGATE, n, horizon, plan.distance)
        logger.info("ChaosScaling N=%d: W2 = %.6g", n, plan.distance)
    powerlaw = _fit_or_reason(fit_powerlaw, list(distances), list(distances.values()))
    if 'slope' in powerlaw:
        powerlaw['alpha'] = -powerlaw['slope']
    fits = {
        'horizon': horizon,
        W2_MARGINAL: {str(n): value for n, value in distances.items()},
        'powerlaw': powerlaw,
    }
    return fits, {}


def _equilibrium_sampler(config):
    """(replica, index, n) -> EmpiricalCloud of n equilibrium samples."""
    model = config.model
    if model.is_quadratic:
        a, b = model.quadratic_coefficients()
        law = equilibrium_quadratic(a, b, model.gamma, model.sigma, model.d)
        root = NoiseStream(config.seed)

        def draw(replica, index, n):
            stream = root.for_replica(replica, NoiseRole.EQUILIBRIUM_SAMPLES).spawn(index)
            return EmpiricalCloud.from_state(sample_initial(law, n, stream))
        return draw

    density = _fixed_point(config)

    def draw(replica, index, n):
        seed = [config.seed, replica, int(NoiseRole.EQUILIBRIUM_SAMPLES), index]
        return sample_equilibrium(density, model.gamma, model.sigma, n, seed)
    return draw


def run_confidence_curve(config, writer, out):
    """Frequency over replicas of W2(empirical measure, equilibrium samples) >= eps."""
    model = config.model
    draw = _equilibrium_sampler(config)
    cells = []
    epsilon_files = {}
    for n in config.n_list:
        series = simulate_interacting(
            model, n, config.horizon, config.dt, config.seed, replicas=config.replicas,
            initial=config.initial.law(model.d), scheme=config.scheme, epsilon=config.epsilon,
            times=config.t_grid, threads=config.threads, keep_states=True,
        )

        def task(replica):
            return [
                w2_empirical(EmpiricalCloud.from_state(state), draw(replica, index, n)).distance
                for index, state in enumerate(series.snapshots[replica])
            ]

        distances = np.array(run_replicas(task, config.replicas, config.threads))
        writer.add_replicas(SAMPLE_DISTANCE, n, series.t, distances)
        for eps in config.epsilon_list:
            metric = f"exceedance_eps_{eps:g}"
            epsilon_files[metric] = eps
            frequency = (distances >= eps).mean(axis=0)
            writer.add_series(metric, n, series.t, frequency)
            cells.extend((t, n, eps, value) for t, value in zip(series.t, frequency))
        logger.info("ConfidenceCurve N=%d: %d replicas, %d times", n, config.replicas, len(series.t))
    t, n, eps, frequency = (np.array(column) for column in zip(*cells))
    chi = _exact_rate(model) or 0.5
    fits = {
        'epsilon': epsilon_files,
        'envelope': _fit_or_reason(fit_confidence_envelope, t, n, eps, frequency, chi_guess=chi),
    }
    return fits, {}


def run_coupling_growth(config, writer, out):
    """Growth of the coupling gap E|Z - Z̄|^2 / N, fitted as exp(b t) per N."""
    model = config.model
    ensemble_size = config.ensemble_for(max(config.n_list))
    chi = _exact_rate(model)
    fits = {}
    totals = {}
    for n in config.n_list:
        series = simulate_coupled(
            model, n, config.horizon, config.dt, config.surrogate, config.seed,
            replicas=config.replicas, initial=config.initial.law(model.d), scheme=config.scheme,
            ensemble_size=ensemble_size, epsilon=config.epsilon, times=config.t_grid,
            threads=config.threads,
        )
        writer.add_replicas(COUPLING_GAP, n, series.t, series.per_replica[COUPLING_GAP])
        for name in (POSITION_MOMENT, VELOCITY_MOMENT, LYAPUNOV):
            writer.add_series(name, n, series.t, series.mean(name))
        gap = series.mean(COUPLING_GAP)
        # t = 0 is exactly 0 and has no logarithm
        started = gap > 0
        window = config.fit_window or (float(series.t[0]), float(series.t[-1]))
        growth = _fit_or_reason(fit_exponential_rate, series.t[started], gap[started], window)
        entry = {'gap': float(gap[-1]), 'total_gap': n * float(gap[-1])}
        if 'rate' in growth:
            entry.update(growth_rate=-growth['rate'], prefactor=growth['prefactor'],
                         r_squared=growth['r_squared'])
            if chi:
                entry['chaos_exponent'] = chaos_exponent(max(entry['growth_rate'], 0.0), chi)
        else:
            entry.update(growth)
        fits[str(n)] = entry
        totals[n] = entry['total_gap']
        logger.info("CouplingGrowth N=%d: %s", n, entry)
    positive = [value for value in totals.values() if value > 0]
    fits['uniform_ratio'] = max(positive) / min(positive) if positive else None
    return fits, {}


def _variance_with_error(samples):
    variance = float(samples.var(ddof=1))
    return variance, variance * float(np.sqrt(2.0 / (samples.size - 1)))


def run_equilibrium_marginal(config, writer, out):
    """Long-run sample variances of one-particle marginals against the equilibrium."""
    model = config.model
    velocity_prediction = model.sigma ** 2 / (2.0 * model.gamma)
    fits = {}
    position_prediction = None
    if model.is_quadratic:
        a, b = model.quadratic_coefficients()
        position_prediction = float(equilibrium_quadratic(a, b, model.gamma, model.sigma, model.d).cov[0, 0])
    if model.d == 1:
        density = _fixed_point(config)
        fits['fixed_point_variance'] = density.variance
        if not model.is_quadratic:
            position_prediction = density.variance
    fits['predicted_position_variance'] = position_prediction
    fits['predicted_velocity_variance'] = velocity_prediction
    for n in config.n_list:
        series = simulate_interacting(
            model, n, config.horizon, config.dt, config.seed, replicas=config.replicas,
            initial=config.initial.law(model.d), scheme=config.scheme, epsilon=config.epsilon,
            times=config.t_grid, threads=config.threads,
        )
        for name in (POSITION_MOMENT, VELOCITY_MOMENT, LYAPUNOV):
            writer.add_series(name, n, series.t, series.mean(name))
        x = np.concatenate([state.x.ravel() for state in series.final_states])
        y = np.concatenate([state.y.ravel() for state in series.final_states])
        position, position_error = _variance_with_error(x)
        velocity, velocity_error = _variance_with_error(y)
        fits[str(n)] = {
            'position_variance': position,
            'position_stderr': position_error,
            'velocity_variance': velocity,
            'velocity_stderr': velocity_error,
            'correlation': float(np.corrcoef(x, y)[0, 1]),
            'samples': int(x.size),
        }
        logger.info("EquilibriumMarginal N=%d: %s", n, fits[str(n)])
    return fits, {}


def run_rate_certificate(config, writer, out):
    report = rate_report(config.model, config.n_particles)
    payload = report.as_dict()
    path = write_json(Path(out) / 'rate_report.json', payload)
    logger.info("Rate certificate: chi_bound=%.6g chi_exact=%s", report.chi_bound, report.chi_exact)
    return payload, {'rate_report': str(path)}


def run_equilibrium_density(config, writer, out):
    density = _fixed_point(config)
    writer.add_series('fixed_point_residual', LIMIT_N, range(1, density.iterations + 1), density.history)
    samples = sample_equilibrium(density, config.model.gamma, config.model.sigma, SAMPLER_CHECK_SIZE,
                                 [config.seed, int(NoiseRole.EQUILIBRIUM_SAMPLES)])
    summary = {
        'mass': density.mass,
        'mean': density.mean,
        'variance': density.variance,
        'iterations': density.iterations,
        'residual': density.residual,
        'sampler_ks': float(kstest(samples.points[:, 0], density.cdf).statistic),
        'grid': {'lo': density.grid.lo, 'hi': density.grid.hi, 'points': density.grid.points},
    }
    files = {
        'density': str(write_density(out, density)),
        'equilibrium': str(write_json(Path(out) / 'equilibrium.json', summary)),
    }
    return summary, files


RUNNERS = {
    Kind.ENTROPY_DECAY: run_entropy_decay,
    Kind.CHAOS_SCALING: run_chaos_scaling,
    Kind.CONFIDENCE_CURVE: run_confidence_curve,
    Kind.COUPLING_GROWTH: run_coupling_growth,
    Kind.EQUILIBRIUM_MARGINAL: run_equilibrium_marginal,
    Kind.RATE_CERTIFICATE: run_rate_certificate,
    Kind.NONLINEAR_DECAY: run_nonlinear_decay,
    Kind.EQUILIBRIUM_DENSITY: run_equilibrium_density,
}


def run(config):
    """
    Execute one experiment, write its CSV series and manifest.json.

    Raises:
        ModelValidationError: the model does not support the experiment.
        NumericalFailure: a stepper blew up; the error names replica and step.
    """
    started = time.perf_counter()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("Running %s (seed %d) into %s", config.kind, config.seed, out)
    writer = SeriesWriter(out)
    fits, files = RUNNERS[Kind(config.kind)](config, writer, out)
    record = RunRecord(
        kind=str(config.kind),
        seed=config.seed,
        config=config.echo(),
        output_dir=str(out),
        series=writer.flush(),
        files=files,
        fits=to_jsonable(fits),
        wall_clock_seconds=time.perf_counter() - started,
    )
    record.manifest_path = str(write_json(out / 'manifest.json', record.manifest()))
    logger.info("%s finished in %.2f s, manifest %s", record.kind, record.wall_clock_seconds,
                record.manifest_path)
    return record
