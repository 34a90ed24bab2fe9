"""
Serializers for experiment configuration, run records and rate reports.

ExperimentConfigSerializer is the schema of a config document; the CLI and
the HTTP endpoints validate through it.
"""

from collections.abc import Mapping

from django.conf import settings
from rest_framework import serializers

from kinetics.dynamics import Scheme, SurrogateKind
from kinetics.exceptions import ModelValidationError
from kinetics.potentials import build_model, potential_from_dict

from .models import ExperimentRun

QUADRATIC_ONLY = {
    ExperimentRun.Kind.ENTROPY_DECAY,
    ExperimentRun.Kind.NONLINEAR_DECAY,
}
ONE_DIMENSIONAL = {
    ExperimentRun.Kind.NONLINEAR_DECAY,
    ExperimentRun.Kind.EQUILIBRIUM_DENSITY,
}
NEEDS_PARTICLES = {
    ExperimentRun.Kind.ENTROPY_DECAY,
    ExperimentRun.Kind.CHAOS_SCALING,
    ExperimentRun.Kind.CONFIDENCE_CURVE,
    ExperimentRun.Kind.COUPLING_GROWTH,
    ExperimentRun.Kind.EQUILIBRIUM_MARGINAL,
}
NEEDS_TIMES = NEEDS_PARTICLES | {ExperimentRun.Kind.NONLINEAR_DECAY}
MAX_SEED = 2 ** 64 - 1


def positive(value):
    if not value > 0:
        raise serializers.ValidationError("Must be > 0.")


def _strictly_increasing(values, name):
    if any(b <= a for a, b in zip(values, values[1:])):
        raise serializers.ValidationError(f"{name} must be sorted ascending without repeats.")
    return values


class PotentialSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=['quadratic', 'mollified_coulomb'])
    coefficient = serializers.FloatField(required=False)
    strength = serializers.FloatField(required=False)
    mollifier = serializers.FloatField(required=False, validators=[positive])

    def validate(self, attrs):
        needed = ['coefficient'] if attrs['kind'] == 'quadratic' else ['strength', 'mollifier']
        missing = [name for name in needed if name not in attrs]
        if missing:
            raise serializers.ValidationError({name: "This field is required." for name in missing})
        return {'kind': attrs['kind'], **{name: attrs[name] for name in needed}}


def _unit_quadratic():
    return {'kind': 'quadratic', 'coefficient': 1.0}


class ModelConfigSerializer(serializers.Serializer):
    """Model parameters; every field defaults to the unit quadratic model."""

    d = serializers.IntegerField(min_value=1, default=1)
    gamma = serializers.FloatField(default=1.0, validators=[positive])
    sigma = serializers.FloatField(default=1.0, validators=[positive])
    V = PotentialSerializer(default=_unit_quadratic)
    W = PotentialSerializer(default=_unit_quadratic)

    def validate(self, attrs):
        try:
            build_model(attrs['d'], attrs['gamma'], attrs['sigma'],
                        potential_from_dict(attrs['V']), potential_from_dict(attrs['W']))
        except ModelValidationError as error:
            raise serializers.ValidationError(str(error)) from error
        return attrs


def _default_initial():
    return {'mean_x': 0.0, 'mean_y': 0.0, 'var_x': 1.0, 'var_y': 1.0}


class InitialLawSerializer(serializers.Serializer):
    """Isotropic Gaussian start law, one particle."""

    mean_x = serializers.FloatField(default=0.0)
    mean_y = serializers.FloatField(default=0.0)
    var_x = serializers.FloatField(default=1.0, validators=[positive])
    var_y = serializers.FloatField(default=1.0, validators=[positive])


class ExperimentConfigSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=ExperimentRun.Kind.choices)
    seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED,
                                    default=lambda: settings.LAB_DEFAULT_SEED)
    output_dir = serializers.CharField(required=False, allow_blank=False)
    model = ModelConfigSerializer()
    initial = InitialLawSerializer(default=_default_initial)
    n_list = serializers.ListField(child=serializers.IntegerField(min_value=1), default=list)
    t_grid = serializers.ListField(child=serializers.FloatField(min_value=0.0), default=list)
    dt = serializers.FloatField(default=lambda: settings.LAB_DEFAULT_DT, validators=[positive])
    replicas = serializers.IntegerField(min_value=1, default=lambda: settings.LAB_DEFAULT_REPLICAS)
    surrogate = serializers.ChoiceField(choices=[kind.value for kind in SurrogateKind],
                                        required=False, allow_null=True, default=None)
    ensemble_size = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    epsilon_list = serializers.ListField(child=serializers.FloatField(validators=[positive]), default=list)
    scheme = serializers.ChoiceField(choices=[scheme.value for scheme in Scheme], default=Scheme.EULER.value)
    fit_window = serializers.ListField(child=serializers.FloatField(min_value=0.0),
                                       min_length=2, max_length=2, required=False, allow_null=True,
                                       default=None)
    threads = serializers.IntegerField(min_value=1, default=lambda: settings.LAB_THREADS)
    n_particles = serializers.IntegerField(min_value=1, default=2)
    flow_dt = serializers.FloatField(default=0.01, validators=[positive])
    lyapunov_epsilon = serializers.FloatField(required=False, allow_null=True, default=None,
                                              validators=[positive])
    grid_points = serializers.IntegerField(min_value=16, required=False, allow_null=True, default=None)
    grid_span = serializers.FloatField(required=False, allow_null=True, default=None, validators=[positive])
    tolerance = serializers.FloatField(default=1e-9, validators=[positive])
    damping = serializers.FloatField(default=0.5, validators=[positive])

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            data = {'model': {}, **data}
        return super().to_internal_value(data)

    def validate_n_list(self, value):
        return _strictly_increasing(value, 'n_list')

    def validate_t_grid(self, value):
        return _strictly_increasing(value, 't_grid')

    def validate_epsilon_list(self, value):
        return _strictly_increasing(value, 'epsilon_list')

    def validate_damping(self, value):
        if value > 1:
            raise serializers.ValidationError("Damping must lie in (0, 1].")
        return value

    def validate(self, attrs):
        kind = attrs['kind']
        model = attrs['model']
        quadratic = model['V']['kind'] == model['W']['kind'] == 'quadratic'
        errors = {}
        if kind in QUADRATIC_ONLY and not quadratic:
            errors['model'] = f"{kind} requires quadratic V and W."
        if kind in ONE_DIMENSIONAL and model['d'] != 1:
            errors['model'] = f"{kind} supports d = 1 only."
        if kind in NEEDS_PARTICLES and not attrs['n_list']:
            errors['n_list'] = f"{kind} needs at least one particle count."
        if kind in NEEDS_TIMES and not attrs['t_grid']:
            errors['t_grid'] = f"{kind} needs a time grid."
        if kind == ExperimentRun.Kind.CONFIDENCE_CURVE:
            if not attrs['epsilon_list']:
                errors['epsilon_list'] = "ConfidenceCurve needs at least one epsilon."
            if not quadratic and model['d'] != 1:
                errors['model'] = "Non-quadratic ConfidenceCurve needs d = 1 for equilibrium samples."
        if kind == ExperimentRun.Kind.EQUILIBRIUM_MARGINAL:
            if not quadratic and model['d'] != 1:
                errors['model'] = "Non-quadratic EquilibriumMarginal needs d = 1 for the prediction."
        window = attrs.get('fit_window')
        if window is not None and window[1] <= window[0]:
            errors['fit_window'] = "fit_window must be [start, stop] with start < stop."
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class RateRequestSerializer(ModelConfigSerializer):
    n_particles = serializers.IntegerField(min_value=1, default=2)


class SpectralValueSerializer(serializers.Serializer):
    real = serializers.FloatField()
    imag = serializers.FloatField()
    multiplicity = serializers.IntegerField()


class RateReportSerializer(serializers.Serializer):
    chi_bound = serializers.FloatField()
    log_chi_bound = serializers.FloatField()
    eta = serializers.FloatField()
    kappa = serializers.FloatField()
    log_kappa = serializers.FloatField()
    chi_exact = serializers.FloatField(allow_null=True)
    chi_prime = serializers.FloatField(allow_null=True)
    spectrum = SpectralValueSerializer(many=True)
    gap = serializers.FloatField(allow_null=True)
    critical = serializers.BooleanField()
    n_particles = serializers.IntegerField(allow_null=True)


class ExperimentRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = ExperimentRun
        fields = [
            "id",
            "kind",
            "seed",
            "status",
            "config",
            "series",
            "files",
            "fits",
            "output_dir",
            "manifest_path",
            "wall_clock_seconds",
            "version",
            "error",
            "created_at",
        ]
        read_only_fields = fields
