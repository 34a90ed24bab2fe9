from django.db import models


class ExperimentRun(models.Model):
    """A finished (or failed) experiment and where its artifacts live."""

    class Kind(models.TextChoices):
        ENTROPY_DECAY = 'EntropyDecay', 'Entropy decay'
        CHAOS_SCALING = 'ChaosScaling', 'Chaos scaling'
        CONFIDENCE_CURVE = 'ConfidenceCurve', 'Confidence curve'
        COUPLING_GROWTH = 'CouplingGrowth', 'Coupling growth'
        EQUILIBRIUM_MARGINAL = 'EquilibriumMarginal', 'Equilibrium marginal'
        RATE_CERTIFICATE = 'RateCertificate', 'Rate certificate'
        NONLINEAR_DECAY = 'NonlinearDecay', 'Nonlinear decay'
        EQUILIBRIUM_DENSITY = 'EquilibriumDensity', 'Equilibrium density'

    class Status(models.TextChoices):
        COMPLETED = 'completed', 'Completed'
        FAILED = 'failed', 'Failed'

    kind = models.CharField(max_length=40, choices=Kind.choices, db_index=True)
    # u64 seeds overflow a signed BigIntegerField
    seed = models.CharField(max_length=20)
    config = models.JSONField(default=dict)
    series = models.JSONField(default=dict, help_text="Metric name to CSV path")
    files = models.JSONField(default=dict, blank=True)
    fits = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500)
    manifest_path = models.CharField(max_length=500, blank=True)
    wall_clock_seconds = models.FloatField(default=0.0)
    version = models.CharField(max_length=40)
    status = models.CharField(max_length=20, choices=Status.choices, default=Status.COMPLETED)
    error = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    @classmethod
    def from_record(cls, record):
        return cls.objects.create(
            kind=record.kind,
            seed=str(record.seed),
            config=record.config,
            series=record.series,
            files=record.files,
            fits=record.fits,
            output_dir=record.output_dir,
            manifest_path=record.manifest_path,
            wall_clock_seconds=record.wall_clock_seconds,
            version=record.version,
        )

    @classmethod
    def failed(cls, config, error, version):
        return cls.objects.create(
            kind=str(config.kind),
            seed=str(config.seed),
            config=config.echo(),
            output_dir=str(config.output_dir),
            version=version,
            status=cls.Status.FAILED,
            error=str(error),
        )

    def __str__(self):
        return f"{self.kind} (seed {self.seed})"
