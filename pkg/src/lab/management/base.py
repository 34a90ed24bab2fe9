"""
Shared plumbing for the experiment management commands.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import json
import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from kinetics.exceptions import ModelValidationError, NumericalFailure
from lab import __version__
from lab.configuration import ConfigurationError, describe_errors, load_config
from lab.experiments import run
from lab.models import ExperimentRun

logger = logging.getLogger(__name__)

CONFIG_ERROR = 2
NUMERICAL_FAILURE = 3


class LabCommand(BaseCommand):
    """Runs one experiment kind; ``kind = None`` takes it from the document."""

    kind = None

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            help='Configuration document (flat key = value text or JSON)'
        )
        parser.add_argument(
            '--seed',
            type=int,
            help='Root seed, overrides the document'
        )
        parser.add_argument(
            '--out',
            type=str,
            help='Output directory, overrides the document'
        )
        parser.add_argument(
            '--threads',
            type=int,
            help='Worker threads for replicas'
        )
        parser.add_argument(
            '--no-record',
            action='store_true',
            help='Do not store the run in the database'
        )

    def load(self, options):
        overrides = {
            'seed': options.get('seed'),
            'output_dir': options.get('out'),
            'threads': options.get('threads'),
        }
        try:
            return load_config(options.get('config'), kind=self.kind, overrides=overrides)
        except ValidationError as error:
            lines = describe_errors(error.detail)
            raise CommandError('Invalid configuration:\n  ' + '\n  '.join(lines), returncode=CONFIG_ERROR)
        except (ConfigurationError, ModelValidationError) as error:
            raise CommandError(f"Invalid configuration: {error}", returncode=CONFIG_ERROR)

    def handle(self, *args, **options):
        config = self.load(options)
        try:
            record = run(config)
        except NumericalFailure as error:
            logger.error("%s failed: %s", config.kind, error)
            if not options.get('no_record'):
                ExperimentRun.failed(config, error, __version__)
            raise CommandError(f"Numerical failure: {error}", returncode=NUMERICAL_FAILURE)
        except ModelValidationError as error:
            raise CommandError(f"Invalid configuration: {error}", returncode=CONFIG_ERROR)

        if not options.get('no_record'):
            ExperimentRun.from_record(record)
        self.report(record)

    def report(self, record):
        self.stdout.write(self.style.SUCCESS(
            f"✓ {record.kind} finished in {record.wall_clock_seconds:.2f} s"
        ))
        self.stdout.write(f"  Output:   {record.output_dir}")
        self.stdout.write(f"  Manifest: {record.manifest_path}")
        for metric, path in sorted(record.series.items()):
            self.stdout.write(f"  {metric}: {path}")
        self.stdout.write(json.dumps(record.fits, indent=2, sort_keys=True))
