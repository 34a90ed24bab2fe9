"""
Print the rate certificate of a model as JSON.

Run: python manage.py rates --config model.cfg
"""

import json

from lab.management.base import LabCommand
from lab.models import ExperimentRun


class Command(LabCommand):
    help = 'Explicit and spectral convergence rates of a model, printed as JSON'
    kind = ExperimentRun.Kind.RATE_CERTIFICATE

    def report(self, record):
        self.stdout.write(json.dumps(record.fits, indent=2, sort_keys=True))
