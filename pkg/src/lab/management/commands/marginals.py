from lab.management.base import LabCommand
from lab.models import ExperimentRun


class Command(LabCommand):
    help = 'Long-run one-particle variances of the particle system against the equilibrium prediction'
    kind = ExperimentRun.Kind.EQUILIBRIUM_MARGINAL
