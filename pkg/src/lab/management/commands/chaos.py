from lab.management.base import LabCommand
from lab.models import ExperimentRun


class Command(LabCommand):
    help = 'W2 between interacting and nonlinear one-particle marginals against N'
    kind = ExperimentRun.Kind.CHAOS_SCALING
