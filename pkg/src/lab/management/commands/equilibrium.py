from lab.management.base import LabCommand
from lab.models import ExperimentRun


class Command(LabCommand):
    help = 'Solve the one-dimensional self-consistent equilibrium density'
    kind = ExperimentRun.Kind.EQUILIBRIUM_DENSITY
