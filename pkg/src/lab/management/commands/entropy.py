from lab.management.base import LabCommand
from lab.models import ExperimentRun


class Command(LabCommand):
    help = 'Relative entropy of the quadratic particle system to its Gibbs law'
    kind = ExperimentRun.Kind.ENTROPY_DECAY
