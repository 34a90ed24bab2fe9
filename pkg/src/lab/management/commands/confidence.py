from lab.management.base import LabCommand
from lab.models import ExperimentRun


class Command(LabCommand):
    help = 'Probability that the empirical measure is eps-far from equilibrium'
    kind = ExperimentRun.Kind.CONFIDENCE_CURVE
