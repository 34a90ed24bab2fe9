from lab.management.base import LabCommand
from lab.models import ExperimentRun


class Command(LabCommand):
    help = 'Convergence of the nonlinear Gaussian flow to equilibrium (d = 1)'
    kind = ExperimentRun.Kind.NONLINEAR_DECAY
