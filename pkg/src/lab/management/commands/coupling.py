from lab.management.base import LabCommand
from lab.models import ExperimentRun


class Command(LabCommand):
    help = 'Growth of the synchronous coupling gap over time'
    kind = ExperimentRun.Kind.COUPLING_GROWTH
