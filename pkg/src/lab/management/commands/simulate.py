from lab.management.base import LabCommand


class Command(LabCommand):
    help = 'Run the experiment named by the kind key of the configuration'
