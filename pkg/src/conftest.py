import os
import django
import pytest

# Configure Django settings for pytest
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings')
django.setup()


def pytest_addoption(parser):
    """Add custom pytest command line options"""
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run long Monte Carlo reproductions (minutes each)"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
