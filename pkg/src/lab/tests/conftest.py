"""
Fixtures for lab tests
"""

import pytest

from lab.configuration import load_config


@pytest.fixture(autouse=True)
def lab_output(settings, tmp_path):
    """Runs without an explicit output_dir land in a temporary directory."""
    settings.LAB_OUTPUT_DIR = str(tmp_path / "runs")
    return tmp_path / "runs"


@pytest.fixture
def make_config(tmp_path):
    """Validated ExperimentConfig from a plain mapping, written under tmp_path."""

    def make(kind, **data):
        data.setdefault("output_dir", str(tmp_path / kind))
        return load_config(data={"kind": kind, **data})

    return make


UNIT_MODEL = {
    "d": 1,
    "gamma": 1.0,
    "sigma": 1.0,
    "V": {"kind": "quadratic", "coefficient": 1.0},
    "W": {"kind": "quadratic", "coefficient": 1.0},
}


@pytest.fixture
def unit_model_config():
    return dict(UNIT_MODEL)
