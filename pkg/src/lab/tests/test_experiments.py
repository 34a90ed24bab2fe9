"""Tests for the experiment runners and their artifacts"""

import json
from pathlib import Path

import numpy as np
import pytest

from kinetics.dynamics import COUPLING_GAP
from kinetics.exceptions import NumericalFailure
from lab.experiments import RUNNERS, run
from lab.models import ExperimentRun
from lab.writers import AGGREGATE, read_series


def _quadratic(a, b, gamma=1.0, sigma=1.0, d=1):
    return {
        "d": d,
        "gamma": gamma,
        "sigma": sigma,
        "V": {"kind": "quadratic", "coefficient": a},
        "W": {"kind": "quadratic", "coefficient": b},
    }


def _aggregate(table, n=None):
    mask = table["replica"] == AGGREGATE
    if n is not None:
        mask &= table["N"] == n
    return table["t"][mask], table["value"][mask]


def test_every_kind_has_a_runner():
    assert set(RUNNERS) == set(ExperimentRun.Kind)


# RateCertificate Tests
def test_rate_certificate_unit_model(make_config):
    record = run(make_config("RateCertificate"))
    assert record.fits["chi_exact"] == 0.5
    assert 2.0e-63 <= record.fits["chi_bound"] <= 3.0e-63
    assert record.verify()
    payload = json.loads(Path(record.files["rate_report"]).read_text())
    assert payload["chi_prime"] == 0.125


def test_manifest_echoes_config(make_config):
    record = run(make_config("RateCertificate", seed=5))
    manifest = json.loads(Path(record.manifest_path).read_text())
    assert manifest["kind"] == "RateCertificate"
    assert manifest["seed"] == "5"
    assert manifest["config"]["model"]["gamma"] == 1.0
    assert manifest["version"] == record.version
    assert manifest["files"] == {"rate_report": "rate_report.json"}


# EntropyDecay Tests
def test_stationary_start_has_zero_entropy(make_config):
    config = make_config(
        "EntropyDecay",
        model=_quadratic(1.0, 0.0),
        initial={"var_x": 0.5, "var_y": 0.5},
        n_list=[2, 4],
        t_grid=list(np.linspace(0.0, 5.0, 11)),
    )
    record = run(config)
    table = read_series(record.series["relative_entropy"])
    assert np.all(np.abs(table["value"]) <= 1e-10)


def test_entropy_tail_rate_for_eight_particles(make_config):
    config = make_config(
        "EntropyDecay",
        model=_quadratic(1.0, 1.0),
        initial={"var_x": 4.0, "var_y": 0.5},
        n_list=[8],
        t_grid=list(np.linspace(0.0, 15.0, 151)),
        fit_window=[5.0, 15.0],
    )
    fit = run(config).fits["8"]["relative_entropy"]
    assert fit["rate"] >= 0.45
    assert fit["r_squared"] >= 0.99


@pytest.mark.parametrize("a,b,gamma,sigma", [
    (1.0, 1.0, 1.0, 1.0),
    (2.0, -0.5, 4.0, 1.0),
    (3.0, 1.0, 1.0, 0.5),
])
def test_entropy_decays_at_least_at_exact_rate(make_config, a, b, gamma, sigma):
    config = make_config(
        "EntropyDecay",
        model=_quadratic(a, b, gamma, sigma),
        initial={"var_x": 4.0, "var_y": 0.5},
        n_list=[4],
        t_grid=list(np.linspace(0.0, 15.0, 151)),
        fit_window=[5.0, 15.0],
    )
    fits = run(config).fits["4"]
    assert fits["relative_entropy"]["rate"] >= 0.9 * fits["chi_exact"]


def test_initial_entropy_per_particle_is_bounded(make_config):
    config = make_config("EntropyDecay", model=_quadratic(1.0, 1.0), initial={"var_x": 2.0},
                         n_list=[4, 16, 64], t_grid=[0.0, 1.0])
    record = run(config)
    values = [record.fits[str(n)]["initial_entropy_per_particle"] for n in (4, 16, 64)]
    assert max(values) <= 2 * min(values)


def test_entropy_stays_under_certified_envelope(make_config):
    config = make_config("EntropyDecay", model=_quadratic(1.0, 1.0), initial={"var_x": 4.0, "var_y": 0.5},
                         n_list=[4], t_grid=list(np.linspace(0.0, 5.0, 11)))
    record = run(config)
    _, entropy = _aggregate(read_series(record.series["relative_entropy"]))
    _, bound = _aggregate(read_series(record.series["relative_entropy_bound"]))
    assert bound[0] == pytest.approx(entropy[0])
    assert np.all(entropy <= bound * (1 + 1e-9) + 1e-12)
    assert record.fits["4"]["within_bound"]


def test_one_particle_marginal_approaches_limit_with_n(make_config):
    config = make_config("EntropyDecay", model=_quadratic(1.0, 1.0), initial={"var_x": 0.5, "var_y": 0.5},
                         n_list=[4, 16], t_grid=[0.0, 20.0])
    record = run(config)
    table = read_series(record.series["marginal_w2_to_limit"])
    small = _aggregate(table, 4)[1][-1]
    large = _aggregate(table, 16)[1][-1]
    assert 0 < large < small
    assert record.fits["16"]["marginal_w2_to_limit"] == pytest.approx(large)


# NonlinearDecay Tests
def test_nonlinear_decay_series(make_config):
    config = make_config("NonlinearDecay", n_list=[], t_grid=list(np.linspace(0.0, 10.0, 21)),
                         grid_points=256)
    record = run(config)
    t, l1 = _aggregate(read_series(record.series["l1_to_equilibrium"]))
    assert np.all((0.0 <= l1) & (l1 <= 2.0))
    assert l1[-1] < l1[0]
    assert record.fits["chi_prime"] == 0.125
    assert record.fits["l1_to_equilibrium"]["rate"] >= record.fits["chi_prime"]


# CouplingGrowth Tests
def test_coupling_gap_starts_at_zero(make_config, unit_model_config):
    config = make_config("CouplingGrowth", model=unit_model_config, n_list=[4, 8],
                         t_grid=list(np.linspace(0.0, 1.0, 11)), dt=0.01, replicas=4)
    record = run(config)
    table = read_series(record.series[COUPLING_GAP])
    assert np.all(table["value"][table["t"] == 0.0] == 0.0)
    assert np.isfinite(record.fits["8"]["growth_rate"])
    assert record.fits["8"]["total_gap"] == pytest.approx(8 * record.fits["8"]["gap"])
    assert record.verify()


# Thread-count independence
COULOMB_MODEL = {
    "V": {"kind": "quadratic", "coefficient": 1.0},
    "W": {"kind": "mollified_coulomb", "strength": 0.3, "mollifier": 1.0},
}

THREADED_RUNS = [
    ("CouplingGrowth", dict(n_list=[4], t_grid=[0.0, 0.1, 0.2], dt=0.01, replicas=5)),
    ("EntropyDecay", dict(n_list=[4, 8], t_grid=[0.0, 0.5, 1.0])),
    ("EquilibriumMarginal", dict(n_list=[4, 8], t_grid=[0.0, 0.1, 0.2], dt=0.01, replicas=5)),
    ("ConfidenceCurve", dict(n_list=[4], t_grid=[0.1, 0.2], dt=0.01, replicas=5, epsilon_list=[0.5])),
    # fewer replicas than threads: forces are split across the pool instead
    ("EquilibriumMarginal", dict(model=COULOMB_MODEL, n_list=[300], t_grid=[0.05], dt=0.01,
                                 replicas=2, grid_points=512)),
]


@pytest.mark.parametrize("kind,options", THREADED_RUNS)
def test_csv_bytes_do_not_depend_on_threads(make_config, unit_model_config, tmp_path, kind, options):
    options = {"model": unit_model_config, **options}
    outputs = []
    for threads in (1, 4):
        config = make_config(kind, threads=threads, output_dir=str(tmp_path / f"threads-{threads}"),
                             **options)
        record = run(config)
        outputs.append({metric: Path(path).read_bytes() for metric, path in record.series.items()})
    assert outputs[0] == outputs[1]
    assert outputs[0]


# ChaosScaling Tests
def test_chaos_scaling_small(make_config, unit_model_config):
    config = make_config("ChaosScaling", model=unit_model_config, n_list=[4, 8, 16],
                         t_grid=[0.5], dt=0.01, replicas=8)
    record = run(config)
    t, distances = _aggregate(read_series(record.series["w2_marginal"]))
    assert distances.shape == (3,)
    assert np.all(distances >= 0.0)
    assert np.all(t == 0.5)
    assert set(record.fits["w2_marginal"]) == {"4", "8", "16"}


# ConfidenceCurve Tests
def test_confidence_frequencies(make_config, unit_model_config):
    config = make_config("ConfidenceCurve", model=unit_model_config, n_list=[4, 16],
                         t_grid=[0.5, 1.0], dt=0.01, replicas=8, epsilon_list=[0.3, 0.6])
    record = run(config)
    low = read_series(record.series["exceedance_eps_0.3"])
    high = read_series(record.series["exceedance_eps_0.6"])
    assert np.all((0.0 <= low["value"]) & (low["value"] <= 1.0))
    assert np.all(high["value"] <= low["value"])
    assert record.fits["epsilon"] == {"exceedance_eps_0.3": 0.3, "exceedance_eps_0.6": 0.6}
    assert "envelope" in record.fits


def test_confidence_frequencies_do_not_grow_with_n(make_config, unit_model_config):
    replicas = 32
    config = make_config("ConfidenceCurve", model=unit_model_config, n_list=[4, 16, 64],
                         t_grid=[0.5, 1.0], dt=0.01, replicas=replicas, epsilon_list=[0.5])
    table = read_series(run(config).series["exceedance_eps_0.5"])
    for t in (0.5, 1.0):
        frequency = []
        for n in (4, 16, 64):
            times, values = _aggregate(table, n)
            frequency.append(values[times == t][0])
        for smaller, larger in zip(frequency, frequency[1:]):
            slack = 2 * np.sqrt(smaller * (1 - smaller) / replicas)
            assert larger <= smaller + slack


def test_confidence_with_fixed_point_samples(make_config):
    model = {"V": {"kind": "quadratic", "coefficient": 1.0},
             "W": {"kind": "mollified_coulomb", "strength": 0.3, "mollifier": 1.0}}
    config = make_config("ConfidenceCurve", model=model, n_list=[4], t_grid=[0.2],
                         dt=0.01, replicas=3, epsilon_list=[0.5], grid_points=512)
    table = read_series(run(config).series["w2_to_equilibrium_samples"])
    assert np.isfinite(table["value"]).all()


# EquilibriumMarginal and EquilibriumDensity Tests
def test_equilibrium_marginal_small(make_config, unit_model_config):
    config = make_config("EquilibriumMarginal", model=unit_model_config, n_list=[64],
                         t_grid=[5.0], dt=0.01, replicas=4)
    fits = run(config).fits
    assert fits["fixed_point_variance"] == pytest.approx(0.25, abs=1e-6)
    assert fits["predicted_position_variance"] == pytest.approx(0.25)
    assert fits["64"]["samples"] == 256
    assert abs(fits["64"]["velocity_variance"] - 0.5) < 0.2


def test_equilibrium_density_files(make_config):
    model = {"V": {"kind": "quadratic", "coefficient": 1.0},
             "W": {"kind": "mollified_coulomb", "strength": 0.3, "mollifier": 1.0}}
    record = run(make_config("EquilibriumDensity", model=model))
    table = read_series(record.files["density"])
    assert list(table) == ["x", "density"]
    h = table["x"][1] - table["x"][0]
    assert np.sum(table["density"]) * h == pytest.approx(1.0, abs=1e-10)
    assert record.fits["residual"] < 1e-9
    assert 0 < record.fits["sampler_ks"] < 2.0 / np.sqrt(4096)
    assert record.verify()


# Failures
def test_blow_up_names_replica(make_config, unit_model_config):
    config = make_config("EquilibriumMarginal", model=unit_model_config, n_list=[2],
                         t_grid=[5000.0], dt=10.0, replicas=2)
    with pytest.raises(NumericalFailure) as excinfo:
        with np.errstate(over="ignore", invalid="ignore"):
            run(config)
    assert excinfo.value.replica == 0


# Long reproductions
@pytest.mark.slow
def test_equilibrium_marginals_at_scale(make_config, unit_model_config):
    config = make_config("EquilibriumMarginal", model=unit_model_config, n_list=[512],
                         t_grid=[50.0], dt=1e-3, replicas=16, threads=4)
    fits = run(config).fits
    sample = fits["512"]
    assert abs(sample["velocity_variance"] - 0.5) <= 3 * sample["velocity_stderr"]
    assert abs(sample["position_variance"] - 0.25) <= 3 * sample["position_stderr"]
    assert fits["fixed_point_variance"] == pytest.approx(0.25, abs=1e-6)


@pytest.mark.slow
def test_chaos_scaling_slope(make_config, unit_model_config):
    config = make_config("ChaosScaling", model=unit_model_config,
                         n_list=[64, 128, 256, 512, 1024], t_grid=[2.0], dt=1e-3,
                         replicas=64, threads=4)
    fits = run(config).fits
    assert -0.7 <= fits["powerlaw"]["slope"] <= -0.3
    assert fits["w2_marginal"]["1024"] < fits["w2_marginal"]["64"]


@pytest.mark.slow
def test_coupling_gap_uniform_in_n(make_config, unit_model_config):
    config = make_config("CouplingGrowth", model=unit_model_config, n_list=[128, 256, 512],
                         t_grid=list(np.linspace(0.0, 5.0, 51)), dt=1e-3, replicas=16,
                         fit_window=[0.0, 5.0], threads=4)
    record = run(config)
    table = read_series(record.series[COUPLING_GAP])
    totals = []
    for n in (128, 256, 512):
        t, gap = _aggregate(table, n)
        totals.append(n * gap[np.argmin(np.abs(t - 3.0))])
    assert max(totals) <= 2 * min(totals)
    for n in ("128", "256", "512"):
        assert 0 < record.fits[n]["growth_rate"] < np.inf


@pytest.mark.slow
def test_chaos_scaling_is_reproducible_across_threads(make_config, unit_model_config, tmp_path):
    outputs = []
    for threads in (1, 4):
        config = make_config("ChaosScaling", model=unit_model_config, n_list=[64, 128, 256],
                             t_grid=[2.0], dt=1e-3, replicas=16, threads=threads,
                             output_dir=str(tmp_path / f"threads-{threads}"))
        record = run(config)
        outputs.append({metric: Path(path).read_bytes() for metric, path in record.series.items()})
    assert outputs[0] == outputs[1]
