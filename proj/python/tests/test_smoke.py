"""Smoke tests for the pybind11 surface: shapes, a few exact values, and one
tiny end-to-end run through the config pipeline."""

import json
import math

import numpy as np
import pytest

import tdba


def test_gauss_hermite_three_points():
    nodes, weights = tdba.gauss_hermite(3)
    assert np.allclose(nodes, [-math.sqrt(3.0), 0.0, math.sqrt(3.0)])
    assert np.allclose(weights, [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])


def test_sparse_grid_counts_and_weights():
    nodes, weights = tdba.sparse_grid(10, 2)
    assert nodes.shape == (21, 10)
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    nodes5, _ = tdba.sparse_grid(5, 5)
    assert nodes5.shape[0] == 781


def test_basis_terms_count():
    terms = tdba.basis_terms(3, 5)
    assert terms.shape == (56, 3)
    assert terms[0].tolist() == [0, 0, 0]
    assert terms.sum(axis=1).max() == 5


def test_hermite_values():
    assert tdba.hermite(0, 1.7) == 1.0
    assert tdba.hermite(1, 1.7) == pytest.approx(1.7, abs=1e-15)
    # h2(x) = (x^2 - 1)/sqrt(2)
    assert tdba.hermite(2, 2.0) == pytest.approx(3.0 / math.sqrt(2.0), abs=1e-14)


def test_lognormal_params_literals():
    log_mean, log_std = tdba.lognormal_params(0.5, 0.25)
    assert log_std**2 == pytest.approx(math.log(1.25), abs=1e-15)
    assert log_mean == pytest.approx(math.log(0.5) - 0.5 * math.log(1.25), abs=1e-15)


def test_kl_expansion_orthonormal_and_trace():
    points = np.linspace(0.0, 1.0, 101)
    kl = tdba.kl_expansion(0.3, 0.2, points, 101)
    # Full spectrum reproduces the covariance trace: sum(lambda) = variance * L.
    assert kl.eigenvalues.sum() == pytest.approx(0.3, abs=1e-12)
    assert kl.dimension == 101
    xi = np.zeros(101)
    assert np.allclose(kl.gaussian(xi), 0.0)
    batch = kl.lognormal_batch(np.zeros((4, 101)))
    assert batch.shape == (4, 101)
    assert np.allclose(batch, 1.0)


def test_solve_linear_decay_rate():
    n = 201
    points = np.linspace(0.0, 1.0, n)
    initial = np.sin(math.pi * points)
    times, states = tdba.solve_linear_diffusion(
        points, np.ones(n), initial, 0.0, 0.0, 1e-4, 0.1, [0.1]
    )
    assert times[0] == pytest.approx(0.1, abs=1e-12)
    exact = math.exp(-math.pi**2 * 0.1) * initial
    assert np.abs(states[0] - exact).max() < 2e-3


def test_solve_richards_bounds():
    n = 101
    points = np.linspace(0.0, 10.0, n)
    initial = -0.035 * points
    times, states = tdba.solve_richards(
        points, np.full(n, 0.05), initial, 0.0, -0.35, 0.05, 1.0, [0.5, 1.0]
    )
    assert len(times) == 2
    assert np.isfinite(states).all()
    assert states.min() >= -0.351
    assert states.max() <= 1e-9


def test_kde_integrates_to_one():
    rng = np.random.default_rng(11)
    abscissae, density = tdba.kde(rng.normal(1.0, 0.5, size=4000))
    mass = np.trapezoid(density, abscissae)
    assert mass == pytest.approx(1.0, abs=5e-3)


def test_run_and_compare_tiny_config(tmp_path):
    config = tmp_path / "tiny.cfg"
    out_ref = tmp_path / "ref"
    config.write_text(
        "kind = linear\n"
        "d = 2\n"
        "r = 2\n"
        "subdomains = 2\n"
        "grid_points = 21\n"
        "dt = 0.005\n"
        "t_end = 0.02\n"
        "output_times = 0.01, 0.02\n"
        "level_reference = 4\n"
        "level_linear = 2\n"
        "level_reduced = 4\n"
        "n_samples = 200\n"
        f"output_dir = {out_ref}\n"
    )
    manifest = tdba.run(str(config))
    assert manifest["counts"]["reference_solves"] == 29
    assert (out_ref / "manifest.json").exists()
    assert (out_ref / "mean.csv").exists()
    on_disk = json.loads((out_ref / "manifest.json").read_text())
    assert on_disk["counts"] == manifest["counts"]

    config_td = tmp_path / "tiny_td.cfg"
    out_td = tmp_path / "td"
    config_td.write_text(
        config.read_text().replace(str(out_ref), str(out_td))
        + "method = time_dependent\n"
        + f"reference_manifest = {out_ref / 'manifest.json'}\n"
    )
    manifest_td = tdba.run(str(config_td))
    assert manifest_td["counts"]["subdomain_realization_solves"] == 2 * 29
    assert "max_abs_std_error" in manifest_td["metrics"]

    rc, report = tdba.compare(
        str(out_ref / "manifest.json"), str(out_td / "manifest.json")
    )
    assert rc == 0
    assert "rel_l2_mean" in report


def test_bad_config_raises(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("kind = linear\nr = 4\nd = 2\n")
    with pytest.raises(ValueError):
        tdba.run(str(config))
