import math
from dataclasses import replace

import numpy as np
import pytest

from netcast import rng as rngmod
from netcast.errors import ConfigError, InvalidArgument
from netcast.model import Dataset, matvec_reference, predict_digital
from netcast.pipeline import (
    confusion_matrix,
    crosstalk_accuracy_study,
    first_crossing,
    photon_trace,
    precision_test,
    quantization_sigma,
    run_inference,
    simulate_dot,
    simulate_matvec,
    sweep_energy,
)
from netcast.receiver import DETECTOR_PRESETS
from netcast.scenario import SCENARIO_PRESETS, Scenario

IDEAL = SCENARIO_PRESETS["ideal"]
EXACT = replace(IDEAL, dac_bits=None)


def test_dot_examples(rng):
    assert simulate_dot(np.ones(100), np.ones(100), IDEAL) == pytest.approx(100.0, rel=1e-6)
    x = rng.random(100)
    assert simulate_dot(np.zeros(100), x, IDEAL) == 0.0
    noisy = Scenario(detector=DETECTOR_PRESETS["TimeIntegrator-10pF"], e_mac_target=1e-15)
    assert abs(simulate_dot(rng.random(100), np.zeros(100), noisy)) < 1.0
    with pytest.raises(InvalidArgument):
        simulate_dot(np.ones(3), np.ones(4), IDEAL)


def test_noiseless_unquantized_is_exact(rng):
    w = rng.normal(size=(37, 250))
    x = rng.normal(size=250)
    got = simulate_matvec(w, x, EXACT)
    assert np.allclose(got, matvec_reference(w, x), rtol=1e-9, atol=1e-9 * np.abs(w).max() * np.abs(x).max())
    u, v = rng.normal(size=333), rng.normal(size=333)
    assert simulate_dot(u, v, EXACT) == pytest.approx(float(u @ v), rel=1e-9)


def test_matvec_examples(rng):
    x = rng.random(10)
    assert np.allclose(simulate_matvec(np.eye(10), x, EXACT), x, rtol=1e-12)
    w = rng.normal(size=(100, 784))
    x = rng.random(784)
    sc = replace(EXACT, window_macs=16, n_wavelengths=16)
    assert np.allclose(simulate_matvec(w, x, sc), w @ x, rtol=1e-6, atol=1e-9)


def test_matvec_equals_per_row_dots(rng):
    w = rng.normal(size=(5, 40))
    x = rng.random(40)
    # without DAC rounding; quantized, the matrix shares one full scale across rows
    rows = [simulate_dot(w[r], x, EXACT) for r in range(5)]
    assert np.allclose(simulate_matvec(w, x, EXACT), rows, rtol=1e-12)


def test_shot_noise_matches_poisson_prediction(rng):
    # non-negative operands so only one pass runs; shot noise only
    w = rng.random((100, 784))
    x = rng.random(784)
    sc = Scenario(detector=DETECTOR_PRESETS["TimeIntegrator-10pF-ideal"], noise_sources=("shot",), dac_bits=None,
                  e_mac_target=100 * 1.2815e-19)
    kappa = sc.photons_per_mac
    trials = np.stack([simulate_matvec(w, x, sc, rng=rngmod.stream(5, t)) for t in range(40)])
    exact = w @ x
    w_scale, x_scale = np.abs(w).max(), np.abs(x).max()
    # variance of a decoded row: sum of products in full-scale units / kappa, rescaled
    predicted = np.sqrt((exact / (w_scale * x_scale)) / kappa) * w_scale * x_scale
    rel = (trials - exact).std(axis=0) / predicted
    assert rel.mean() == pytest.approx(1.0, abs=0.1)


def test_config_errors_before_sampling(rng):
    sc = Scenario(energy_reference="mean")
    from netcast.pipeline import photon_scale

    with pytest.raises(ConfigError):
        photon_scale(sc, None)


def test_confusion_columns_are_distributions(rng):
    pred = rng.integers(0, 10, 500)
    lab = rng.integers(0, 10, 500)
    c = confusion_matrix(pred, lab)
    assert np.allclose(c.sum(axis=0), 1.0, atol=1e-9)
    freq = np.bincount(lab, minlength=10) / lab.size
    assert float(np.sum(np.diag(c) * freq)) == pytest.approx(np.mean(pred == lab), abs=1e-12)


def test_noiseless_inference_matches_digital(reference_model, mnist_200):
    rep = run_inference(reference_model, mnist_200, IDEAL)
    digital = predict_digital(reference_model, mnist_200.images)
    assert np.mean(rep.predictions == digital) >= 0.998
    assert np.allclose(rep.confusion.sum(axis=0)[rep.confusion.sum(axis=0) > 0], 1.0, atol=1e-9)
    assert rep.noise_breakdown["total"] == 0.0


def test_zero_images_predict_bias_chain(reference_model):
    data = Dataset(np.zeros((3, 784)), np.zeros(3))
    rep = run_inference(reference_model, data, IDEAL)
    digital = predict_digital(reference_model, data.images)
    assert np.all(rep.predictions == digital)
    assert len(set(rep.predictions.tolist())) == 1


def test_inference_deterministic_and_thread_independent(reference_model, mnist_200):
    sc = SCENARIO_PRESETS["time-integrator"]
    a = run_inference(reference_model, mnist_200, sc, threads=1)
    b = run_inference(reference_model, mnist_200, sc, threads=4)
    assert np.array_equal(a.predictions, b.predictions)
    assert np.array_equal(a.margins, b.margins)
    assert a.noise_breakdown == b.noise_breakdown
    c = run_inference(reference_model, mnist_200, replace(sc, seed=1))
    assert not np.array_equal(a.margins, c.margins)


def test_noise_breakdown_closure(reference_model, mnist_200):
    sc = replace(SCENARIO_PRESETS["edfa"], link=replace(SCENARIO_PRESETS["edfa"].link, rin_db_per_hz=-150.0))
    rep = run_inference(reference_model, mnist_200.head(20), sc)
    parts = [rep.noise_breakdown[k] for k in ("thermal", "shot", "dark", "ase", "rin")]
    assert all(p > 0 for p in parts)
    assert rep.noise_breakdown["total"] == pytest.approx(sum(parts), rel=1e-9)


def test_high_photon_limit_recovers_noiseless(reference_model, mnist_1000):
    base = run_inference(reference_model, mnist_1000, IDEAL)
    bright = replace(SCENARIO_PRESETS["time-integrator"], e_mac_target=1e6 * 1.2815e-19)
    rep = run_inference(reference_model, mnist_1000, bright)
    assert abs(rep.accuracy - base.accuracy) <= 0.002


def test_deployed_fiber_matches_ideal(reference_model, mnist_200):
    ideal = run_inference(reference_model, mnist_200, IDEAL)
    fiber = run_inference(reference_model, mnist_200, replace(SCENARIO_PRESETS["deployed-86km"], e_mac_target=1e-13))
    # paired runs on the same images: difference within binomial noise
    sigma = math.sqrt(ideal.accuracy * (1 - ideal.accuracy) / len(mnist_200))
    assert abs(fiber.accuracy - ideal.accuracy) <= 3 * sigma + 1e-12


def test_sweep_monotone_and_crossing(reference_model, mnist_200):
    grid = [1e-17, 3e-17, 1e-16, 3e-16, 1e-15]
    pts = sweep_energy(reference_model, mnist_200, SCENARIO_PRESETS["time-integrator"], grid)
    accs = [p.accuracy for p in pts]
    for a, b in zip(accs, accs[1:]):
        tol = 3 * math.sqrt(max(a * (1 - a), b * (1 - b), 0.01) / len(mnist_200))
        assert b >= a - tol
    assert pts[2].photons_per_mac == pytest.approx(1e-16 / 1.2815e-19, rel=1e-3)
    assert first_crossing(pts, 0.9) in grid
    assert first_crossing(pts, 1.01) is None
    with pytest.raises(InvalidArgument):
        sweep_energy(reference_model, mnist_200, IDEAL, [1e-15, 1e-16])


def test_sweep_skip_and_callback(reference_model, mnist_200):
    seen = []
    sc = replace(SCENARIO_PRESETS["time-integrator"], trials=2)
    pts = sweep_energy(reference_model, mnist_200.head(20), sc, [1e-16, 1e-15], skip={(0, 1)},
                       on_point=lambda gi, p: seen.append((gi, p.trial)))
    assert seen == [(0, 0), (1, 0), (1, 1)]
    assert len(pts) == 3


def test_precision_examples():
    noiseless = replace(SCENARIO_PRESETS["precision"], noise_sources=(), dac_bits=None)
    assert precision_test(1000, noiseless).sigma_rms < 1e-6
    five = replace(noiseless, dac_bits=5)
    got = precision_test(20000, five).sigma_rms
    assert got == pytest.approx(quantization_sigma(5), rel=0.1)
    # scale check against the bare 2^-5/sqrt(12) step noise
    assert 0.5 < got / (2**-5 / math.sqrt(12)) < 1.5
    with pytest.raises(InvalidArgument):
        precision_test(999, noiseless)


def test_photon_trace_examples(rng):
    assert photon_trace(30, 0.0, rng).total_photons == 0
    totals = np.array([photon_trace(30, 0.5, rng).total_photons for _ in range(10_000)])
    assert totals.mean() == pytest.approx(15, abs=3 * math.sqrt(15 / totals.size))
    # variance of the sample variance for Poisson(15)
    assert abs(totals.var() - totals.mean()) < 3 * math.sqrt((15 + 2 * 15**2) / totals.size)
    assert math.sqrt(15) == pytest.approx(3.9, abs=0.05)


def test_crosstalk_zero_identical_to_disabled(reference_model, mnist_200):
    sc = SCENARIO_PRESETS["time-integrator"]
    base, pts = crosstalk_accuracy_study(reference_model, mnist_200, [0.0, 0.4], sc)
    assert np.array_equal(pts[0].report.predictions, base.predictions)
    assert np.array_equal(pts[0].report.margins, base.margins)
    with pytest.raises(InvalidArgument):
        crosstalk_accuracy_study(reference_model, mnist_200, [0.6], sc)


def test_amplified_scenarios_run(reference_model, mnist_200):
    for name in ("pda10cs", "koheron", "apd430c", "snspd", "edfa"):
        rep = run_inference(reference_model, mnist_200.head(30), SCENARIO_PRESETS[name])
        assert 0 <= rep.accuracy <= 1
        assert rep.photon_stats["readouts"] > 0


def test_adc_quantization_path(reference_model, mnist_200):
    rep = run_inference(reference_model, mnist_200, replace(IDEAL, adc_bits=12))
    digital = predict_digital(reference_model, mnist_200.images)
    assert np.mean(rep.predictions == digital) >= 0.98
