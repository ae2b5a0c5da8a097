"""Acceptance criteria 1-9, each at its stated tolerance and runtime budget.

Every test records one ``PASS``/``FAIL`` line; the lines are printed in the
terminal summary of any pytest run that includes this file. Run alone with
``python3 -m pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from netcast import rng as rngmod
from netcast.cli import main as cli_main
from netcast.codec import shifted_encoding_error
from netcast.constants import photon_energy
from netcast.golden import run_golden
from netcast.model import predict_digital
from netcast.pipeline import crosstalk_accuracy_study, precision_test, readout_context, run_inference, simulate_dot
from netcast.receiver import DETECTOR_PRESETS, sample_windows, snspd_count_from_voltage, snspd_voltage_from_counts
from netcast.scenario import SCENARIO_PRESETS, Scenario

pytestmark = pytest.mark.acceptance

HV = photon_energy(1550e-9)
RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {detail}"
    print(RESULTS[n])


def grid(lo_exp: int, hi_exp: int, per_decade: int = 4) -> list[float]:
    k = np.arange(lo_exp * per_decade, hi_exp * per_decade + 1)
    return [float(v) for v in 10.0 ** (k / per_decade)]


# 1 ---------------------------------------------------------------------------


def test_criterion_1_golden_formulas():
    t = time.perf_counter()
    checks, ok = run_golden()
    elapsed = time.perf_counter() - t
    for c in checks:
        print(c.describe())
    failed = [c.describe() for c in checks if not c.passed]
    passed = ok and elapsed < 1.0
    detail = f"{len(checks) - len(failed)}/{len(checks)} golden values in tolerance, {elapsed * 1e3:.1f} ms"
    if failed:
        detail += "; failing: " + " | ".join(failed)
    record(1, passed, detail)
    assert passed, detail


# 2 ---------------------------------------------------------------------------


def test_criterion_2_precision():
    t = time.perf_counter()
    res = precision_test(10_000, SCENARIO_PRESETS["precision"])
    elapsed = time.perf_counter() - t
    ok = res.sigma_rms <= 0.006 and elapsed < 10
    record(2, ok, f"sigma_rms = {res.sigma_rms:.5f} (limit 0.006) over 10000 products, {elapsed:.2f} s")
    assert ok


# 3 ---------------------------------------------------------------------------


def test_criterion_3_noiseless_fidelity(reference_model, mnist_1000):
    t = time.perf_counter()
    rep = run_inference(reference_model, mnist_1000, SCENARIO_PRESETS["ideal"])
    elapsed = time.perf_counter() - t
    digital = predict_digital(reference_model, mnist_1000.images)
    match = float(np.mean(rep.predictions == digital))
    ok = match >= 0.998 and elapsed < 60
    record(3, ok, f"{100 * match:.1f}% of 1000 predictions match the digital model "
                  f"(optical accuracy {rep.accuracy:.3f}, recorded baseline "
                  f"{reference_model.metadata['baseline_accuracy_first_1000']:.3f}), {elapsed:.2f} s")
    assert ok


# 4 ---------------------------------------------------------------------------


def snspd_histogram(mean_counts: float, windows: int = 10_000, seed: int = 0):
    """Photon-count histogram of fixed-flux SNSPD windows, read back through the voltage ladder."""
    sc = SCENARIO_PRESETS["snspd"]
    det = sc.detector
    ctx = readout_context(sc, mean_counts)
    rng = rngmod.stream(seed, rngmod.HISTOGRAM, 0)
    sample = sample_windows(np.ones(windows), sc.window_macs, ctx, rng)
    dark_mean = det.dark_count_rate * sc.window_macs * sc.link.symbol_period
    raw = sample.value + dark_mean  # the sampler removes the known dark background
    counts = np.rint(raw).astype(np.int64)
    assert np.allclose(raw, counts, atol=1e-6)
    volts = snspd_voltage_from_counts(counts, det, jitter=0.1, rng=rng)
    read = snspd_count_from_voltage(volts, det)
    lam = mean_counts + dark_mean
    lo, hi = int(stats.poisson.ppf(1e-4, lam)), int(stats.poisson.ppf(1 - 1e-4, lam))
    ks = np.arange(lo, hi + 1)
    observed = np.array([np.sum(read <= lo)] + [np.sum(read == k) for k in ks[1:-1]] + [np.sum(read >= hi)])
    expected = np.concatenate([[stats.poisson.cdf(lo, lam)], stats.poisson.pmf(ks[1:-1], lam),
                               [stats.poisson.sf(hi - 1, lam)]]) * windows
    # merge sparse tail bins so every expected count is at least 5
    obs_m, exp_m, acc_o, acc_e = [], [], 0.0, 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            obs_m.append(acc_o)
            exp_m.append(acc_e)
            acc_o = acc_e = 0.0
    obs_m[-1] += acc_o
    exp_m[-1] += acc_e
    exp_m = np.array(exp_m) * windows / np.sum(exp_m)
    return stats.chisquare(obs_m, exp_m).pvalue, np.array_equal(read, counts)


def test_criterion_4_sub_photon(reference_model, mnist_1000):
    t = time.perf_counter()
    sc = SCENARIO_PRESETS["snspd"]
    assert sc.window_macs == 100 and sc.e_mac_target == pytest.approx(HV)
    base = run_inference(reference_model, mnist_1000, sc.noiseless()).accuracy
    one = run_inference(reference_model, mnist_1000, sc)
    tenth = run_inference(reference_model, mnist_1000, replace(sc, e_mac_target=0.1 * HV))
    p, exact_readback = snspd_histogram(100.0)
    elapsed = time.perf_counter() - t
    ok = (base - one.accuracy <= 0.05 and tenth.accuracy < one.accuracy and p > 0.01 and exact_readback
          and elapsed < 300)
    record(4, ok, f"SNSPD M=100: accuracy {one.accuracy:.3f} at 1 photon/MAC vs noiseless {base:.3f} "
                  f"(drop {100 * (base - one.accuracy):.1f} points, limit 5); {tenth.accuracy:.3f} at 0.1 "
                  f"photon/MAC; Poisson histogram p = {p:.3f} over 10^4 windows; {elapsed:.1f} s")
    assert ok


# 5 ---------------------------------------------------------------------------

LADDER = {
    "SNSPD": ("snspd", grid(-21, -12)),
    "TimeIntegrator-10pF": ("time-integrator", grid(-21, -12)),
    "APD430C": ("apd430c", grid(-21, -12)),
    "PDA10CS": ("pda10cs", grid(-21, -12)),
    "KoheronPD100": ("koheron", grid(-21, -12)),
}


def first_reaching(model, data, sc, energies, threshold=0.9):
    """Lowest grid energy whose accuracy reaches ``threshold`` (ascending scan, stops at the crossing)."""
    for e in energies:
        if run_inference(model, data, replace(sc, e_mac_target=e)).accuracy >= threshold:
            return e
    return math.inf


def test_criterion_5_detector_ladder(reference_model, mnist_1000):
    t = time.perf_counter()
    cross = {det: first_reaching(reference_model, mnist_1000, SCENARIO_PRESETS[preset], energies)
             for det, (preset, energies) in LADDER.items()}
    elapsed = time.perf_counter() - t
    amplified = (cross["PDA10CS"], cross["KoheronPD100"])
    ordering = cross["SNSPD"] < cross["TimeIntegrator-10pF"] < cross["APD430C"] < min(amplified)
    ti_below = cross["TimeIntegrator-10pF"] < 1e-16
    band = all(1e-14 <= e <= 1e-13 for e in amplified)
    ok = ordering and ti_below and band and elapsed < 600
    text = ", ".join(f"{k} {v:.2g}" for k, v in cross.items())
    record(5, ok, f"90% crossings (J/MAC, 4 points/decade): {text}; ordering {'ok' if ordering else 'violated'}; "
                  f"time integrator below 1e-16: {'yes' if ti_below else 'no'}; amplified receivers in "
                  f"[1e-14, 1e-13]: {'yes' if band else 'no'}; {elapsed:.0f} s")
    assert ok


# 6 ---------------------------------------------------------------------------


def snr_vs_m(sc: Scenario, ms=(1, 10, 100), trials=3000):
    """Empirical SNR of a window of M full-scale MACs, through the full dot-product pipeline."""
    out = []
    for m in ms:
        s = replace(sc, window_macs=m)
        ones = np.ones(m)
        vals = np.array([simulate_dot(ones, ones, s, rng=rngmod.stream(sc.seed, rngmod.SNR, m, k))
                         for k in range(trials)])
        out.append(vals.mean() / vals.std(ddof=1))
    slope = np.polyfit(np.log10(ms), np.log10(out), 1)[0]
    return slope, out


def test_criterion_6_integrator_snr_scaling():
    thermal = Scenario(detector=DETECTOR_PRESETS["TimeIntegrator-10pF"], noise_sources=("thermal",),
                       e_mac_target=1e-14, window_macs=1)
    shot = Scenario(detector=DETECTOR_PRESETS["TimeIntegrator-10pF-ideal"], noise_sources=("shot",),
                    e_mac_target=20 * HV, window_macs=1)
    s_th, snr_th = snr_vs_m(thermal)
    s_sh, snr_sh = snr_vs_m(shot)
    ok = abs(s_th - 1.0) <= 0.05 and abs(s_sh - 0.5) <= 0.05
    record(6, ok, f"log-log SNR slope vs M: thermal {s_th:.3f} (SNR {', '.join(f'{v:.3g}' for v in snr_th)}), "
                  f"shot {s_sh:.3f} (SNR {', '.join(f'{v:.3g}' for v in snr_sh)})")
    assert ok


# 7 ---------------------------------------------------------------------------


def test_criterion_7_dispersion(reference_model, mnist_1000):
    sc = SCENARIO_PRESETS["ideal"]
    base, pts = crosstalk_accuracy_study(reference_model, mnist_1000, [0.0, 0.05, 0.1, 0.4], sc)
    by = {p.chi: p for p in pts}
    zero_identical = (np.array_equal(by[0.0].report.predictions, base.predictions)
                      and np.array_equal(by[0.0].report.margins, base.margins))
    ok = by[0.05].drop <= 1.0 and by[0.1].drop <= 2.0 and zero_identical
    record(7, ok, f"accuracy drop {by[0.05].drop:.1f} points at chi=0.05 (limit 1), {by[0.1].drop:.1f} at "
                  f"chi=0.1 (limit 2), {by[0.4].drop:.1f} at chi=0.4; chi=0 bit-identical to no crosstalk: "
                  f"{'yes' if zero_identical else 'no'}")
    assert ok


# 8 ---------------------------------------------------------------------------


def test_criterion_8_fat_zero():
    rng = rngmod.stream(0, 8)
    n, eps = 100, 0.01
    x = np.where(rng.random(n) < 0.9, 0.0, rng.uniform(-1, 1, n))
    w = np.where(rng.random(n) < 0.9, 0.0, rng.uniform(-1, 1, n))
    a = shifted_encoding_error(x, w, eps, -1.0, -1.0)
    brute_unshifted = np.sum((x + eps) * (w + eps)) - np.sum(x * w)
    xt, wt = x + 1.0, w + 1.0
    brute_shifted = np.sum((xt + eps) * (wt + eps)) - np.sum(xt * wt)
    d_u, d_s = abs(a.unshifted_error - brute_unshifted), abs(a.shifted_error - brute_shifted)
    ok = abs(a.shifted_error) > abs(a.unshifted_error) and d_u <= 1e-12 and d_s <= 1e-12
    record(8, ok, f"shifted error {a.shifted_error:.6f} vs unshifted {a.unshifted_error:.6f}; "
                  f"brute-force differences {d_u:.1e}, {d_s:.1e}")
    assert ok


# 9 ---------------------------------------------------------------------------


def test_criterion_9_determinism(tmp_path, capsys):
    runs = {}
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        for cmd in (["infer", "--preset", "snspd", "--images", "300"],
                    ["sweep", "--preset", "time-integrator", "--grid", "3e-17,1e-16,3e-16", "--images", "300"]):
            assert cli_main(cmd + ["--threads", str(threads), "--seed", "11", "--out-dir", str(out / cmd[0])]) == 0
        runs[threads] = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*.csv"))}
    capsys.readouterr()
    same = runs[1].keys() == runs[8].keys() and all(runs[1][k] == runs[8][k] for k in runs[1])
    record(9, same, f"{len(runs[1])} primary CSVs byte-identical between 1 and 8 threads: {'yes' if same else 'no'}")
    assert same


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
