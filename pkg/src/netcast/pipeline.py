"""End-to-end optical simulation: dot products, matrix-vector products, inference and sweeps.

Signal path for every readout window:
split signs -> normalize and DAC-quantize -> weight stream crosstalk ->
window sums of products (noiseless, full-scale MAC units) -> photon scale ->
detector noise -> decode -> sum windows and sign passes -> digital rescale.

Noise is drawn per (trial, image, layer, wavelength batch) from its own
counter-based stream, so results are identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from netcast import rng as rngmod
from netcast.channel import apply_temporal_crosstalk, edfa_output, rin_from_dbc
from netcast.codec import decode_reading, identity_calibration, quantize_unit, split_signed
from netcast.constants import photon_energy
from netcast.errors import ConfigError, InvalidArgument
from netcast.model import Dataset, Model, chunk_columns, layer_inputs_digital
from netcast.receiver import NOISE_SOURCES, ReadoutContext, sample_windows
from netcast.scenario import Scenario

# (weight sign, input sign, contribution sign) for the four non-negative passes
PASSES = ((0, 0, 1.0), (1, 0, -1.0), (0, 1, -1.0), (1, 1, 1.0))


@dataclass(frozen=True)
class EncodedOperands:
    """Normalized, quantized, sign-split operands of one layer."""

    weights: tuple[np.ndarray, np.ndarray]  # (+, -) parts after channel crosstalk, rows x cols
    inputs: tuple[np.ndarray, np.ndarray]  # (+, -) parts, images x cols
    w_scale: float
    x_scale: float


def encode_operands(w, x, sc: Scenario, x_scale: float | None = None, chi: float | None = None) -> EncodedOperands:
    """Normalize by max |w| and ``x_scale`` (default max |x|), quantize, split signs.

    Inputs beyond ``x_scale`` are clipped to full scale, as a DAC would.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    w_scale = float(np.max(np.abs(w))) or 1.0
    if x_scale is None:
        x_scale = float(np.max(np.abs(x))) or 1.0
    ws = split_signed(w / w_scale)
    xs = split_signed(np.clip(x / x_scale, -1.0, 1.0))
    chi = sc.link.chi() if chi is None else chi
    weights = tuple(apply_temporal_crosstalk(quantize_unit(p, sc.dac_bits), chi, axis=1) if chi > 0
                    else quantize_unit(p, sc.dac_bits) for p in (ws.positive, ws.negative))
    inputs = tuple(quantize_unit(p, sc.dac_bits) for p in (xs.positive, xs.negative))
    return EncodedOperands(weights, inputs, w_scale, float(x_scale))


def _windowed(a: np.ndarray, m: int) -> np.ndarray:
    """Zero-pad the last axis to a multiple of ``m`` and fold it into (windows, m)."""
    cols = a.shape[-1]
    k = -(-cols // m)
    pad = k * m - cols
    if pad:
        a = np.concatenate([a, np.zeros(a.shape[:-1] + (pad,))], axis=-1)
    return a.reshape(a.shape[:-1] + (k, m))


@dataclass(frozen=True)
class WindowSignals:
    passes: tuple[tuple[float, int, int], ...]  # (sign, w part, x part) actually executed
    signal: np.ndarray  # passes x images x rows x windows
    sum_squares: np.ndarray | None
    n_symbols: np.ndarray  # windows


def window_signals(ops: EncodedOperands, m: int, need_squares: bool = False) -> WindowSignals:
    cols = ops.weights[0].shape[1]
    plan = chunk_columns(cols, m)
    n_sym = np.array(plan.widths(), dtype=np.float64)
    active = [(s, wi, xi) for wi, xi, s in PASSES if ops.weights[wi].any() and ops.inputs[xi].any()]
    if not active:
        active = [(1.0, 0, 0)]
    wins = [_windowed(ops.weights[wi], m) for _, wi, _ in active]
    xins = [_windowed(ops.inputs[xi], m) for _, _, xi in active]
    signal = np.stack([np.einsum("rkm,ikm->irk", w, x) for w, x in zip(wins, xins)])
    sq = None
    if need_squares:
        sq = np.stack([np.einsum("rkm,ikm->irk", w * w, x * x) for w, x in zip(wins, xins)])
    return WindowSignals(tuple(active), signal, sq, n_sym)


def photon_scale(sc: Scenario, mean_product: float | None = None) -> float:
    """Mean detected photons for one full-scale MAC."""
    photons = sc.photons_per_mac * sc.detector.eta
    coupling = getattr(sc.detector, "coupling_efficiency", 1.0)
    photons *= coupling
    if sc.energy_reference == "mean":
        if mean_product is None or mean_product <= 0:
            raise ConfigError("mean energy reference needs a positive mean operand product", "run.energy_reference")
        photons /= mean_product
    return photons


def mean_logical_product(w, x, w_scale: float, x_scale: float) -> float:
    """Mean |w_hat||x_hat| per logical MAC over rows, columns and images."""
    aw = np.abs(np.asarray(w)) / w_scale
    ax = np.clip(np.abs(np.atleast_2d(x)) / x_scale, 0.0, 1.0)
    rows, cols = aw.shape
    return float((ax @ aw.T).sum() / (rows * cols * ax.shape[0]))


def readout_context(sc: Scenario, photons_per_unit: float) -> ReadoutContext:
    link = sc.link
    hv = photon_energy(link.wavelength)
    ase = 0.0
    modes = 1.0
    if sc.amplifier is not None:
        p_ase = edfa_output(0.0, sc.amplifier, link.wavelength).p_ase
        ase = sc.detector.eta * p_ase * link.symbol_period / hv
        modes = max(1.0, sc.amplifier.channel_bandwidth * link.symbol_period)
    rin = 0.0
    if link.rin_db_per_hz is not None:
        # RIN integrated over the Nyquist bandwidth of one symbol
        rin = rin_from_dbc(link.rin_db_per_hz) / (2 * link.symbol_period)
    return ReadoutContext(
        detector=sc.detector,
        symbol_period=link.symbol_period,
        photons_per_unit=photons_per_unit,
        sources=sc.enabled_sources(),
        ase_photons_per_symbol=ase,
        ase_modes=modes,
        rin_per_symbol=rin,
        wavelength=link.wavelength,
    )


@dataclass
class _Tally:
    """Per-image accumulators, filled by index so thread count cannot reorder sums."""

    variances: np.ndarray  # images x sources
    readouts: np.ndarray
    saturated: np.ndarray
    photons: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "_Tally":
        return cls(np.zeros((n, len(NOISE_SOURCES))), np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64),
                   np.zeros(n))


def _decode_windows(values: np.ndarray, ctx: ReadoutContext, sc: Scenario) -> np.ndarray:
    offset = ctx.offset()
    cal = identity_calibration().with_readout(offset, offset + ctx.photons_per_unit)
    decoded = decode_reading(values, cal, integrated_over=sc.window_macs)
    if sc.adc_bits is not None:
        full = float(sc.window_macs)
        decoded = quantize_unit(np.clip(decoded / full, 0.0, 1.0), sc.adc_bits) * full
    return decoded


def _sample_image(sig: WindowSignals, i: int, ctx: ReadoutContext, sc: Scenario, rng_for, tally: _Tally) -> np.ndarray:
    """Noisy decoded row results (normalized units) for image ``i``; ``rng_for(batch)`` supplies streams."""
    rows = sig.signal.shape[2]
    signs = np.array([p[0] for p in sig.passes])
    out = np.empty(rows)
    for b, start in enumerate(range(0, rows, sc.n_wavelengths)):
        stop = min(start + sc.n_wavelengths, rows)
        s = sig.signal[:, i, start:stop, :]
        sq = None if sig.sum_squares is None else sig.sum_squares[:, i, start:stop, :]
        if ctx.sources:
            sample = sample_windows(s, sig.n_symbols, ctx, rng_for(b), sq)
            tally.variances[i] += [sample.breakdown.variances[k] for k in NOISE_SOURCES]
            tally.saturated[i] += sample.saturated
            decoded = _decode_windows(sample.value, ctx, sc)
        elif sc.adc_bits is not None:
            decoded = _decode_windows(ctx.photons_per_unit * s + ctx.offset(), ctx, sc)
        else:
            decoded = s
        tally.readouts[i] += s.size
        tally.photons[i] += ctx.photons_per_unit * float(s.sum())
        out[start:stop] = np.tensordot(signs, decoded.sum(axis=-1), axes=1)
    return out


def _run_images(sig: WindowSignals, ctx: ReadoutContext, sc: Scenario, image_ids, key_prefix, threads: int,
                tally: _Tally) -> np.ndarray:
    n = sig.signal.shape[1]
    out = np.empty((n, sig.signal.shape[2]))

    def work(idx):
        for i in idx:
            key = (*key_prefix[:2], int(image_ids[i]), *key_prefix[2:])
            out[i] = _sample_image(sig, i, ctx, sc, lambda b, key=key: rngmod.stream(*key, b), tally)

    threads = max(1, int(threads))
    if threads == 1 or n < 2:
        work(range(n))
    else:
        chunks = [range(s, min(s + math.ceil(n / threads), n)) for s in range(0, n, math.ceil(n / threads))]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, chunks))
    return out


def _optical_matmul(w, x, sc: Scenario, *, x_scale=None, mean_product=None, chi=None, seed_key=(), image_ids=None,
                    threads: int = 1, tally: _Tally | None = None, rng: np.random.Generator | None = None):
    """Rows of ``w`` against each image row of ``x``; returns (result images x rows, photons per unit)."""
    ops = encode_operands(w, x, sc, x_scale=x_scale, chi=chi)
    sources = sc.enabled_sources()
    sig = window_signals(ops, sc.window_macs, need_squares="rin" in sources)
    if sc.energy_reference == "mean" and mean_product is None:
        mean_product = mean_logical_product(w, x, ops.w_scale, ops.x_scale)
    ctx = readout_context(sc, photon_scale(sc, mean_product))
    n = sig.signal.shape[1]
    tally = tally or _Tally.empty(n)
    if rng is not None:
        # single caller-owned stream, consumed in image then batch order
        out = np.stack([_sample_image(sig, i, ctx, sc, lambda b: rng, tally) for i in range(n)])
    else:
        ids = np.arange(n) if image_ids is None else np.asarray(image_ids)
        out = _run_images(sig, ctx, sc, ids, seed_key, threads, tally)
    return out * ops.w_scale * ops.x_scale, ctx.photons_per_unit


def simulate_dot(w_row, x, sc: Scenario, rng: np.random.Generator | None = None) -> float:
    """Optical estimate of w_row . x."""
    w_row = np.asarray(w_row, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w_row.ndim != 1 or w_row.shape != x.shape:
        raise InvalidArgument(f"vector shapes differ: {w_row.shape} vs {x.shape}")
    rng = rng if rng is not None else rngmod.stream(sc.seed, rngmod.MATVEC, 0)
    out, _ = _optical_matmul(w_row[None, :], x[None, :], sc, rng=rng)
    return float(out[0, 0])


def simulate_matvec(w, x, sc: Scenario, rng: np.random.Generator | None = None) -> np.ndarray:
    """Optical estimate of w @ x, rows spread over wavelength batches of size N."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or x.ndim != 1 or w.shape[1] != x.shape[0]:
        raise InvalidArgument(f"cannot multiply {w.shape} by {x.shape}")
    rng = rng if rng is not None else rngmod.stream(sc.seed, rngmod.MATVEC, 0)
    out, _ = _optical_matmul(w, x[None, :], sc, rng=rng)
    return out[0]


# ---------------------------------------------------------------------------
# inference


@dataclass(frozen=True)
class RunReport:
    accuracy: float
    confusion: np.ndarray  # predicted x true, each column sums to 1
    predictions: np.ndarray
    labels: np.ndarray
    margins: np.ndarray  # top-1 minus top-2 output per image
    photon_stats: dict
    noise_breakdown: dict  # mean variance per readout, electrons^2
    saturated_windows: int
    e_mac: float
    detector: str
    trial: int = 0


def confusion_matrix(predictions, labels, classes: int = 10) -> np.ndarray:
    """Predicted x true counts normalized so every populated column sums to 1."""
    counts = np.zeros((classes, classes))
    np.add.at(counts, (np.asarray(predictions), np.asarray(labels)), 1.0)
    totals = counts.sum(axis=0, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def _activation(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else z


def run_inference(model: Model, data: Dataset, sc: Scenario, threads: int = 1, trial: int = 0) -> RunReport:
    """Layer-by-layer optical inference; bias and activation are applied digitally."""
    images = np.asarray(data.images, dtype=np.float64)
    n = images.shape[0]
    ids = np.arange(n)
    mean_products = [None] * len(model.layers)
    if sc.energy_reference == "mean":
        digital_inputs = layer_inputs_digital(model, images)
        for k, layer in enumerate(model.layers):
            w_scale = float(np.max(np.abs(layer.weights))) or 1.0
            mean_products[k] = mean_logical_product(layer.weights, digital_inputs[k], w_scale, layer.input_scale)
    tally = _Tally.empty(n)
    x = images
    photons_per_unit = []
    for k, layer in enumerate(model.layers):
        y, kappa = _optical_matmul(layer.weights, x, sc, x_scale=layer.input_scale, mean_product=mean_products[k],
                                   seed_key=(sc.seed, rngmod.INFERENCE, trial, k), image_ids=ids, threads=threads,
                                   tally=tally)
        photons_per_unit.append(kappa)
        x = _activation(y + layer.bias, layer.activation)
    logits = x
    predictions = np.argmax(logits, axis=1)
    top2 = np.sort(logits, axis=1)[:, -2:]
    labels = np.asarray(data.labels)
    total_macs = n * sum(l.weights.size for l in model.layers)
    readouts = int(tally.readouts.sum())
    variances = tally.variances.sum(axis=0)
    breakdown = {s: float(v / max(readouts, 1)) for s, v in zip(NOISE_SOURCES, variances)}
    breakdown["total"] = float(sum(breakdown[s] for s in NOISE_SOURCES))
    return RunReport(
        accuracy=float(np.mean(predictions == labels)),
        confusion=confusion_matrix(predictions, labels, logits.shape[1]),
        predictions=predictions,
        labels=labels,
        margins=top2[:, 1] - top2[:, 0],
        photon_stats={
            "detected_photons_per_mac": float(tally.photons.sum() / total_macs),
            "detected_photons_per_readout": float(tally.photons.sum() / max(readouts, 1)),
            "photons_full_scale_mac": [float(p) for p in photons_per_unit],
            "readouts": readouts,
        },
        noise_breakdown=breakdown,
        saturated_windows=int(tally.saturated.sum()),
        e_mac=sc.e_mac_target,
        detector=getattr(sc.detector, "name", type(sc.detector).__name__),
        trial=trial,
    )


@dataclass(frozen=True)
class CurvePoint:
    e_mac: float
    photons_per_mac: float
    accuracy: float
    detector: str
    trial: int
    report: RunReport = field(repr=False, compare=False)


def sweep_energy(model: Model, data: Dataset, sc: Scenario, e_mac_grid, threads: int = 1,
                 on_point=None, skip=frozenset()) -> list[CurvePoint]:
    """Accuracy at each e_mac (ascending) and trial. ``skip`` holds (grid index, trial) pairs already done."""
    grid = [float(e) for e in e_mac_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidArgument("energy grid must be sorted ascending")
    if any(e <= 0 for e in grid):
        raise InvalidArgument("energy grid values must be positive")
    points = []
    for gi, e in enumerate(grid):
        point_sc = replace(sc, e_mac_target=e)
        for trial in range(sc.trials):
            if (gi, trial) in skip:
                continue
            rep = run_inference(model, data, point_sc, threads=threads, trial=trial)
            pt = CurvePoint(e, point_sc.photons_per_mac, rep.accuracy, rep.detector, trial, rep)
            points.append(pt)
            if on_point is not None:
                on_point(gi, pt)
    return points


def first_crossing(points, threshold: float) -> float | None:
    """Smallest e_mac whose trial-averaged accuracy reaches ``threshold``."""
    by_e = {}
    for p in points:
        by_e.setdefault(p.e_mac, []).append(p.accuracy)
    for e in sorted(by_e):
        if np.mean(by_e[e]) >= threshold:
            return e
    return None


# ---------------------------------------------------------------------------
# focused experiments


@dataclass(frozen=True)
class PrecisionResult:
    sigma_rms: float
    residuals: np.ndarray
    histogram: tuple[np.ndarray, np.ndarray]  # counts, bin edges


def precision_test(n_pairs: int, sc: Scenario, trial: int = 0) -> PrecisionResult:
    """Residual spread of single optical products u*v for uniform u, v in [0, 1]."""
    if n_pairs < 1000:
        raise InvalidArgument(f"need at least 1000 pairs, got {n_pairs}")
    pairs = rngmod.stream(sc.seed, rngmod.PAIRS, trial).random((2, n_pairs))
    u, v = pairs
    one = replace(sc, window_macs=1)
    ops = EncodedOperands(
        weights=(quantize_unit(u, sc.dac_bits)[:, None], np.zeros((n_pairs, 1))),
        inputs=(quantize_unit(v, sc.dac_bits)[:, None], np.zeros((n_pairs, 1))),
        w_scale=1.0,
        x_scale=1.0,
    )
    mean_product = 0.25 if sc.energy_reference == "mean" else None
    ctx = readout_context(one, photon_scale(one, mean_product))
    signal = ops.weights[0][:, 0] * ops.inputs[0][:, 0]
    sq = signal * signal
    if ctx.sources:
        sample = sample_windows(signal, 1.0, ctx, rngmod.stream(sc.seed, rngmod.PRECISION, trial), sq)
        values = sample.value
    else:
        values = ctx.photons_per_unit * signal + ctx.offset()
    est = _decode_windows(values, ctx, one)
    residuals = est - u * v
    counts, edges = np.histogram(residuals, bins=50)
    return PrecisionResult(float(np.sqrt(np.mean(residuals**2))), residuals, (counts, edges))


def quantization_sigma(bits: int, mean_square_operand: float = 1.0 / 3.0) -> float:
    """Residual rms of u*v when both operands are rounded to ``bits``: first and second order terms."""
    step = 1.0 / ((1 << bits) - 1)
    q = step * step / 12.0
    return math.sqrt(2 * mean_square_operand * q + q * q)


@dataclass(frozen=True)
class PhotonTrace:
    total_photons: int
    snr: float
    cumulative: np.ndarray


def photon_trace(n_macs: int, mean_photons_per_mac: float, rng: np.random.Generator) -> PhotonTrace:
    """Shot-limited accumulation of photons over ``n_macs`` MACs."""
    if n_macs < 1 or mean_photons_per_mac < 0:
        raise InvalidArgument("need n_macs >= 1 and a non-negative mean")
    counts = rng.poisson(mean_photons_per_mac, size=n_macs)
    cumulative = np.cumsum(counts)
    total = int(cumulative[-1])
    return PhotonTrace(total, total / math.sqrt(total) if total > 0 else 0.0, cumulative)


@dataclass(frozen=True)
class CrosstalkPoint:
    chi: float
    accuracy: float
    drop: float  # percentage points below the crosstalk-free run
    report: RunReport = field(repr=False, compare=False)


def crosstalk_accuracy_study(model: Model, data: Dataset, chi_grid, sc: Scenario,
                             threads: int = 1) -> tuple[RunReport, list[CrosstalkPoint]]:
    """Accuracy with the weight stream smeared by each chi, against a crosstalk-free baseline."""
    base = run_inference(model, data, replace(sc, link=replace(sc.link, crosstalk=0.0)), threads=threads)
    out = []
    for chi in chi_grid:
        if not 0 <= chi < 0.5:
            raise InvalidArgument(f"chi must lie in [0, 0.5), got {chi}")
        rep = run_inference(model, data, replace(sc, link=replace(sc.link, crosstalk=float(chi))), threads=threads)
        out.append(CrosstalkPoint(float(chi), rep.accuracy, 100.0 * (base.accuracy - rep.accuracy), rep))
    return base, out
