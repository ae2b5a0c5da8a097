"""Float <-> optical intensity <-> receiver reading mappings.

Encoding goes float -> intensity (linear, two-point) -> drive voltage (cubic
fitted to the measured modulator transfer). Decoding is an affine map fixed by
two calibration readings: all-zero inputs and all-one inputs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.polynomial import Chebyshev

from netcast.errors import CalibrationError, RangeError


@dataclass(frozen=True)
class TransferCurve:
    """Sampled modulator transfer: drive voltage -> transmitted relative power."""

    voltages: np.ndarray
    intensities: np.ndarray
    monotone_section: tuple[int, int] | None = None  # inclusive index range

    def __post_init__(self):
        v = np.array(self.voltages, dtype=np.float64)
        i = np.array(self.intensities, dtype=np.float64)
        if v.shape != i.shape or v.ndim != 1:
            raise CalibrationError(f"voltage/intensity sample shapes differ: {v.shape} vs {i.shape}")
        if v.size < 4:
            raise CalibrationError(f"need at least 4 samples, got {v.size}")
        if np.any(i < 0) or not np.all(np.isfinite(i)) or not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero((i < 0) | ~np.isfinite(i) | ~np.isfinite(v))[0])
            raise CalibrationError(f"invalid sample at index {bad}")
        section = self.monotone_section
        if section is None:
            lo, hi = int(np.argmin(i)), int(np.argmax(i))
            section = (min(lo, hi), max(lo, hi))
        start, stop = section
        if stop - start + 1 < 4:
            raise CalibrationError(f"monotone section {section} spans fewer than 4 samples")
        step = np.diff(i[start : stop + 1])
        if not (np.all(step > 0) or np.all(step < 0)):
            k = start + int(np.flatnonzero(np.sign(step) != np.sign(step[0]))[0])
            raise CalibrationError(f"transfer is not strictly monotone between samples {k} and {k + 1}")
        v.setflags(write=False)
        i.setflags(write=False)
        object.__setattr__(self, "voltages", v)
        object.__setattr__(self, "intensities", i)
        object.__setattr__(self, "monotone_section", (int(start), int(stop)))

    def section(self) -> tuple[np.ndarray, np.ndarray]:
        start, stop = self.monotone_section
        return self.voltages[start : stop + 1], self.intensities[start : stop + 1]

    def intensity_at(self, voltage):
        """Linear interpolation of the measured transfer inside the monotone section."""
        v, i = self.section()
        order = np.argsort(v)
        return np.interp(voltage, v[order], i[order])


@dataclass(frozen=True)
class CodecCalibration:
    encoder_coef: tuple[float, ...]
    encoder_domain: tuple[float, float]
    i_min: float
    i_max: float
    v_range: tuple[float, float]  # drive voltages producing i_min and i_max
    float_min: float = 0.0
    float_max: float = 1.0
    reading_at_zero: float = 0.0
    reading_at_one: float = 1.0
    # decoded value of a full-scale M-step window; None means M
    integration_scale: float | None = None
    curve: TransferCurve | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.i_min < self.i_max:
            raise CalibrationError(f"i_min={self.i_min} must be below i_max={self.i_max}")
        if not self.float_min < self.float_max:
            raise CalibrationError("float_min must be below float_max")

    @property
    def encoder(self) -> Chebyshev:
        return Chebyshev(self.encoder_coef, domain=self.encoder_domain)

    def with_readout(self, reading_at_zero: float, reading_at_one: float) -> "CodecCalibration":
        return replace(self, reading_at_zero=float(reading_at_zero), reading_at_one=float(reading_at_one))


def identity_calibration() -> CodecCalibration:
    """Ideal linear modulator: intensity == voltage on [0, 1]."""
    return CodecCalibration(
        encoder_coef=(0.5, 0.5, 0.0, 0.0), encoder_domain=(0.0, 1.0), i_min=0.0, i_max=1.0, v_range=(0.0, 1.0)
    )


def fit_transfer(curve: TransferCurve) -> CodecCalibration:
    """Fit a cubic intensity -> voltage encoder on the monotone section of ``curve``.

    Residuals are weighted by the local transfer slope so the least-squares
    objective is the intensity error of the round trip rather than the
    voltage error; this keeps the cubic accurate near the bias points where
    an interferometric transfer flattens out.
    """
    v, i = curve.section()
    slope = np.abs(np.gradient(i, v))
    weights = slope / slope.max() if slope.max() > 0 else None
    poly = Chebyshev.fit(i, v, 3, w=weights)
    coef = np.zeros(4)
    coef[: len(poly.coef)] = poly.coef
    lo, hi = int(np.argmin(i)), int(np.argmax(i))
    return CodecCalibration(
        encoder_coef=tuple(float(c) for c in coef),
        encoder_domain=(float(poly.domain[0]), float(poly.domain[1])),
        i_min=float(i[lo]),
        i_max=float(i[hi]),
        v_range=(float(v[lo]), float(v[hi])),
        curve=curve,
    )


def power_basis_coefficients(cal: CodecCalibration) -> np.ndarray:
    """Encoder coefficients in the ordinary power basis, lowest order first."""
    c = cal.encoder.convert(kind=np.polynomial.Polynomial).coef
    out = np.zeros(4)
    out[: len(c)] = c
    return out


def round_trip_error(cal: CodecCalibration, curve: TransferCurve | None = None, fraction: float = 0.9,
                     points: int = 2001) -> float:
    """Largest |I(encode(I)) - I| over the central ``fraction`` of the intensity range, in full-scale units."""
    curve = curve or cal.curve
    if curve is None:
        raise CalibrationError("no transfer curve to check against")
    span = cal.i_max - cal.i_min
    margin = 0.5 * (1 - fraction) * span
    targets = np.linspace(cal.i_min + margin, cal.i_max - margin, points)
    achieved = curve.intensity_at(cal.encoder(targets))
    return float(np.max(np.abs(achieved - targets)) / span)


def _check_range(f: np.ndarray, lo: float, hi: float, clip: bool) -> np.ndarray:
    if clip:
        return np.clip(f, lo, hi)
    # tolerate representation error at the end points
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    if np.any(f < lo - tol) or np.any(f > hi + tol):
        bad = f[(f < lo - tol) | (f > hi + tol)].flat[0]
        raise RangeError(f"value {bad!r} outside encodable range [{lo}, {hi}]")
    return np.clip(f, lo, hi)


def float_to_intensity(f, cal: CodecCalibration, clip: bool = False):
    """Linear two-point map: float_min -> i_min, float_max -> i_max."""
    arr = _check_range(np.asarray(f, dtype=np.float64), cal.float_min, cal.float_max, clip)
    slope = (cal.i_max - cal.i_min) / (cal.float_max - cal.float_min)
    out = slope * (arr - cal.float_min) + cal.i_min
    return float(out) if np.ndim(f) == 0 else out


def quantize_unit(values, bits: int | None):
    """Round values in [0, 1] onto a uniform grid of ``2**bits`` levels."""
    if bits is None:
        return np.asarray(values, dtype=np.float64)
    levels = (1 << int(bits)) - 1
    return np.round(np.asarray(values, dtype=np.float64) * levels) / levels


def encode(f, cal: CodecCalibration, dac_bits: int | None = None, clip: bool = False):
    """Drive voltage for float ``f``, optionally snapped to a ``dac_bits`` DAC grid."""
    intensity = float_to_intensity(f, cal, clip=clip)
    volts = cal.encoder(np.asarray(intensity))
    if dac_bits is not None:
        v0, v1 = cal.v_range
        frac = np.clip((volts - v0) / (v1 - v0), 0.0, 1.0)
        volts = v0 + quantize_unit(frac, dac_bits) * (v1 - v0)
    return float(volts) if np.ndim(f) == 0 else volts


def decode_reading(r, cal: CodecCalibration, integrated_over: int = 1):
    """Affine decode of a receiver reading.

    ``reading_at_zero`` decodes to ``float_min``. A window of ``integrated_over``
    full-scale products decodes to ``integration_scale`` (default: the window
    length), so a single full-scale product decodes to ``float_max``.
    """
    span = cal.reading_at_one - cal.reading_at_zero
    if span == 0 or not math.isfinite(span):
        raise CalibrationError("degenerate decode: reading_at_zero equals reading_at_one")
    m = int(integrated_over)
    if m < 1:
        raise CalibrationError(f"integration window must be >= 1, got {integrated_over}")
    scale = m if cal.integration_scale is None else cal.integration_scale
    frac = (np.asarray(r, dtype=np.float64) - cal.reading_at_zero) / (m * span)
    out = cal.float_min + (cal.float_max - cal.float_min) * scale * frac
    return float(out) if np.ndim(r) == 0 else out


# ---------------------------------------------------------------------------
# negative numbers


@dataclass(frozen=True)
class SignedSplit:
    positive: np.ndarray
    negative: np.ndarray

    @property
    def original(self) -> np.ndarray:
        return self.positive - self.negative


def split_signed(x) -> SignedSplit:
    """Split into non-negative parts sent on separate timesteps: x = pos - neg."""
    x = np.asarray(x, dtype=np.float64)
    return SignedSplit(np.maximum(x, 0.0), np.maximum(-x, 0.0))


def signed_dot_from_passes(w, x) -> float:
    """Signed dot product assembled from the four non-negative passes."""
    ws, xs = split_signed(w), split_signed(x)
    return float(
        ws.positive @ xs.positive - ws.positive @ xs.negative - ws.negative @ xs.positive + ws.negative @ xs.negative
    )


@dataclass(frozen=True)
class FatZeroAnalysis:
    unshifted_error: float
    shifted_error: float
    terms: dict

    @property
    def unshifted_linear(self) -> float:
        return self.terms["eps_x"] + self.terms["eps_w"]

    @property
    def shift_linear(self) -> float:
        return self.terms["eps_x_shift"] + self.terms["eps_w_shift"]


def shifted_encoding_error(x, w, eps: float, x_min: float, w_min: float) -> FatZeroAnalysis:
    """Accumulated error from a common calibration offset ``eps`` on both modulators.

    Unshifted encoding sends x and w directly. The shifted scheme sends
    ``x - x_min`` and ``w - w_min`` (``x_min, w_min <= 0``) so that float zero
    sits mid-range; the known shift products are subtracted after readout, so
    the residual error is what the offset leaves behind. Both errors are exact
    expansions: the unshifted one is eps*sum(x) + eps*sum(w) + n*eps^2, the
    shifted one adds -n*eps*x_min - n*eps*w_min.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = x.size
    terms = {
        "eps_x": eps * float(x.sum()),
        "eps_w": eps * float(w.sum()),
        "eps_sq": n * eps * eps,
        "eps_x_shift": -n * eps * x_min,
        "eps_w_shift": -n * eps * w_min,
        # exact shift products removed in post (not errors)
        "correction_x_w_min": -w_min * float(x.sum()),
        "correction_w_x_min": -x_min * float(w.sum()),
        "correction_min_min": n * x_min * w_min,
    }
    unshifted = terms["eps_x"] + terms["eps_w"] + terms["eps_sq"]
    shifted = unshifted + terms["eps_x_shift"] + terms["eps_w_shift"]
    return FatZeroAnalysis(unshifted, shifted, terms)


# ---------------------------------------------------------------------------
# files


def read_transfer_curve(path) -> TransferCurve:
    """Read ``voltage,intensity`` rows (header and ``#`` comments allowed)."""
    volts, ints = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                v, i = (float(t) for t in row)
            except ValueError:
                if lineno == 1 and not volts:
                    continue  # header
                raise CalibrationError(f"{path}:{lineno}: expected 'voltage,intensity', got {','.join(row)!r}")
            volts.append(v)
            ints.append(i)
    return TransferCurve(np.array(volts), np.array(ints))


def save_calibration(cal: CodecCalibration, path) -> None:
    doc = asdict(replace(cal, curve=None))
    doc.pop("curve")
    if cal.curve is not None:
        doc["curve"] = {
            "voltages": [float(v) for v in cal.curve.voltages],
            "intensities": [float(i) for i in cal.curve.intensities],
            "monotone_section": list(cal.curve.monotone_section),
        }
    doc["encoder_power_coef"] = [float(c) for c in power_basis_coefficients(cal)]
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_calibration(path) -> CodecCalibration:
    doc = json.loads(Path(path).read_text())
    doc.pop("encoder_power_coef", None)
    curve = doc.pop("curve", None)
    for key in ("encoder_coef", "encoder_domain", "v_range"):
        doc[key] = tuple(doc[key])
    if curve is not None:
        curve = TransferCurve(curve["voltages"], curve["intensities"], tuple(curve["monotone_section"]))
    return CodecCalibration(**doc, curve=curve)
