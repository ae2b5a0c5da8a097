"""Detector models and noise-floor formulas.

Readouts are expressed in detected photoelectrons. For the time integrator
that is the integrated charge over q; amplified receivers refer their
voltage noise back to the photodiode through eta*G; photon counters count.
Every sampler takes an explicit numpy Generator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from netcast.constants import BOLTZMANN, C_BAND_WAVELENGTH, ELECTRON_CHARGE, ROOM_TEMPERATURE, photon_energy
from netcast.errors import CalibrationDriftWarning, ConfigError, InvalidArgument

NOISE_SOURCES = ("thermal", "shot", "dark", "ase", "rin")


def _positive(obj, *names):
    for name in names:
        if not getattr(obj, name) > 0:
            raise ConfigError(f"must be positive, got {getattr(obj, name)}", f"detector.{name}")


def _fraction(obj, *names):
    for name in names:
        if not 0 < getattr(obj, name) <= 1:
            raise ConfigError(f"must lie in (0, 1], got {getattr(obj, name)}", f"detector.{name}")


@dataclass(frozen=True)
class TimeIntegrator:
    capacitance: float = 10e-12  # F
    temperature: float = ROOM_TEMPERATURE
    quantum_efficiency: float = 1.0
    readout_noise_volts: float | None = None  # measured floor; None means kTC-limited
    series_resistance: float = 1e3  # ohm, voltage-mode integrator only
    switch_offset: float = 0.0  # V
    dark_current: float = 0.0  # A
    name: str = "TimeIntegrator"
    kind = "time_integrator"

    def __post_init__(self):
        _positive(self, "capacitance", "temperature", "series_resistance")
        _fraction(self, "quantum_efficiency")
        if self.readout_noise_volts is not None and self.readout_noise_volts < 0:
            raise ConfigError("must be non-negative", "detector.readout_noise_volts")
        if self.dark_current < 0:
            raise ConfigError("must be non-negative", "detector.dark_current")

    @property
    def eta(self) -> float:
        return self.quantum_efficiency

    def readout_noise_electrons(self) -> float:
        if self.readout_noise_volts is not None:
            return self.readout_noise_volts * self.capacitance / ELECTRON_CHARGE
        return thermal_noise_electrons(self.temperature, self.capacitance)

    def offset_electrons(self) -> float:
        return self.switch_offset * self.capacitance / ELECTRON_CHARGE


@dataclass(frozen=True)
class AmplifiedTIA:
    rms_noise: float  # V
    bandwidth: float  # Hz
    gain: float  # V/A
    quantum_efficiency: float = 1.0  # A/W
    coupling_efficiency: float = 1.0
    termination_factor: float = 1.0  # output-referred noise multiplier (50 ohm loading)
    name: str = "AmplifiedTIA"
    kind = "amplified"

    def __post_init__(self):
        _positive(self, "rms_noise", "bandwidth", "gain", "termination_factor")
        _fraction(self, "quantum_efficiency", "coupling_efficiency")

    @property
    def eta(self) -> float:
        return self.quantum_efficiency

    def noise_equivalent_power(self) -> float:
        """Input-referred optical noise power in W."""
        return self.rms_noise * self.termination_factor / (self.quantum_efficiency * self.gain)

    def response_time(self, symbol_period: float | None = None) -> float:
        """Time each symbol occupies at the receiver: 1/B, or the symbol period if slower."""
        tau = 1.0 / self.bandwidth
        return tau if symbol_period is None else max(tau, symbol_period)

    def noise_energy(self, symbol_period: float | None = None) -> float:
        """Optical energy equivalent of the readout noise on one MAC."""
        return self.noise_equivalent_power() * self.response_time(symbol_period)


@dataclass(frozen=True)
class LinearAPD(AmplifiedTIA):
    internal_gain: float = 10.0
    bias_voltage: float = 40.0
    name: str = "LinearAPD"
    kind = "amplified"

    def __post_init__(self):
        super().__post_init__()
        _positive(self, "internal_gain", "bias_voltage")


@dataclass(frozen=True)
class SNSPD:
    quantum_efficiency: float = 1.0
    dark_count_rate: float = 0.0  # Hz
    saturation_rate: float = 1e6  # counts/s
    bin_offset: float = 0.0  # V
    bin_step: float = 1.0  # V per photon
    name: str = "SNSPD"
    kind = "snspd"

    def __post_init__(self):
        _fraction(self, "quantum_efficiency")
        _positive(self, "saturation_rate", "bin_step")
        if self.dark_count_rate < 0:
            raise ConfigError("must be non-negative", "detector.dark_count_rate")

    @property
    def eta(self) -> float:
        return self.quantum_efficiency


@dataclass(frozen=True)
class CoherentHomodyne:
    lo_power: float = 1e-3  # W
    quantum_efficiency: float = 1.0
    name: str = "CoherentHomodyne"
    kind = "coherent"

    def __post_init__(self):
        _positive(self, "lo_power")
        _fraction(self, "quantum_efficiency")

    @property
    def eta(self) -> float:
        return self.quantum_efficiency


DetectorModel = TimeIntegrator | AmplifiedTIA | LinearAPD | SNSPD | CoherentHomodyne


# ---------------------------------------------------------------------------
# integrators


def _integral(trace, dt: float | None, t) -> float:
    trace = np.asarray(trace, dtype=np.float64)
    if t is not None:
        return float(np.trapezoid(trace, np.asarray(t, dtype=np.float64)))
    if dt is None or dt <= 0:
        raise InvalidArgument("need a positive sample spacing dt or explicit sample times")
    return float(np.trapezoid(trace, dx=dt))


def integrate_current(i_of_t, capacitance: float, dt: float | None = None, t=None,
                      switch_offset: float = 0.0) -> float:
    """Voltage on the integration capacitor after a window: (1/C) int i dt + offset."""
    if capacitance <= 0:
        raise InvalidArgument("capacitance must be positive")
    return _integral(i_of_t, dt, t) / capacitance + switch_offset


def integrate_voltage(v_of_t, resistance: float, capacitance: float, dt: float | None = None, t=None,
                      switch_offset: float = 0.0) -> float:
    """Inverting RC integrator output with the sign flipped back in software."""
    if resistance <= 0 or capacitance <= 0:
        raise InvalidArgument("resistance and capacitance must be positive")
    inverted = -_integral(v_of_t, dt, t) / (resistance * capacitance)
    return -inverted + switch_offset


# ---------------------------------------------------------------------------
# noise floors


def thermal_noise_electrons(temperature: float, capacitance: float) -> float:
    """kTC charge noise in rms electrons."""
    if temperature <= 0 or capacitance <= 0:
        raise InvalidArgument("temperature and capacitance must be positive")
    return math.sqrt(BOLTZMANN * temperature * capacitance) / ELECTRON_CHARGE


def thermal_noise_volts(temperature: float, capacitance: float) -> float:
    """kTC noise as rms volts sqrt(kT/C)."""
    if temperature <= 0 or capacitance <= 0:
        raise InvalidArgument("temperature and capacitance must be positive")
    return math.sqrt(BOLTZMANN * temperature / capacitance)


def rc_noise_bandwidth(resistance: float, capacitance: float) -> float:
    """Equivalent noise bandwidth 1/(4RC) of a single-pole RC."""
    return 1.0 / (4 * resistance * capacitance)


def johnson_noise_power(temperature: float, bandwidth: float) -> float:
    """Available thermal noise power 4kT*df in W."""
    return 4 * BOLTZMANN * temperature * bandwidth


def integrator_noise_floor(readout_noise_volts: float, capacitance: float, m: int) -> float:
    """Readout charge noise amortized per MAC, in coulombs."""
    return readout_noise_volts * capacitance / m


def snr_time_integrator(e_mac: float, eta: float, m: int, temperature: float, capacitance: float,
                        wavelength: float = C_BAND_WAVELENGTH, readout_noise_volts: float | None = None) -> float:
    """Signal electrons of M full-scale MACs over the readout noise (thermal-limited)."""
    if min(e_mac, eta, m, temperature, capacitance) <= 0:
        raise InvalidArgument("inputs must be positive")
    signal = e_mac * eta * m / photon_energy(wavelength)
    if readout_noise_volts is not None:
        noise = readout_noise_volts * capacitance / ELECTRON_CHARGE
    else:
        noise = thermal_noise_electrons(temperature, capacitance)
    return signal / noise


def amplified_snr(e_mac: float, det: AmplifiedTIA, symbol_period: float | None = None) -> float:
    """Single-MAC SNR of an amplified photoreceiver.

    With no symbol period this is e_mac*B*eta*G/V_rms; a symbol period longer
    than 1/B replaces 1/B as the time the noise power is integrated over.
    """
    if e_mac < 0:
        raise InvalidArgument("e_mac must be non-negative")
    return det.coupling_efficiency * e_mac / det.noise_energy(symbol_period)


def tia_thermal_emac(snr_target: float, resistance: float, bandwidth: float,
                     temperature: float = ROOM_TEMPERATURE, wavelength: float = C_BAND_WAVELENGTH,
                     eta: float = 1.0) -> float:
    """Optical energy per MAC for a TIA limited by feedback-resistor Johnson noise."""
    if min(snr_target, resistance, bandwidth, temperature, eta) <= 0:
        raise InvalidArgument("inputs must be positive")
    charge = math.sqrt(4 * BOLTZMANN * temperature / (resistance * bandwidth))
    return snr_target * photon_energy(wavelength) / (ELECTRON_CHARGE * eta) * charge


def shot_thermal_crossover(temperature: float, capacitance: float) -> float:
    """Photons per readout at which shot noise equals kTC noise."""
    if temperature <= 0 or capacitance <= 0:
        raise InvalidArgument("temperature and capacitance must be positive")
    return BOLTZMANN * temperature * capacitance / ELECTRON_CHARGE**2


def flicker_psd(k_f: float, current: float, alpha: float, beta: float, frequency: float) -> float:
    """1/f current noise density K_f * i^alpha / f^beta in A^2/Hz."""
    if frequency <= 0:
        raise InvalidArgument("frequency must be positive")
    if current < 0:
        raise InvalidArgument("current must be non-negative")
    return k_f * current**alpha / frequency**beta


def flicker_corner(k_f: float, current: float) -> float:
    """Frequency where 1/f noise meets shot noise: K_f * i / (2q)."""
    if current < 0:
        raise InvalidArgument("current must be non-negative")
    return k_f * current / (2 * ELECTRON_CHARGE)


def apd_electrical_energy(e_mac: float, v_bias: float, eta: float = 1.0, wavelength: float = C_BAND_WAVELENGTH,
                          gain: float = 1.0, shot_limited: bool = False) -> float:
    """Supply energy an APD draws per MAC.

    Thermal-limited operation lowers the needed optical energy by the same
    factor the gain raises the charge, so the gain cancels. In the
    shot-limited regime the optical energy cannot drop and the gain
    multiplies the drawn charge.
    """
    if min(e_mac, v_bias, eta, gain) <= 0:
        raise InvalidArgument("inputs must be positive")
    charge = ELECTRON_CHARGE * eta * e_mac / photon_energy(wavelength)
    return charge * v_bias * (gain if shot_limited else 1.0)


def dark_charge(i_dark: float, window: float) -> float:
    if i_dark < 0 or window < 0:
        raise InvalidArgument("dark current and window must be non-negative")
    return i_dark * window


def coherent_photocurrent(e_sig, e_lo):
    """Beat-note current between signal and LO field amplitudes (unit responsivity)."""
    e_sig = np.asarray(e_sig, dtype=np.float64)
    e_lo = np.asarray(e_lo, dtype=np.float64)
    if np.any(e_sig < 0) or np.any(e_lo < 0):
        raise InvalidArgument("field amplitudes must be non-negative")
    out = e_sig * e_lo
    return float(out) if out.ndim == 0 else out


def coherent_required_signal(snr: float, thermal_floor: float, e_lo: float) -> float:
    """Signal amplitude needed for ``snr`` when the beat current must clear a fixed thermal floor."""
    if e_lo <= 0:
        raise InvalidArgument("LO amplitude must be positive")
    return snr * thermal_floor / e_lo


# ---------------------------------------------------------------------------
# photon counting


def sample_shot(n_p, rng: np.random.Generator):
    """Poisson photon count with mean ``n_p``."""
    n_p = np.asarray(n_p, dtype=np.float64)
    if np.any(n_p < 0):
        raise InvalidArgument("mean photon number must be non-negative")
    out = rng.poisson(n_p)
    return int(out) if out.ndim == 0 else out


def snspd_count_from_voltage(v, det: SNSPD):
    """Photon count from an integrated SNSPD voltage by snapping to the calibrated ladder."""
    raw = np.rint((np.asarray(v, dtype=np.float64) - det.bin_offset) / det.bin_step)
    if np.any(raw < 0):
        warnings.warn(f"{int(np.sum(raw < 0))} readout(s) decoded below zero photons; offset may have drifted",
                      CalibrationDriftWarning, stacklevel=2)
    out = np.maximum(raw, 0).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def snspd_voltage_from_counts(counts, det: SNSPD, jitter: float = 0.0, rng: np.random.Generator | None = None):
    """Integrator voltage for a number of SNSPD pulses; ``jitter`` is rms in units of bin_step."""
    v = det.bin_offset + det.bin_step * np.asarray(counts, dtype=np.float64)
    if jitter > 0:
        v = v + rng.normal(0.0, jitter * det.bin_step, size=np.shape(v))
    return v


# ---------------------------------------------------------------------------
# window readouts


@dataclass
class NoiseBreakdown:
    """Accumulated per-source variances (electrons^2) over a number of readouts."""

    readouts: int = 0
    variances: dict = field(default_factory=lambda: dict.fromkeys(NOISE_SOURCES, 0.0))

    @property
    def total(self) -> float:
        return float(sum(self.variances.values()))

    def add(self, other: "NoiseBreakdown") -> None:
        self.readouts += other.readouts
        for k, v in other.variances.items():
            self.variances[k] += v

    def per_readout(self) -> dict:
        n = max(self.readouts, 1)
        return {k: v / n for k, v in self.variances.items()}


@dataclass(frozen=True)
class ReadoutSample:
    value: np.ndarray  # electrons (or counts) including any fixed offset
    window_macs: np.ndarray
    breakdown: NoiseBreakdown
    saturated: int = 0


@dataclass(frozen=True)
class ReadoutContext:
    """Per-scenario quantities the window sampler needs, fixed before sampling."""

    detector: DetectorModel
    symbol_period: float
    photons_per_unit: float  # mean detected photons for one full-scale MAC
    sources: frozenset
    ase_photons_per_symbol: float = 0.0
    ase_modes: float = 1.0  # optical modes per symbol, bandwidth * symbol period
    rin_per_symbol: float = 0.0  # dimensionless relative intensity variance per symbol
    wavelength: float = C_BAND_WAVELENGTH

    def offset(self) -> float:
        if isinstance(self.detector, TimeIntegrator) and "thermal" in self.sources:
            return self.detector.offset_electrons()
        return 0.0


def sample_windows(signal, n_symbols, ctx: ReadoutContext, rng: np.random.Generator,
                   sum_squares=None) -> ReadoutSample:
    """Draw one readout per window.

    ``signal`` holds the noiseless window sums in full-scale MAC units,
    ``n_symbols`` the number of symbols accumulated in each window (same
    shape or broadcastable), and ``sum_squares`` the per-window sum of
    squared symbol products, needed only for RIN.
    """
    det = ctx.detector
    src = ctx.sources
    signal = np.asarray(signal, dtype=np.float64)
    n_sym = np.broadcast_to(np.asarray(n_symbols, dtype=np.float64), signal.shape)
    mean = ctx.photons_per_unit * signal
    bd = NoiseBreakdown(readouts=signal.size)
    saturated = 0

    if "shot" in src:
        value = rng.poisson(mean).astype(np.float64)
        bd.variances["shot"] = float(mean.sum())
    else:
        value = mean.copy()

    window_time = n_sym * ctx.symbol_period
    if "dark" in src:
        if isinstance(det, TimeIntegrator):
            dark_mean = det.dark_current * window_time / ELECTRON_CHARGE
        elif isinstance(det, SNSPD):
            dark_mean = det.dark_count_rate * window_time
        else:
            dark_mean = np.zeros_like(signal)
        if np.any(dark_mean > 0):
            value += rng.poisson(dark_mean) - dark_mean
            bd.variances["dark"] = float(np.sum(dark_mean))

    if "ase" in src and ctx.ase_photons_per_symbol > 0:
        # ASE shot, ASE-ASE beat and signal-ASE beat, background mean removed
        b = ctx.ase_photons_per_symbol
        var = n_sym * (b + b * b / ctx.ase_modes) + 2 * b * mean / ctx.ase_modes
        value += rng.normal(0.0, 1.0, size=signal.shape) * np.sqrt(var)
        bd.variances["ase"] = float(var.sum())

    if "rin" in src and ctx.rin_per_symbol > 0:
        if sum_squares is None:
            raise ConfigError("RIN needs per-window sums of squared products", "link.rin_db_per_hz")
        var = ctx.rin_per_symbol * ctx.photons_per_unit**2 * np.asarray(sum_squares, dtype=np.float64)
        value += rng.normal(0.0, 1.0, size=signal.shape) * np.sqrt(var)
        bd.variances["rin"] = float(var.sum())

    if "thermal" in src:
        if isinstance(det, TimeIntegrator):
            sigma = det.readout_noise_electrons()
            var = np.full(signal.shape, sigma * sigma)
            value += det.offset_electrons()
        elif isinstance(det, AmplifiedTIA):
            # one digitized sample per symbol, summed after the ADC
            sigma = det.eta * det.noise_energy(ctx.symbol_period) / photon_energy(ctx.wavelength)
            var = n_sym * sigma * sigma
        else:
            var = np.zeros(signal.shape)
        if np.any(var > 0):
            value += rng.normal(0.0, 1.0, size=signal.shape) * np.sqrt(var)
            bd.variances["thermal"] = float(var.sum())

    if isinstance(det, SNSPD):
        # hard rate cap: flag windows whose count rate exceeds it
        rate = np.divide(value, window_time, out=np.zeros_like(value), where=window_time > 0)
        saturated = int(np.sum(rate > det.saturation_rate))

    return ReadoutSample(value, n_sym, bd, saturated)


# ---------------------------------------------------------------------------
# presets

DETECTOR_PRESETS: dict[str, DetectorModel] = {
    "PDA10CS": AmplifiedTIA(rms_noise=300e-6, bandwidth=775e3, gain=2.4e4, quantum_efficiency=1.0, name="PDA10CS"),
    "KoheronPD100": AmplifiedTIA(rms_noise=286e-6, bandwidth=110e6, gain=3900, quantum_efficiency=0.9,
                                 termination_factor=2.0, name="KoheronPD100"),
    "APD430C": LinearAPD(rms_noise=3e-3, bandwidth=400e6, gain=2e5, quantum_efficiency=0.9,
                         coupling_efficiency=0.5, internal_gain=20, bias_voltage=40.0, name="APD430C"),
    "TimeIntegrator-10pF": TimeIntegrator(capacitance=10e-12, readout_noise_volts=220e-6, switch_offset=500e-6,
                                          dark_current=50e-12, name="TimeIntegrator-10pF"),
    "TimeIntegrator-10pF-ideal": TimeIntegrator(capacitance=10e-12, name="TimeIntegrator-10pF-ideal"),
    "TimeIntegrator-1fF": TimeIntegrator(capacitance=1e-15, name="TimeIntegrator-1fF"),
    "SNSPD": SNSPD(quantum_efficiency=1.0, dark_count_rate=1000.0, saturation_rate=1e6, bin_offset=5e-3,
                   bin_step=20e-3, name="SNSPD"),
    "CoherentHomodyne": CoherentHomodyne(lo_power=1e-3, name="CoherentHomodyne"),
}


def detector_preset(name: str) -> DetectorModel:
    for key, det in DETECTOR_PRESETS.items():
        if key.lower() == name.lower():
            return det
    raise ConfigError(f"unknown detector preset {name!r}; known: {sorted(DETECTOR_PRESETS)}", "detector.preset")
