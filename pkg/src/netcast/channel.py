"""Everything between the transmitter and the detector.

Fiber loss, dispersion-induced symbol crosstalk, amplifier ASE, laser RIN,
four-wave-mixing scaling, free-space (Friis) links and RF links. All
functions are pure; configs are frozen dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from netcast.constants import (
    BOLTZMANN,
    C_BAND_WAVELENGTH,
    O_BAND_ZERO_DISPERSION_NM,
    ROOM_TEMPERATURE,
    SPEED_OF_LIGHT,
    db_to_linear,
    linear_to_db,
    photon_energy,
)
from netcast.errors import ConfigError, InvalidArgument

C_BAND_DISPERSION = 18.0  # ps/(nm km)
O_BAND_DISPERSION_SLOPE = 0.092  # ps/(nm^2 km)
BANDS = {"c_band": (1530.0, 1565.0), "o_band": (1260.0, 1360.0)}

LINK_KINDS = ("ideal", "fiber", "free_space", "rf")


@dataclass(frozen=True)
class LinkConfig:
    kind: str = "ideal"
    length: float = 0.0  # km for fiber, m for free space
    loss_per_km: float = 0.0  # dB/km
    extra_loss_db: float = 0.0
    band: str = "c_band"
    center_wavelength: float = 1550.0  # nm
    optical_bandwidth: float = 0.0  # Hz spanned by the WDM comb
    symbol_period: float = 100e-9  # s
    launch_power_per_wavelength: float = 1e-3  # W
    temperature: float = ROOM_TEMPERATURE
    rin_db_per_hz: float | None = None  # laser RIN; None disables it
    crosstalk: float | None = None  # explicit chi; None derives it from dispersion

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ConfigError(f"unknown link kind {self.kind!r}; expected one of {LINK_KINDS}", "link.kind")
        for name in ("length", "loss_per_km", "extra_loss_db", "optical_bandwidth", "launch_power_per_wavelength"):
            if getattr(self, name) < 0:
                raise ConfigError(f"must be non-negative, got {getattr(self, name)}", f"link.{name}")
        if self.symbol_period <= 0:
            raise ConfigError("must be positive", "link.symbol_period")
        if self.temperature <= 0:
            raise ConfigError("must be positive", "link.temperature")
        if self.band not in BANDS:
            raise ConfigError(f"unknown band {self.band!r}", "link.band")
        lo, hi = BANDS[self.band]
        if not lo <= self.center_wavelength <= hi:
            raise ConfigError(f"{self.center_wavelength} nm is outside {self.band} ({lo}-{hi} nm)",
                              "link.center_wavelength")
        if self.crosstalk is not None and not 0 <= self.crosstalk < 1:
            raise ConfigError(f"crosstalk must be in [0, 1), got {self.crosstalk}", "link.crosstalk")

    @property
    def wavelength(self) -> float:
        """Center wavelength in metres."""
        return self.center_wavelength * 1e-9

    @property
    def clock_rate(self) -> float:
        return 1.0 / self.symbol_period

    def attenuation(self) -> float:
        if self.kind != "fiber":
            return db_to_linear(-self.extra_loss_db)
        return fiber_attenuation(self.length, self.loss_per_km, self.extra_loss_db)

    def chi(self) -> float:
        """Symbol crosstalk factor seen by the client."""
        if self.crosstalk is not None:
            return self.crosstalk
        if self.kind != "fiber" or self.length == 0 or self.optical_bandwidth == 0:
            return 0.0
        d = dispersion_coefficient(self.band, self.center_wavelength)
        span = wavelength_span_nm(self.optical_bandwidth, self.center_wavelength)
        return crosstalk_chi(d, span, self.length, self.symbol_period)


@dataclass(frozen=True)
class AmplifierConfig:
    gain: float = 100.0  # linear
    inversion_factor: float = 1.0
    channel_bandwidth: float = 100e9  # Hz

    def __post_init__(self):
        if self.gain < 1:
            raise ConfigError(f"gain must be >= 1, got {self.gain}", "amplifier.gain")
        if self.inversion_factor < 1:
            raise ConfigError(f"inversion factor must be >= 1, got {self.inversion_factor}",
                              "amplifier.inversion_factor")
        if self.channel_bandwidth <= 0:
            raise ConfigError("must be positive", "amplifier.channel_bandwidth")


@dataclass(frozen=True)
class FreeSpaceConfig:
    p_t: float  # W per wavelength
    a_t: float  # m^2
    a_r: float  # m^2
    wavelength: float  # m
    distance: float  # m
    n_wavelengths: int = 1

    def __post_init__(self):
        for name in ("p_t", "a_t", "a_r", "wavelength", "distance", "n_wavelengths"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"must be positive, got {getattr(self, name)}", f"free_space.{name}")


# ---------------------------------------------------------------------------
# fiber


def fiber_attenuation(length_km: float, loss_per_km_db: float, extra_db: float = 0.0) -> float:
    """Linear power transmission of a fiber span plus lumped losses."""
    if length_km < 0 or loss_per_km_db < 0 or extra_db < 0:
        raise InvalidArgument("fiber length and losses must be non-negative")
    return db_to_linear(-(length_km * loss_per_km_db + extra_db))


def dispersion_coefficient(band: str, wavelength_nm: float) -> float:
    """Chromatic dispersion D in ps/(nm km).

    C band is flat at 18; O band is linear around the 1314 nm zero.
    """
    if band not in BANDS:
        raise InvalidArgument(f"unknown band {band!r}")
    lo, hi = BANDS[band]
    if not lo <= wavelength_nm <= hi:
        raise InvalidArgument(f"{wavelength_nm} nm is outside {band} ({lo}-{hi} nm)")
    if band == "c_band":
        return C_BAND_DISPERSION
    return O_BAND_DISPERSION_SLOPE * abs(wavelength_nm - O_BAND_ZERO_DISPERSION_NM)


def wavelength_span_nm(bandwidth_hz: float, center_nm: float) -> float:
    """Convert an optical bandwidth to a wavelength span at the band center: lambda^2 df / c."""
    lam = center_nm * 1e-9
    return lam * lam * bandwidth_hz / SPEED_OF_LIGHT * 1e9


def crosstalk_chi(d_ps_nm_km: float, span_nm: float, length_km: float, symbol_period: float) -> float:
    """Largest inter-wavelength delay D*dlambda*L over the symbol period."""
    if symbol_period <= 0:
        raise InvalidArgument("symbol period must be positive")
    if min(d_ps_nm_km, span_nm, length_km) < 0:
        raise InvalidArgument("dispersion, span and length must be non-negative")
    return d_ps_nm_km * 1e-12 * span_nm * length_km / symbol_period


def channel_capacity(chi: float, b_opt: float) -> float:
    """Weights per second the link can carry before crosstalk exceeds ``chi``.

    Uses the natural log; with log10 the same formula gives 1.527 at chi=0.05
    and 2.810 at chi=0.1 (B_opt=1).
    """
    if not 0 < chi < 1:
        raise InvalidArgument(f"chi must lie in (0, 1), got {chi}")
    return 2 * math.pi * math.sqrt(2 * chi) / math.log(1 / chi) * b_opt


def apply_temporal_crosstalk(stream, chi: float, axis: int = -1) -> np.ndarray:
    """Leak a fraction ``chi`` of each symbol into its successor along ``axis``.

    The last symbol keeps its energy, so the total is conserved and the
    stream length is unchanged. ``chi == 0`` returns the input values exactly.
    """
    if not 0 <= chi < 1:
        raise InvalidArgument(f"chi must lie in [0, 1), got {chi}")
    s = np.asarray(stream, dtype=np.float64)
    if chi == 0:
        return s.copy()
    s = np.moveaxis(s, axis, -1)
    out = (1 - chi) * s
    out[..., 1:] += chi * s[..., :-1]
    out[..., -1] += chi * s[..., -1]
    return np.moveaxis(out, -1, axis)


# ---------------------------------------------------------------------------
# amplifiers and lasers


@dataclass(frozen=True)
class AmplifiedPower:
    p_signal: float
    p_ase: float


def edfa_output(p_in: float, amp: AmplifierConfig, wavelength: float = C_BAND_WAVELENGTH) -> AmplifiedPower:
    """Signal and ASE power after an amplifier: G*P_in and mu*h*nu*df*(G-1)."""
    if p_in < 0:
        raise InvalidArgument("input power must be non-negative")
    ase = amp.inversion_factor * photon_energy(wavelength) * amp.channel_bandwidth * (amp.gain - 1)
    return AmplifiedPower(amp.gain * p_in, ase)


def ase_energy_per_mac(amp: AmplifierConfig, mac_rate: float | None = None,
                       wavelength: float = C_BAND_WAVELENGTH) -> float:
    """ASE energy landing in each MAC when the channel runs ``mac_rate`` MAC/s (default: its bandwidth)."""
    rate = amp.channel_bandwidth if mac_rate is None else mac_rate
    return edfa_output(0.0, amp, wavelength).p_ase / rate


def fwm_scaling(p1: float, p2: float, p3: float, kappa: float = 1.0) -> float:
    """Four-wave-mixing product power, up to the unknown constant ``kappa``."""
    if min(p1, p2, p3) < 0:
        raise InvalidArgument("powers must be non-negative")
    return kappa * p1 * p2 * p3


def rin_shot_limit(p_av: float, wavelength: float = C_BAND_WAVELENGTH) -> float:
    """Shot-noise-limited relative intensity noise 2*h*nu/P in 1/Hz."""
    if p_av <= 0:
        raise InvalidArgument("average power must be positive")
    return 2 * photon_energy(wavelength) / p_av


def rin_to_dbc(rin_per_hz: float) -> float:
    return linear_to_db(rin_per_hz)


def rin_from_dbc(dbc_per_hz: float) -> float:
    return db_to_linear(dbc_per_hz)


def rin_power_snr(rin_per_hz: float, bandwidth: float) -> float:
    """Power SNR set by RIN alone over a detection bandwidth."""
    return 1.0 / (rin_per_hz * bandwidth)


# ---------------------------------------------------------------------------
# free space and RF


def friis_received_power(cfg: FreeSpaceConfig) -> float:
    """Diffraction-limited received power per wavelength."""
    return cfg.p_t * cfg.a_t * cfg.a_r / (cfg.wavelength**2 * cfg.distance**2)


def rf_link_snr(p_s: float, p_lo: float, bandwidth: float, temperature: float = ROOM_TEMPERATURE) -> float:
    """Power SNR of a mixer-based RF receiver against the kT*df floor."""
    if min(p_s, p_lo, bandwidth, temperature) <= 0:
        raise InvalidArgument("RF link inputs must be positive")
    return math.sqrt(p_s * p_lo) / (BOLTZMANN * temperature * bandwidth)


# ---------------------------------------------------------------------------
# presets

LINK_PRESETS: dict[str, LinkConfig] = {
    "ideal": LinkConfig(kind="ideal"),
    # lab bench: a few metres of fiber, 10 dB of coupler and splitter loss
    "local-lab": LinkConfig(kind="fiber", length=0.005, loss_per_km=0.2, extra_loss_db=10.0,
                            optical_bandwidth=100e9),
    # two 43 km strands at 22 dB each, slow clock
    "deployed-86km": LinkConfig(kind="fiber", length=86.0, loss_per_km=22.0 / 43.0, symbol_period=1e-3,
                                optical_bandwidth=100e9),
    "leo": LinkConfig(kind="free_space", length=2e6, launch_power_per_wavelength=1.0),
    "mars": LinkConfig(kind="free_space", length=5e10, launch_power_per_wavelength=1.0),
    "rf-5g": LinkConfig(kind="rf", symbol_period=1e-9),
}

FREE_SPACE_PRESETS: dict[str, FreeSpaceConfig] = {
    "leo": FreeSpaceConfig(p_t=1.0, a_t=0.1, a_r=0.1, wavelength=1550e-9, distance=2e6, n_wavelengths=100),
    "mars": FreeSpaceConfig(p_t=1.0, a_t=0.1, a_r=0.1, wavelength=1550e-9, distance=5e10, n_wavelengths=100),
    "green-mars": FreeSpaceConfig(p_t=10.0, a_t=0.1, a_r=0.1, wavelength=532e-9, distance=5e10,
                                  n_wavelengths=1000),
}


def link_preset(name: str) -> LinkConfig:
    try:
        return LINK_PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown link preset {name!r}; known: {sorted(LINK_PRESETS)}", "link.preset") from None
