"""Golden numbers: closed-form results checked against fixed reference values.

Each check evaluates one formula and compares it with its reference figure at
a stated tolerance. ``netcast selftest`` and the acceptance suite both run
this list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from netcast import budget, channel, receiver
from netcast.channel import FREE_SPACE_PRESETS, AmplifierConfig
from netcast.constants import photon_energy
from netcast.receiver import DETECTOR_PRESETS


@dataclass(frozen=True)
class GoldenCheck:
    name: str
    value: float
    target: float
    rel_tol: float | None = None  # symmetric relative band around target
    bounds: tuple[float, float] | None = None  # explicit acceptance interval instead
    unit: str = ""

    @property
    def passed(self) -> bool:
        if self.bounds is not None:
            return self.bounds[0] <= self.value <= self.bounds[1]
        if self.rel_tol == 0:
            return self.value == self.target
        return abs(self.value - self.target) <= self.rel_tol * abs(self.target)

    def describe(self) -> str:
        if self.bounds is not None:
            band = f"in [{self.bounds[0]:.4g}, {self.bounds[1]:.4g}]"
        elif self.rel_tol == 0:
            band = "exact"
        else:
            band = f"+/-{100 * self.rel_tol:g}%"
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.value:.6g} {self.unit} (target {self.target:.6g}, {band})"


def _half_decade(target: float) -> tuple[float, float]:
    return target / math.sqrt(10), target * math.sqrt(10)


def golden_checks() -> list[GoldenCheck]:
    hv = photon_energy(1550e-9)
    amp = AmplifierConfig(gain=100, inversion_factor=1, channel_bandwidth=100e9)
    ase = channel.edfa_output(0.0, amp).p_ase
    leo, mars, green = (FREE_SPACE_PRESETS[k] for k in ("leo", "mars", "green-mars"))
    tifs = budget.tifs_client_energy(100, 100)
    fits = budget.fits_client_energy(100, 100)
    link = budget.compute_link_budget(budget.example_link_stages(), 10e-3, 100e-18)
    apd_1v = receiver.apd_electrical_energy(1e-15, 1.0)
    apd_40v = receiver.apd_electrical_energy(1e-15, 40.0)
    pda = DETECTOR_PRESETS["PDA10CS"]
    ti = DETECTOR_PRESETS["TimeIntegrator-10pF"]
    return [
        GoldenCheck("EDFA ASE power, G=100, 100 GHz", ase, 1e-6, rel_tol=0.30, unit="W"),
        GoldenCheck("ASE energy per MAC at full channel rate", channel.ase_energy_per_mac(amp), 10e-18,
                    rel_tol=0.30, unit="J"),
        GoldenCheck("shot-limited RIN at 20 mW", channel.rin_shot_limit(20e-3), 1.3e-17, rel_tol=0.05, unit="1/Hz"),
        GoldenCheck("shot-limited RIN at 20 mW in dBc/Hz", channel.rin_to_dbc(channel.rin_shot_limit(20e-3)), -169.0,
                    rel_tol=0.005, unit="dBc/Hz"),
        GoldenCheck("RIN-limited SNR, -140 dBc/Hz over 100 GHz",
                    channel.rin_power_snr(channel.rin_from_dbc(-140), 100e9), 1000, rel_tol=1e-9),
        GoldenCheck("fiber loss, 70 km at 0.14 dB/km", channel.fiber_attenuation(70, 0.14), 0.1, rel_tol=0.05),
        GoldenCheck("deployed strand, 22 dB", channel.fiber_attenuation(43, 22 / 43), 6.3e-3, rel_tol=0.01),
        GoldenCheck("C-band dispersion", channel.dispersion_coefficient("c_band", 1550), 18.0, rel_tol=0,
                    unit="ps/(nm km)"),
        GoldenCheck("FWM at 0.1x launch power", channel.fwm_scaling(0.1, 0.1, 0.1) / channel.fwm_scaling(1, 1, 1),
                    1e-3, rel_tol=1e-9),
        GoldenCheck("Friis LEO", channel.friis_received_power(leo), 1e-3, rel_tol=0.5, unit="W"),
        GoldenCheck("Friis Mars", channel.friis_received_power(mars), 1e-12, rel_tol=0.5, unit="W"),
        GoldenCheck("Friis green Mars", channel.friis_received_power(green), 140e-12, rel_tol=0.5, unit="W"),
        GoldenCheck("RF link SNR", channel.rf_link_snr(1e-12, 1e-6, 1e9, 300), 241, rel_tol=0.05),
        GoldenCheck("shot/thermal crossover at 10 pF", receiver.shot_thermal_crossover(300, 10e-12), 1.6e6,
                    rel_tol=0.05, unit="photons"),
        GoldenCheck("flicker corner, K_f=1e-8, 1 uA", receiver.flicker_corner(1e-8, 1e-6), 30e3, rel_tol=0.10,
                    unit="Hz"),
        GoldenCheck("kTC noise at 10 pF", receiver.thermal_noise_volts(300, 10e-12), 20e-6, rel_tol=0.05, unit="V"),
        GoldenCheck("integrator floor, 220 uV, 10 pF, M=100",
                    receiver.integrator_noise_floor(220e-6, 10e-12, 100), 22e-18, rel_tol=1e-12, unit="C"),
        GoldenCheck("switch offset with no light", receiver.integrate_current([0.0, 0.0], 10e-12, dt=1e-6,
                                                                             switch_offset=ti.switch_offset),
                    500e-6, rel_tol=0, unit="V"),
        GoldenCheck("APD supply energy at 1 V", apd_1v, 1e-15, bounds=(0.5e-15, 1.5e-15), unit="J"),
        GoldenCheck("APD 40 V / 1 V ratio", apd_40v / apd_1v, 40.0, rel_tol=1e-12),
        GoldenCheck("TIA thermal E_mac per unit SNR", receiver.tia_thermal_emac(1, 1000, 10e9), 50e-18,
                    bounds=(25e-18, 60e-18), unit="J"),
        GoldenCheck("TIA thermal E_mac at SNR 20", receiver.tia_thermal_emac(20, 1000, 10e9), 1e-15,
                    bounds=_half_decade(1e-15), unit="J"),
        GoldenCheck("PDA10CS energy at SNR 1", 1.0 / receiver.amplified_snr(1.0, pda), 1.6e-14,
                    bounds=(10e-15, 100e-15), unit="J"),
        GoldenCheck("Koheron integrated noise", 7e-12 * math.sqrt(110e6) * 3900, 286e-6, rel_tol=0.01, unit="V"),
        GoldenCheck("APD430C voltage noise", 17e-9 * 1.8e5, 3e-3, rel_tol=0.05, unit="V"),
        GoldenCheck("accumulated photons, 30 MACs x 0.5", 30 * 0.5, 15.0, rel_tol=0),
        GoldenCheck("shot-limited SNR of 15 photons", math.sqrt(15.0), 3.9, rel_tol=0.01),
        GoldenCheck("TIFS client total at N=M=100", tifs.total, 30.01e-15, rel_tol=1e-12, unit="J"),
        GoldenCheck("TIFS leading-order total 1 pJ/N", tifs.headline, 10e-15, rel_tol=1e-12, unit="J"),
        GoldenCheck("TIFS total vs 10 fJ headline", tifs.total, 10e-15, bounds=_half_decade(10e-15), unit="J"),
        GoldenCheck("FITS client total at N=M=100", fits.total, 10e-15, bounds=_half_decade(10e-15), unit="J"),
        GoldenCheck("FITS laser term", fits.breakdown["Laser"], 1e-18, rel_tol=0, unit="J"),
        GoldenCheck("link budget received power", link.received_power, 25e-6, rel_tol=0.01, unit="W"),
        GoldenCheck("link budget received power (exact dB)", link.received_power, 10e-3 * 10 ** (-2.6),
                    rel_tol=1e-12, unit="W"),
        GoldenCheck("link budget MAC rate at 100 aJ", link.achievable_rate, 250e9, rel_tol=0.01, unit="MAC/s"),
        GoldenCheck("LEO rate per wavelength at 1e-19 J", budget.spacecraft_rate(leo, 1e-19).per_wavelength, 1e16,
                    rel_tol=0.5, unit="MAC/s"),
        GoldenCheck("Mars total rate, shot limited, N=100", budget.spacecraft_rate(mars).total, 1e9, rel_tol=0.5,
                    unit="MAC/s"),
        GoldenCheck("green Mars total rate, N=1000", budget.spacecraft_rate(green, 1e-19).total, 1.4e12,
                    rel_tol=0.05, unit="MAC/s"),
        GoldenCheck("photon energy at 1550 nm", hv, 1.28e-19, rel_tol=0.01, unit="J"),
    ]


def run_golden() -> tuple[list[GoldenCheck], bool]:
    checks = golden_checks()
    return checks, all(c.passed for c in checks)
