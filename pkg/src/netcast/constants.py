"""Physical constants shared by every module (SI units)."""

import math

BOLTZMANN = 1.380649e-23  # J/K
ELECTRON_CHARGE = 1.602177e-19  # C
PLANCK = 6.62607e-34  # J*s
SPEED_OF_LIGHT = 2.99792458e8  # m/s

ROOM_TEMPERATURE = 300.0  # K
C_BAND_WAVELENGTH = 1550e-9  # m
O_BAND_ZERO_DISPERSION_NM = 1314.0


def photon_energy(wavelength: float) -> float:
    """Photon energy h*c/lambda in joules for a wavelength in metres."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    return PLANCK * SPEED_OF_LIGHT / wavelength


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(ratio: float) -> float:
    return 10.0 * math.log10(ratio)
