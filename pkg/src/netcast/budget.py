"""Client energy per MAC and optical power budgets.

Device tables follow the amortization rule of the client energy tables:
a device's energy is divided by its fan-out (N for spatial, M for
temporal), optionally multiplied by its device count when the count is
itself a fan-out symbol that does not cancel (the FITS modulator bank).
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

from netcast.channel import FreeSpaceConfig, friis_received_power
from netcast.constants import C_BAND_WAVELENGTH, db_to_linear, photon_energy
from netcast.errors import InvalidArgument

PJ = 1e-12
FJ = 1e-15
AJ = 1e-18

FANOUTS = ("spatial", "temporal", "none")


@dataclass(frozen=True)
class DeviceEntry:
    name: str
    count: str  # "1", "N" or "M", as printed in the table
    fanout: str  # spatial (/N), temporal (/M) or none
    energy_per_event: float  # J; the tables' "~1 pJ" is stored as exactly 1e-12
    count_multiplies: bool = False

    def __post_init__(self):
        if self.fanout not in FANOUTS:
            raise InvalidArgument(f"{self.name}: fanout must be one of {FANOUTS}, got {self.fanout!r}")
        if self.count not in ("1", "N", "M"):
            raise InvalidArgument(f"{self.name}: count must be '1', 'N' or 'M', got {self.count!r}")
        if not self.energy_per_event > 0:
            raise InvalidArgument(f"{self.name}: energy must be positive")

    def per_mac(self, n: int, m: int) -> float:
        sizes = {"1": 1, "N": n, "M": m}
        divisor = {"spatial": n, "temporal": m, "none": 1}[self.fanout]
        mult = sizes[self.count] if self.count_multiplies else 1
        return self.energy_per_event * mult / divisor


TIFS_TABLE = (
    DeviceEntry("Modulator", "1", "spatial", PJ),
    DeviceEntry("DAC", "1", "spatial", PJ),
    DeviceEntry("ADC", "1", "temporal", PJ),
    DeviceEntry("Integrator", "N", "temporal", FJ),
)

FITS_TABLE = (
    DeviceEntry("Modulator", "M", "spatial", FJ, count_multiplies=True),
    DeviceEntry("DAC", "1", "spatial", PJ),
    DeviceEntry("ADC", "1", "temporal", PJ),
    DeviceEntry("Laser", "1", "none", AJ),
)


@dataclass(frozen=True)
class EnergyLedger:
    n: int
    m: int
    breakdown: dict  # device name -> J/MAC
    total: float
    headline: float  # the tables' leading-order total, 1 pJ / N

    def rows(self) -> list[tuple[str, float]]:
        return list(self.breakdown.items()) + [("Total", self.total)]


def _amortize(n: int, m: int, table) -> EnergyLedger:
    if n < 1 or m < 1:
        raise InvalidArgument(f"N and M must be >= 1, got N={n}, M={m}")
    breakdown = {e.name: e.per_mac(n, m) for e in table}
    total = 0.0
    for v in breakdown.values():
        total += v
    return EnergyLedger(n, m, breakdown, total, PJ / n)


def tifs_client_energy(n: int, m: int, table=TIFS_TABLE) -> EnergyLedger:
    """Client energy per MAC for time-integrating receivers."""
    return _amortize(n, m, table)


def fits_client_energy(n: int, m: int, table=FITS_TABLE) -> EnergyLedger:
    """Client energy per MAC for the frequency-integrating variant."""
    return _amortize(n, m, table)


def device_table_from(doc) -> tuple[DeviceEntry, ...]:
    """Build a device table from a list of mappings (scenario ``budget`` section)."""
    if not isinstance(doc, list):
        raise InvalidArgument("device table must be a list of entries")
    out = []
    for i, row in enumerate(doc):
        try:
            out.append(DeviceEntry(**row))
        except TypeError as exc:
            raise InvalidArgument(f"device table entry {i}: {exc}") from None
    return tuple(out)


# ---------------------------------------------------------------------------
# optical power budgets


@dataclass(frozen=True)
class Stage:
    name: str
    gain_db: float  # negative for loss
    amplifier: bool = False

    @classmethod
    def loss(cls, name: str, db: float) -> "Stage":
        return cls(name, -abs(db))


@dataclass(frozen=True)
class LinkBudget:
    stages: tuple[Stage, ...]
    launch_power: float
    received_power: float
    e_mac_required: float
    achievable_rate: float  # MAC/s per wavelength
    power_after: tuple[float, ...] = field(default=())

    @property
    def total_gain_db(self) -> float:
        return sum(s.gain_db for s in self.stages)


def compute_link_budget(stages, launch_power: float, e_mac_required: float) -> LinkBudget:
    """Received power and MAC rate after a chain of lossy (or amplifying) stages."""
    if launch_power <= 0 or e_mac_required <= 0:
        raise InvalidArgument("launch power and required energy must be positive")
    stages = tuple(stages)
    power = launch_power
    after = []
    for s in stages:
        if s.gain_db > 0 and not s.amplifier:
            warnings.warn(f"stage {s.name!r} has {s.gain_db} dB of gain but is not an amplifier", stacklevel=2)
        power *= db_to_linear(s.gain_db)
        after.append(power)
    return LinkBudget(stages, launch_power, power, e_mac_required, power / e_mac_required, tuple(after))


def example_link_stages() -> tuple[Stage, ...]:
    """Telecom example: server chip, 70 km of fiber budgeted at 10 dB (9.8 dB at 0.14 dB/km), client chip."""
    return (Stage.loss("weight server", 10.0), Stage.loss("fiber 70 km", 10.0), Stage.loss("client", 6.0))


@dataclass(frozen=True)
class SpacecraftRate:
    received_power: float  # W per wavelength
    e_mac: float
    per_wavelength: float  # MAC/s
    total: float  # MAC/s over all wavelengths
    n_wavelengths: int


def shot_limited_emac(wavelength: float = C_BAND_WAVELENGTH) -> float:
    """One photon per MAC."""
    return photon_energy(wavelength)


def spacecraft_rate(cfg: FreeSpaceConfig, e_mac: float | None = None, n_wavelengths: int | None = None) -> SpacecraftRate:
    """MAC rate a free-space link can feed; e_mac defaults to one 1550 nm photon."""
    e = shot_limited_emac() if e_mac is None else e_mac
    n = cfg.n_wavelengths if n_wavelengths is None else n_wavelengths
    if e <= 0 or n < 1:
        raise InvalidArgument("e_mac must be positive and n_wavelengths >= 1")
    p = friis_received_power(cfg)
    return SpacecraftRate(p, e, p / e, n * p / e, n)


# ---------------------------------------------------------------------------
# rendering


def render_text(rows, headers) -> str:
    """Aligned plain-text table; floats in engineering-friendly %g form."""
    cells = [[h for h in headers]] + [[f"{c:.4g}" if isinstance(c, float) else str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_csv(rows, headers) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for r in rows:
        w.writerow([repr(c) if isinstance(c, float) else c for c in r])
    return buf.getvalue()


def ledger_rows(ledger: EnergyLedger) -> list[tuple[str, float]]:
    return ledger.rows()


def link_rows(budget: LinkBudget) -> list[tuple[str, float, float]]:
    rows = [("launch", 0.0, budget.launch_power)]
    rows += [(s.name, s.gain_db, p) for s, p in zip(budget.stages, budget.power_after)]
    return rows
