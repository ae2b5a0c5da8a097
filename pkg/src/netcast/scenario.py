"""Experiment description (Scenario), shipped presets, and the scenario file format.

A scenario file is YAML with the sections ``model``, ``link``, ``detector``,
``amplifier``, ``codec``, ``run`` and ``budget``. Every key is optional;
unknown keys are rejected with their dotted location. ``preset`` at top
level picks a base scenario; ``preset`` inside ``link`` or ``detector``
picks a base config that the remaining keys override.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from netcast.channel import LINK_PRESETS, AmplifierConfig, LinkConfig
from netcast.constants import photon_energy
from netcast.errors import ConfigError
from netcast.receiver import (
    DETECTOR_PRESETS,
    NOISE_SOURCES,
    SNSPD,
    AmplifiedTIA,
    CoherentHomodyne,
    LinearAPD,
    TimeIntegrator,
)

PRESET_DIR_ENV = "NETCAST_PRESET_DIR"
ENERGY_REFERENCES = ("full_scale", "mean")
DETECTOR_KINDS = {
    "time_integrator": TimeIntegrator,
    "amplified": AmplifiedTIA,
    "apd": LinearAPD,
    "snspd": SNSPD,
    "coherent": CoherentHomodyne,
}
# sources each detector physically has; ASE and RIN come from the link side
DETECTOR_SOURCES = {
    TimeIntegrator: {"thermal", "shot", "dark"},
    AmplifiedTIA: {"thermal", "shot"},
    LinearAPD: {"thermal", "shot"},
    SNSPD: {"shot", "dark"},
    CoherentHomodyne: {"shot"},
}


@dataclass(frozen=True)
class Scenario:
    link: LinkConfig = field(default_factory=LinkConfig)
    detector: object = field(default_factory=lambda: DETECTOR_PRESETS["TimeIntegrator-10pF"])
    amplifier: AmplifierConfig | None = None
    n_wavelengths: int = 100
    window_macs: int = 100
    e_mac_target: float = 1e-16  # J per MAC at the detector
    # "full_scale": a MAC with both operands at full scale deposits e_mac_target;
    # "mean": the average logical MAC of the evaluated data deposits it
    energy_reference: str = "full_scale"
    dac_bits: int | None = 8
    adc_bits: int | None = None
    noise_sources: tuple[str, ...] | None = None  # None enables everything the hardware has
    seed: int = 0
    trials: int = 1
    name: str = "custom"

    def __post_init__(self):
        if not isinstance(self.detector, tuple(DETECTOR_SOURCES)):
            raise ConfigError(f"unsupported detector {type(self.detector).__name__}", "detector")
        for key in ("n_wavelengths", "window_macs", "trials"):
            if int(getattr(self, key)) < 1:
                raise ConfigError(f"must be >= 1, got {getattr(self, key)}", f"run.{key}")
        if not self.e_mac_target > 0:
            raise ConfigError(f"must be positive, got {self.e_mac_target}", "run.e_mac_target")
        if self.energy_reference not in ENERGY_REFERENCES:
            raise ConfigError(f"expected one of {ENERGY_REFERENCES}, got {self.energy_reference!r}",
                              "run.energy_reference")
        for key in ("dac_bits", "adc_bits"):
            bits = getattr(self, key)
            if bits is not None and not 1 <= int(bits) <= 24:
                raise ConfigError(f"must be between 1 and 24, got {bits}", f"codec.{key}")
        if self.noise_sources is not None:
            unknown = set(self.noise_sources) - set(NOISE_SOURCES)
            if unknown:
                raise ConfigError(f"unknown noise sources {sorted(unknown)}; known: {NOISE_SOURCES}",
                                  "run.noise_sources")
            object.__setattr__(self, "noise_sources", tuple(self.noise_sources))
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a non-negative 64-bit integer", "run.seed")

    @property
    def wavelength(self) -> float:
        return self.link.wavelength

    @property
    def photons_per_mac(self) -> float:
        return self.e_mac_target / photon_energy(self.wavelength)

    def enabled_sources(self) -> frozenset:
        available = set(DETECTOR_SOURCES[type(self.detector)])
        if self.amplifier is not None:
            available.add("ase")
        if self.link.rin_db_per_hz is not None:
            available.add("rin")
        if self.noise_sources is None:
            return frozenset(available)
        return frozenset(available & set(self.noise_sources))

    def noiseless(self) -> "Scenario":
        return replace(self, noise_sources=())

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_mapping(self) -> dict:
        det = dataclasses.asdict(self.detector)
        det["kind"] = next(k for k, cls in DETECTOR_KINDS.items() if type(self.detector) is cls)
        return {
            "name": self.name,
            "link": dataclasses.asdict(self.link),
            "detector": det,
            "amplifier": None if self.amplifier is None else dataclasses.asdict(self.amplifier),
            "codec": {"dac_bits": self.dac_bits, "adc_bits": self.adc_bits},
            "run": {
                "n_wavelengths": self.n_wavelengths,
                "window_macs": self.window_macs,
                "e_mac_target": self.e_mac_target,
                "energy_reference": self.energy_reference,
                "noise_sources": None if self.noise_sources is None else list(self.noise_sources),
                "seed": self.seed,
                "trials": self.trials,
            },
        }

    def digest(self) -> str:
        text = json.dumps(self.to_mapping(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


T_LAB = 100e-9  # shared 10 MHz experiment clock
T_SNSPD = 33e-6  # slow clock keeps SNSPD count rates under saturation

SCENARIO_PRESETS: dict[str, Scenario] = {
    "ideal": Scenario(link=LINK_PRESETS["ideal"], detector=DETECTOR_PRESETS["TimeIntegrator-10pF-ideal"],
                      noise_sources=(), e_mac_target=1e-15, name="ideal"),
    "precision": Scenario(link=LINK_PRESETS["ideal"], detector=DETECTOR_PRESETS["TimeIntegrator-10pF"],
                          window_macs=1, e_mac_target=1e-12, name="precision"),
    "time-integrator": Scenario(link=LINK_PRESETS["local-lab"], detector=DETECTOR_PRESETS["TimeIntegrator-10pF"],
                                e_mac_target=100e-18, energy_reference="mean", name="time-integrator"),
    "time-integrator-1fF": Scenario(link=LINK_PRESETS["local-lab"], detector=DETECTOR_PRESETS["TimeIntegrator-1fF"],
                                    e_mac_target=1e-18, energy_reference="mean", name="time-integrator-1fF"),
    "pda10cs": Scenario(link=LINK_PRESETS["local-lab"], detector=DETECTOR_PRESETS["PDA10CS"],
                        e_mac_target=100e-15, energy_reference="mean", name="pda10cs"),
    "koheron": Scenario(link=LINK_PRESETS["local-lab"], detector=DETECTOR_PRESETS["KoheronPD100"],
                        e_mac_target=100e-15, energy_reference="mean", name="koheron"),
    "apd430c": Scenario(link=LINK_PRESETS["local-lab"], detector=DETECTOR_PRESETS["APD430C"],
                        e_mac_target=10e-15, energy_reference="mean", name="apd430c"),
    "snspd": Scenario(link=replace(LINK_PRESETS["ideal"], symbol_period=T_SNSPD), detector=DETECTOR_PRESETS["SNSPD"],
                      e_mac_target=photon_energy(1550e-9), energy_reference="mean", name="snspd"),
    "deployed-86km": Scenario(link=LINK_PRESETS["deployed-86km"], detector=DETECTOR_PRESETS["TimeIntegrator-10pF"],
                              e_mac_target=10e-15, energy_reference="mean", name="deployed-86km"),
    "edfa": Scenario(link=LINK_PRESETS["local-lab"], detector=DETECTOR_PRESETS["TimeIntegrator-10pF"],
                     amplifier=AmplifierConfig(), e_mac_target=10e-15, energy_reference="mean", name="edfa"),
}


def preset_dir() -> Path | None:
    d = os.environ.get(PRESET_DIR_ENV)
    return Path(d) if d else None


def scenario_preset(name: str, _loading: tuple = ()) -> Scenario:
    """Look up ``<name>.yaml`` in the preset directory, else a shipped preset.

    A preset file may extend the shipped preset of the same name.
    """
    d = preset_dir()
    if d is not None and name not in _loading and (d / f"{name}.yaml").is_file():
        return load_scenario_file(d / f"{name}.yaml", _loading + (name,)).scenario
    try:
        return SCENARIO_PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown scenario preset {name!r}; known: {sorted(SCENARIO_PRESETS)}", "preset") from None


# ---------------------------------------------------------------------------
# file format


@dataclass(frozen=True)
class ScenarioFile:
    """Parsed scenario document: the Scenario plus the sections only the CLI uses."""

    scenario: Scenario
    model: dict = field(default_factory=dict)
    run_extra: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    codec_extra: dict = field(default_factory=dict)


SECTIONS = ("preset", "name", "model", "link", "detector", "amplifier", "codec", "run", "budget")
MODEL_KEYS = ("path", "dataset", "images")
RUN_KEYS = ("n_wavelengths", "window_macs", "e_mac_target", "energy_reference", "noise_sources", "seed", "trials")
RUN_EXTRA_KEYS = ("e_mac_grid", "chi_grid", "threads")
CODEC_KEYS = ("dac_bits", "adc_bits")
CODEC_EXTRA_KEYS = ("calibration",)
BUDGET_KEYS = ("n", "m", "tifs", "fits", "stages", "launch_power", "e_mac_required", "free_space", "n_wavelengths")


def _check_keys(doc, allowed, location):
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"expected a mapping, got {type(doc).__name__}", location)
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}; allowed: {', '.join(allowed)}", f"{location}.{key}".lstrip("."))
    return doc


def _build(cls, base, overrides: dict, location: str):
    names = [f.name for f in fields(cls)]
    _check_keys(overrides, names, location)
    values = dataclasses.asdict(base) if base is not None else {}
    values.update(overrides)
    try:
        return cls(**values)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(str(exc), location) from None


def _link_from(doc, base: LinkConfig) -> LinkConfig:
    doc = dict(_check_keys(doc, ["preset"] + [f.name for f in fields(LinkConfig)], "link"))
    if "preset" in doc:
        name = doc.pop("preset")
        if name not in LINK_PRESETS:
            raise ConfigError(f"unknown link preset {name!r}; known: {sorted(LINK_PRESETS)}", "link.preset")
        base = LINK_PRESETS[name]
    return _build(LinkConfig, base, doc, "link")


def _detector_from(doc, base):
    doc = dict(doc or {})
    if not isinstance(doc, dict):
        raise ConfigError("expected a mapping", "detector")
    cls = type(base)
    if "preset" in doc:
        name = doc.pop("preset")
        match = [v for k, v in DETECTOR_PRESETS.items() if k.lower() == str(name).lower()]
        if not match:
            raise ConfigError(f"unknown detector preset {name!r}; known: {sorted(DETECTOR_PRESETS)}",
                              "detector.preset")
        base = match[0]
        cls = type(base)
    if "kind" in doc:
        kind = doc.pop("kind")
        if kind not in DETECTOR_KINDS:
            raise ConfigError(f"unknown detector kind {kind!r}; known: {sorted(DETECTOR_KINDS)}", "detector.kind")
        if DETECTOR_KINDS[kind] is not cls:
            cls, base = DETECTOR_KINDS[kind], None
    return _build(cls, base, doc, "detector")


def parse_scenario(doc: dict, source: str = "<scenario>", _loading: tuple = ()) -> ScenarioFile:
    if doc is None:
        doc = {}
    _check_keys(doc, SECTIONS, "")
    base = scenario_preset(str(doc["preset"]), _loading) if "preset" in doc else Scenario()
    run = _check_keys(doc.get("run"), RUN_KEYS + RUN_EXTRA_KEYS, "run")
    codec = _check_keys(doc.get("codec"), CODEC_KEYS + CODEC_EXTRA_KEYS, "codec")
    model = _check_keys(doc.get("model"), MODEL_KEYS, "model")
    budget = _check_keys(doc.get("budget"), BUDGET_KEYS, "budget")

    link = _link_from(doc.get("link"), base.link) if "link" in doc else base.link
    detector = _detector_from(doc.get("detector"), base.detector) if "detector" in doc else base.detector
    amplifier = base.amplifier
    if "amplifier" in doc:
        amp = doc["amplifier"]
        amplifier = None if amp is None else _build(AmplifierConfig, base.amplifier or AmplifierConfig(), amp,
                                                    "amplifier")
    changes = {k: run[k] for k in RUN_KEYS if k in run}
    changes.update({k: codec[k] for k in CODEC_KEYS if k in codec})
    if "name" in doc:
        changes["name"] = str(doc["name"])
    try:
        scenario = replace(base, link=link, detector=detector, amplifier=amplifier, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), source) from None
    return ScenarioFile(
        scenario=scenario,
        model=dict(model),
        run_extra={k: run[k] for k in RUN_EXTRA_KEYS if k in run},
        budget=dict(budget),
        codec_extra={k: codec[k] for k in CODEC_EXTRA_KEYS if k in codec},
    )


def load_scenario_file(path, _loading: tuple = ()) -> ScenarioFile:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"not valid YAML: {getattr(exc, 'problem', exc)}", where) from None
    try:
        return parse_scenario(doc, str(path), _loading)
    except ConfigError as exc:
        raise ConfigError(str(exc), str(path)) from None


def load_scenario(path) -> Scenario:
    return load_scenario_file(path).scenario


def dump_scenario(sc: Scenario) -> str:
    """YAML text that parses back to ``sc``."""
    return yaml.safe_dump(sc.to_mapping(), sort_keys=False)
