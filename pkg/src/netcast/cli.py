"""Command-line front end: ``netcast <command> [options]``.

Primary outputs are CSV files whose bytes depend only on the inputs; run
timestamps and versions go to a ``*.meta.json`` sidecar next to them.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from netcast import budget as budgetmod
from netcast.channel import FREE_SPACE_PRESETS, FreeSpaceConfig, friis_received_power
from netcast.codec import fit_transfer, power_basis_coefficients, read_transfer_curve, round_trip_error, save_calibration
from netcast.errors import NetcastError
from netcast.golden import run_golden
from netcast.model import load_dataset, load_model, load_reference_model
from netcast.pipeline import run_inference, sweep_energy
from netcast.scenario import (
    PRESET_DIR_ENV,
    SCENARIO_PRESETS,
    ScenarioFile,
    dump_scenario,
    load_scenario_file,
    preset_dir,
    scenario_preset,
)

DEFAULT_IMAGES = 1000


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0"


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(c)) if isinstance(c, (float, np.floating)) else c for c in r])
    path.write_text(buf.getvalue())


def _write_meta(path: Path, sf: ScenarioFile | None, seed: int | None, extra: dict | None = None) -> None:
    meta = {
        "version": _version(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "seed": seed,
    }
    if sf is not None:
        meta["scenario"] = sf.scenario.name
        meta["scenario_hash"] = sf.scenario.digest()
    meta.update(extra or {})
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _scenario_file(args) -> ScenarioFile:
    if args.scenario:
        sf = load_scenario_file(args.scenario)
    else:
        sf = ScenarioFile(scenario_preset(args.preset or "ideal"))
    if args.seed is not None:
        sf = replace(sf, scenario=replace(sf.scenario, seed=args.seed))
    return sf


def _threads(args, sf: ScenarioFile) -> int:
    if args.threads is not None:
        return args.threads
    return int(sf.run_extra.get("threads", 1))


def _load_inputs(sf: ScenarioFile, images_override: int | None):
    model = load_model(sf.model["path"]) if sf.model.get("path") else load_reference_model()
    limit = images_override or sf.model.get("images", DEFAULT_IMAGES)
    data = load_dataset(sf.model.get("dataset"), limit=limit)
    return model, data


def _out_dir(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


REPORT_HEADER = ["scenario", "detector", "seed", "trial", "e_mac_j", "detected_photons_per_mac", "accuracy",
                 "mean_margin", "saturated_windows"]


def _report_row(sc, rep) -> list:
    return [sc.name, rep.detector, sc.seed, rep.trial, rep.e_mac, rep.photon_stats["detected_photons_per_mac"],
            rep.accuracy, float(np.mean(rep.margins)), rep.saturated_windows]


def _write_confusion(path: Path, rep) -> None:
    k = rep.confusion.shape[0]
    _write_csv(path, ["predicted"] + [f"true_{j}" for j in range(k)],
               [[i] + list(rep.confusion[i]) for i in range(k)])


# ---------------------------------------------------------------------------
# commands


def cmd_calibrate(args) -> int:
    curve = read_transfer_curve(args.curve)
    cal = fit_transfer(curve)
    err = round_trip_error(cal)
    out = Path(args.out) if args.out else Path(args.out_dir) / "calibration.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_calibration(cal, out)
    coef = ", ".join(f"{c:.6g}" for c in power_basis_coefficients(cal))
    print(f"fitted samples {curve.monotone_section[0]}..{curve.monotone_section[1]} "
          f"intensity [{cal.i_min:.6g}, {cal.i_max:.6g}]")
    print(f"encoder V(I) = {coef} (ascending powers)")
    print(f"max round-trip error over middle 90%: {100 * err:.3f}% of full scale")
    print(f"wrote {out}")
    return 0


def cmd_infer(args) -> int:
    sf = _scenario_file(args)
    model, data = _load_inputs(sf, args.images)
    out = _out_dir(args)
    sc = sf.scenario
    rows = []
    for trial in range(sc.trials):
        rep = run_inference(model, data, sc, threads=_threads(args, sf), trial=trial)
        rows.append(_report_row(sc, rep))
        _write_confusion(out / f"confusion_trial{trial}.csv", rep)
        _write_csv(out / f"predictions_trial{trial}.csv", ["image", "label", "prediction", "margin"],
                   [[i, int(l), int(p), float(m)] for i, (l, p, m) in
                    enumerate(zip(rep.labels, rep.predictions, rep.margins))])
        print(f"trial {trial}: accuracy {rep.accuracy:.4f} on {len(data)} images "
              f"({rep.photon_stats['detected_photons_per_mac']:.4g} detected photons/MAC)")
    baseline = model.baseline_accuracy
    if baseline is not None:
        print(f"recorded digital baseline (full test split): {baseline:.4f}")
    report = out / "report.csv"
    _write_csv(report, REPORT_HEADER, rows)
    _write_meta(report, sf, sc.seed, {"images": len(data)})
    return 0


def _parse_grid(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def cmd_sweep(args) -> int:
    sf = _scenario_file(args)
    grid = _parse_grid(args.grid) if args.grid else _parse_grid(sf.run_extra.get("e_mac_grid", []))
    if not grid:
        raise NetcastError("no energy grid: pass --grid or set run.e_mac_grid")
    model, data = _load_inputs(sf, args.images)
    out = _out_dir(args)
    sc = sf.scenario
    marks = out / "markers"
    marks.mkdir(exist_ok=True)
    confusion_dir = out / "confusion"
    confusion_dir.mkdir(exist_ok=True)

    def marker(gi, trial):
        return marks / f"point{gi:04d}_trial{trial}.json"

    done = {}
    for gi in range(len(grid)):
        for trial in range(sc.trials):
            m = marker(gi, trial)
            if m.exists():
                rec = json.loads(m.read_text())
                if rec.get("scenario_hash") == sc.digest() and rec.get("e_mac") == grid[gi]:
                    done[(gi, trial)] = rec["row"]
    if done:
        print(f"resuming: {len(done)} point(s) already complete")

    def on_point(gi, pt):
        row = _report_row(replace(sc, e_mac_target=pt.e_mac), pt.report)
        _write_confusion(confusion_dir / f"point{gi:04d}_trial{pt.trial}.csv", pt.report)
        marker(gi, pt.trial).write_text(json.dumps({"scenario_hash": sc.digest(), "e_mac": pt.e_mac, "row": row}))
        done[(gi, pt.trial)] = row
        print(f"e_mac {pt.e_mac:.3e} J trial {pt.trial}: accuracy {pt.accuracy:.4f}")

    sweep_energy(model, data, sc, grid, threads=_threads(args, sf), on_point=on_point, skip=frozenset(done))
    rows = [done[(gi, t)] for gi in range(len(grid)) for t in range(sc.trials)]
    curve = out / "curve.csv"
    _write_csv(curve, REPORT_HEADER, rows)
    _write_meta(curve, sf, sc.seed, {"grid": grid, "images": len(data)})
    return 0


def cmd_budget(args) -> int:
    sf = _scenario_file(args)
    b = sf.budget
    n = int(b.get("n", sf.scenario.n_wavelengths))
    m = int(b.get("m", sf.scenario.window_macs))
    tifs_table = budgetmod.device_table_from(b["tifs"]) if "tifs" in b else budgetmod.TIFS_TABLE
    fits_table = budgetmod.device_table_from(b["fits"]) if "fits" in b else budgetmod.FITS_TABLE
    out = _out_dir(args)
    rows = []
    for label, ledger in (("TIFS", budgetmod.tifs_client_energy(n, m, tifs_table)),
                          ("FITS", budgetmod.fits_client_energy(n, m, fits_table))):
        print(f"{label} client energy, N={n}, M={m}")
        print(budgetmod.render_text([(k, v * 1e15) for k, v in ledger.rows()], ["device", "fJ/MAC"]), end="")
        print(f"leading-order total (1 pJ/N): {ledger.headline * 1e15:.4g} fJ/MAC\n")
        rows += [(label, k, v) for k, v in ledger.rows()]
    path = out / "budget.csv"
    _write_csv(path, ["architecture", "device", "j_per_mac"], rows)
    _write_meta(path, sf, None, {"n": n, "m": m})
    return 0


def _stages_from(doc) -> tuple:
    stages = []
    for i, s in enumerate(doc):
        if "loss_db" in s:
            stages.append(budgetmod.Stage.loss(str(s["name"]), float(s["loss_db"])))
        elif "gain_db" in s:
            stages.append(budgetmod.Stage(str(s["name"]), float(s["gain_db"]), bool(s.get("amplifier", False))))
        else:
            raise NetcastError(f"budget.stages[{i}]: needs loss_db or gain_db")
    return tuple(stages)


def cmd_link(args) -> int:
    sf = _scenario_file(args)
    b = sf.budget
    stages = _stages_from(b["stages"]) if "stages" in b else budgetmod.example_link_stages()
    launch = float(b.get("launch_power", 10e-3))
    e_req = float(b.get("e_mac_required", 100e-18))
    lb = budgetmod.compute_link_budget(stages, launch, e_req)
    print(budgetmod.render_text(budgetmod.link_rows(lb), ["stage", "gain dB", "power W"]))
    print(f"received {lb.received_power:.4g} W -> {lb.achievable_rate:.4g} MAC/s per wavelength at {e_req:.3g} J/MAC")
    rows = [(name, g, p) for name, g, p in budgetmod.link_rows(lb)]
    rows.append(("rate_mac_per_s", 0.0, lb.achievable_rate))

    fs = b.get("free_space")
    configs = {}
    if isinstance(fs, str):
        configs[fs] = FREE_SPACE_PRESETS[fs]
    elif isinstance(fs, dict):
        configs["custom"] = FreeSpaceConfig(**fs)
    elif fs is None and "stages" not in b:
        configs = dict(FREE_SPACE_PRESETS)
    for name, cfg in configs.items():
        e = None if name == "mars" else float(b.get("e_mac_required", 1e-19)) if name != "custom" else e_req
        r = budgetmod.spacecraft_rate(cfg, e)
        print(f"{name}: received {friis_received_power(cfg):.4g} W/wavelength, {r.per_wavelength:.4g} MAC/s "
              f"per wavelength, {r.total:.4g} MAC/s over {r.n_wavelengths} wavelengths at {r.e_mac:.3g} J/MAC")
        rows.append((f"{name}_received_w", 0.0, r.received_power))
        rows.append((f"{name}_total_mac_per_s", 0.0, r.total))
    out = _out_dir(args)
    path = out / "link.csv"
    _write_csv(path, ["stage", "gain_db", "value"], rows)
    _write_meta(path, sf, None)
    return 0


def cmd_presets(args) -> int:
    if args.export:
        d = Path(args.export)
        d.mkdir(parents=True, exist_ok=True)
        for name, sc in SCENARIO_PRESETS.items():
            (d / f"{name}.yaml").write_text(dump_scenario(sc))
        print(f"wrote {len(SCENARIO_PRESETS)} presets to {d}")
        return 0
    for name, sc in SCENARIO_PRESETS.items():
        det = getattr(sc.detector, "name", type(sc.detector).__name__)
        print(f"{name:22s} detector={det:26s} e_mac={sc.e_mac_target:.3g} J  M={sc.window_macs}  "
              f"link={sc.link.kind}")
    d = preset_dir()
    if d is not None:
        print(f"preset directory ({PRESET_DIR_ENV}): {d}")
    return 0


def cmd_selftest(args) -> int:
    checks, ok = run_golden()
    for c in checks:
        print(c.describe())
    print(f"{sum(c.passed for c in checks)}/{len(checks)} golden checks pass")
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netcast", description="Delocalized photonic inference simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="scenario YAML file")
        p.add_argument("--preset", help="named scenario preset (default: ideal)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--threads", type=int, help="worker threads (results do not depend on this)")
        p.add_argument("--out-dir", default="netcast-out")
        return p

    p = sub.add_parser("calibrate", help="fit a modulator transfer curve")
    p.add_argument("curve", help="CSV of voltage,intensity samples")
    p.add_argument("--out", help="calibration file to write")
    p.add_argument("--out-dir", default="netcast-out")
    p.set_defaults(func=cmd_calibrate)

    p = common(sub.add_parser("infer", help="run optical inference"))
    p.add_argument("--images", type=int, help="number of test images")
    p.set_defaults(func=cmd_infer)

    p = common(sub.add_parser("sweep", help="accuracy versus energy per MAC"))
    p.add_argument("--grid", help="comma-separated e_mac values in J, ascending")
    p.add_argument("--images", type=int)
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("budget", help="client energy per MAC tables"))
    p.set_defaults(func=cmd_budget)

    p = common(sub.add_parser("link", help="optical link budgets"))
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("presets", help="list or export scenario presets")
    p.add_argument("--export", metavar="DIR", help="write every preset as YAML into DIR")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("selftest", help="check closed-form results against reference values")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except NetcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
