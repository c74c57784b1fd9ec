"""Command-line front end.

Exit status: 0 success, 2 configuration error, 3 contract violation or
other domain error, 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import aging, classify, evaluate, formats, sram_model, stats, swbias
from .classify import ClassifierKind
from .config import ExperimentConfig
from .errors import ConfigError, FormatError, MalformedTrace, SramageError
from .seeding import STREAM_MORAN, child_seed

logger = logging.getLogger("sramage")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

SUMMARY_FIELDS = (
    "mean_bias", "portion_strong", "portion_weak", "weak_bias_mean",
    "portion_strong_1", "portion_strong_0", "morans_i",
)


def device_name(i: int) -> str:
    return f"dev_{i:03d}"


def _ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing {what}: {path}")
    return path


def load_config(args) -> ExperimentConfig:
    overrides = {
        "seed": args.seed,
        "out": args.out,
        "strength_threshold": getattr(args, "strength_threshold", None),
        "threshold": getattr(args, "threshold", None),
    }
    if getattr(args, "classifier", None):
        try:
            overrides["classifiers"] = [ClassifierKind.parse(args.classifier).value]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return ExperimentConfig.load(path, overrides)
    return ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def _table(rows: list) -> dict:
    """Mean, sample std and relative std per statistic over devices."""
    out = {}
    for name in SUMMARY_FIELDS:
        vals = np.array([r[name] for r in rows], dtype=float)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            out[name] = {"mean": None, "std": None, "rel_std": None}
            continue
        mean = float(vals.mean())
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out[name] = {"mean": mean, "std": std, "rel_std": std / abs(mean) if mean else None}
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(cfg: ExperimentConfig, args) -> int:
    if cfg.n_devices < 1:
        raise ConfigError("n_devices must be at least 1 (empty run)")
    params = cfg.generative_params()
    out = Path(cfg.out)
    dirs = {k: _ensure_dir(out / k) for k in ("devices", "snapshots", "bias_maps")}
    rows = []
    for i in range(cfg.n_devices):
        name = device_name(i)
        dev = sram_model.synth_device(params, child_seed(cfg.seed, evaluate.STREAM_DEVICE, evaluate.GROUP_BASELINE, i))
        snap = sram_model.sample_power_on(
            dev, cfg.k_samples, child_seed(cfg.seed, evaluate.STREAM_SAMPLE, evaluate.GROUP_BASELINE, i),
            device_id=name,
        )
        m = sram_model.estimate_bias_map(snap)
        formats.save_device(dirs["devices"] / f"{name}.npz", dev)
        formats.write_snapshot(dirs["snapshots"] / f"{name}.snap", snap)
        formats.write_bias_map_csv(dirs["bias_maps"] / f"{name}.csv", m)
        s = sram_model.summarize(
            m, cfg.grid_width, cfg.permutations, child_seed(cfg.seed, STREAM_MORAN, i), binary=cfg.moran_binary
        )
        rows.append({"device_id": name, **s.to_dict()})
        logger.info("%s mean bias %.4f strong %.4f", name, s.mean_bias, s.portion_strong)
    formats.write_json(out / "summary.json", {
        "params": params.to_dict(),
        "devices": rows,
        "table": _table(rows),
    })
    return EXIT_OK


def cmd_profile(cfg: ExperimentConfig, args) -> int:
    if args.trace:
        trace = formats.read_trace(_require(Path(args.trace), "trace file"))
        profiles = {Path(args.trace).stem: swbias.compute_bias_profile(trace)}
    else:
        profiles = cfg.software_profiles()
    out = _ensure_dir(Path(cfg.out) / "profiles")
    summary = {}
    for name, p in profiles.items():
        formats.write_profile_csv(out / f"{name}.csv", p)
        formats.write_heatmap_csv(out / f"{name}_heatmap.csv", p, cfg.grid_width)
        mean_bias, mean_strength, use = swbias.profile_summary(p)
        usable = swbias.select_usable_bits(p, cfg.strength_threshold)
        summary[name] = {
            "mean_bias": mean_bias,
            "mean_strength": mean_strength,
            "sram_use": use,
            "usable_fraction": float(np.mean((usable == swbias.Expect.EXPECT0) | (usable == swbias.Expect.EXPECT1))),
            "strength_threshold": cfg.strength_threshold,
        }
    formats.write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_age(cfg: ExperimentConfig, args) -> int:
    out = Path(cfg.out)
    dev_dir = _require(Path(args.devices) if args.devices else out / "devices", "device directory (run 'synth' first)")
    paths = sorted(dev_dir.glob("*.npz"))
    if not paths:
        raise FileNotFoundError(f"missing device files (*.npz) in {dev_dir}")
    devices = {p.stem: formats.load_device(p) for p in paths}
    aging_cfg = cfg.aging_config(cfg.generative_params())
    schedule = cfg.aging_schedule()
    checkpoints = [0.0] + list(schedule.checkpoints)
    formats.write_schedule_csv(_ensure_dir(out / "aged") / "schedule.csv", checkpoints)
    for p_index, (pname, prof) in enumerate(cfg.software_profiles().items()):
        pdir = _ensure_dir(out / "aged" / pname)
        for d_index, (dname, dev) in enumerate(devices.items()):
            for c, t in enumerate(checkpoints):
                dev = aging.apply_aging(dev, prof, t - dev.age_years, aging_cfg)
                seed = child_seed(cfg.seed, evaluate.STREAM_SAMPLE, evaluate.GROUP_AGED, p_index, d_index, c)
                snap = sram_model.sample_power_on(dev, cfg.k_samples, seed, device_id=dname, label=f"c{c:02d}")
                formats.write_snapshot(pdir / f"{dname}_c{c:02d}.snap", snap)
            if cfg.rest_days > 0:
                dev = aging.apply_recovery(dev, cfg.rest_days, aging_cfg)
                seed = child_seed(cfg.seed, evaluate.STREAM_SAMPLE, evaluate.GROUP_AGED, p_index, d_index, len(checkpoints))
                snap = sram_model.sample_power_on(dev, cfg.k_samples, seed, device_id=dname, label="rested")
                formats.write_snapshot(pdir / f"{dname}_rested.snap", snap)
            formats.save_device(pdir / f"{dname}.npz", dev)
    formats.write_json(out / "aged" / "aging_config.json", {
        "amplitude": aging_cfg.amplitude,
        "time_exponent": aging_cfg.time_exponent,
        "permanent_fraction": aging_cfg.permanent_fraction,
        "recovery_time_constant": aging_cfg.recovery_time_constant,
        "recovery_saturation": aging_cfg.recovery_saturation,
        "acceleration_factor": aging.acceleration_factor(cfg.acceleration_params()),
    })
    return EXIT_OK


def _read_map(path: Path, k_samples: int) -> sram_model.CellBiasMap:
    if path.suffix == ".snap":
        return sram_model.estimate_bias_map(formats.read_snapshot(path))
    return formats.read_bias_map_csv(path, k_samples)


def _expected(cfg: ExperimentConfig, kind: ClassifierKind, profile_name: Optional[str], n_cells: int):
    if not kind.uses_software:
        return None
    profiles = cfg.software_profiles()
    if profile_name is None:
        if len(profiles) != 1:
            raise ConfigError(f"{kind.value} needs --profile (choose from {sorted(profiles)})")
        profile_name = next(iter(profiles))
    if profile_name not in profiles:
        raise ConfigError(f"unknown profile {profile_name!r}; have {sorted(profiles)}")
    return swbias.select_usable_bits(profiles[profile_name], cfg.strength_threshold)


def cmd_classify(cfg: ExperimentConfig, args) -> int:
    kind = cfg.classifier_kinds()[0]
    base_dir = _require(Path(args.baseline) if args.baseline else Path(cfg.out) / "snapshots", "baseline directory")
    base_paths = sorted(list(base_dir.glob("*.snap")) or list(base_dir.glob("*.csv")))
    if not base_paths:
        raise FileNotFoundError(f"missing baseline snapshots (*.snap or bias-map *.csv) in {base_dir}")
    if not args.dut:
        raise ConfigError("give at least one device-under-test file")
    baseline = [_read_map(p, cfg.k_samples) for p in base_paths]
    expected = _expected(cfg, kind, args.profile, baseline[0].n_cells)
    band_size = cfg.band_size

    def score(m):
        bands = sram_model.infer_band_map(m, band_size) if kind.uses_bands else None
        return classify.score_device(m, kind, expected, bands)

    dist = classify.fit_new_scores([score(m)[0] for m in baseline])
    out = _ensure_dir(Path(cfg.out) / "classify")
    rows = []
    for path in args.dut:
        m = _read_map(_require(Path(path), "device-under-test file"), cfg.k_samples)
        s, considered = score(m)
        res = classify.ClassificationResult(s, kind, considered, cfg.threshold, classify.decide(s, dist, cfg.threshold))
        device_id = Path(path).stem
        formats.write_json(out / f"{device_id}.json", {
            "classifier_kind": kind.value,
            "score": res.score,
            "cells_considered": res.cells_considered,
            "T": res.threshold_T,
            "new_mean": dist.mean,
            "new_std": dist.std_dev,
            "label": res.label,
        })
        rows.append((device_id, res.score, res.label))
        print(f"{device_id}\t{res.score}\t{res.label}")
    with open(out / "batch.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["device_id", "score", "label"])
        w.writerows(rows)
    formats.write_json(out / "distribution.json", dist.to_dict())
    return EXIT_OK


def _write_reports(directory: Path, dist, reports, recovered=None) -> None:
    _ensure_dir(directory)
    for c, r in enumerate(reports):
        formats.write_roc_csv(directory / f"roc_c{c:02d}.csv", r.roc.fpr, r.roc.tpr)
    with open(directory / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["checkpoint_years", "auroc", "accuracy", "tpr", "best_T"])
        for r in reports:
            w.writerow([repr(r.checkpoint), repr(r.roc.auroc), repr(r.accuracy_at_best_T),
                        repr(r.tpr_at_best_T), repr(r.best_T)])
    doc = {"distribution": dist.to_dict() if dist is not None else None,
           "reports": [r.to_dict() for r in reports]}
    if recovered is not None:
        doc["recovered"] = recovered.to_dict()
    formats.write_json(directory / "report.json", doc)


def cmd_evaluate(cfg: ExperimentConfig, args) -> int:
    params = cfg.generative_params()
    aging_cfg = cfg.aging_config(params)
    schedule = cfg.aging_schedule()
    profiles = cfg.software_profiles()
    kinds = cfg.classifier_kinds()
    kw = dict(k_samples=cfg.k_samples, n_baseline=cfg.n_baseline, n_aged=cfg.n_aged, n_virtual=cfg.n_virtual,
              strength_threshold=cfg.strength_threshold, resample=cfg.resample, workers=cfg.workers)
    out = _ensure_dir(Path(cfg.out) / "evaluate")
    if args.sweep_recovery:
        rho, drops = evaluate.sweep_permanent_fraction(params, aging_cfg, profiles, schedule, kinds, cfg.seed, **kw)
        formats.write_json(out / "recovery_sweep.json", {
            "permanent_fraction": rho,
            "drops": {repr(k): v for k, v in drops.items()},
            "target_drop": evaluate.RECOVERY_TARGET_DROP,
        })
        aging_cfg = replace(aging_cfg, permanent_fraction=rho)
    result = evaluate.run_pipeline(params, aging_cfg, profiles, schedule, kinds, cfg.seed,
                                   rest_days=cfg.rest_days, **kw)
    formats.write_schedule_csv(out / "schedule.csv", result.checkpoints)
    formats.write_json(out / "setup.json", {
        "params": params.to_dict(),
        "aging": dict(aging_cfg.__dict__),
        "acceleration_factor": aging.acceleration_factor(cfg.acceleration_params()),
    })
    for o in result.outcomes:
        _write_reports(out / o.profile_name / o.kind.value, o.dist, o.reports, o.recovered)
        last = o.reports[-1]
        print(f"{o.profile_name}\t{o.kind.value}\tauroc={last.roc.auroc:.4f}\taccuracy={last.accuracy_at_best_T:.4f}")
    for kind, reports in result.batch.items():
        _write_reports(out / "batch" / kind.value, result.outcome(kind).dist, reports)
    return EXIT_OK


def _read_numbers(path: Path) -> np.ndarray:
    vals = []
    for row in csv.reader(Path(path).read_text().splitlines()):
        for cell in row:
            cell = cell.strip()
            if not cell:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                if vals:
                    raise FormatError(f"{path}: non-numeric value {cell!r}") from None
                # a header row before any numbers
    return np.array(vals)


def cmd_stats(cfg: Optional[ExperimentConfig], args) -> int:
    if args.test == "moran":
        if cfg is None:
            raise ConfigError("moran needs a seed (--seed or --config)")
        path = _require(Path(args.files[0]), "input file")
        if path.suffix in (".snap", ".csv") and _looks_like_map(path):
            m = _read_map(path, cfg.k_samples)
            values = m.majority if args.binary else m.bias
        else:
            values = _read_numbers(path)
        i, p = sram_model.morans_i(values, args.grid_width or cfg.grid_width, cfg.permutations,
                                   child_seed(cfg.seed, STREAM_MORAN))
        result = {"morans_i": i, "p_value": p, "n": int(np.size(values))}
    elif args.test == "normality":
        w, p = stats.shapiro_wilk(_read_numbers(_require(Path(args.files[0]), "input file")))
        result = {"W": w, "p_value": p}
    else:
        if len(args.files) != 2:
            raise ConfigError("welch needs two input files")
        a, b = (_read_numbers(_require(Path(f), "input file")) for f in args.files)
        t, p, df = stats.welch_t_test(a, b)
        result = {"t": t, "p_value": p, "df": df}
    text = json.dumps(formats._finite(result), sort_keys=True)
    print(text)
    if args.out:
        formats.write_json(_ensure_dir(Path(args.out)) / f"stats_{args.test}.json", result)
    return EXIT_OK


def _looks_like_map(path: Path) -> bool:
    if path.suffix == ".snap":
        return True
    with open(path) as fh:
        return fh.readline().strip().startswith("cell_index")


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--classifier", help="classifier kind, e.g. ZeroKnowledge or SoftwareAware")
    common.add_argument("--threshold", type=float, help="decision threshold T in standard deviations")
    common.add_argument("--strength-threshold", type=float, dest="strength_threshold")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="sramage", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="synthesize new devices and their bias maps")
    p = sub.add_parser("profile", parents=[common], help="software bias profiles from traces or config")
    p.add_argument("--trace", help="write trace file (overrides config profiles)")
    p = sub.add_parser("age", parents=[common], help="age synthesized devices under each profile")
    p.add_argument("--devices", help="directory of device .npz files (default <out>/devices)")
    p = sub.add_parser("classify", parents=[common], help="score devices against a new-device baseline")
    p.add_argument("dut", nargs="*", help="snapshot (.snap) or bias-map (.csv) files to classify")
    p.add_argument("--baseline", help="directory of new-device snapshots (default <out>/snapshots)")
    p.add_argument("--profile", help="profile name for software-aware kinds")
    p = sub.add_parser("evaluate", parents=[common], help="run the full Monte Carlo evaluation pipeline")
    p.add_argument("--sweep-recovery", action="store_true",
                   help="pick the permanent fraction that matches the recovery target first")
    p = sub.add_parser("stats", parents=[common], help="Moran's I, Shapiro-Wilk or Welch on files")
    p.add_argument("test", choices=("moran", "normality", "welch"))
    p.add_argument("files", nargs="+")
    p.add_argument("--grid-width", type=int, dest="grid_width")
    p.add_argument("--binary", action="store_true", help="Moran's I on majority values")
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "profile": cmd_profile,
    "age": cmd_age,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "stats":
            cfg = load_config(args) if (args.config or args.seed is not None) else None
            return cmd_stats(cfg, args)
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError, MalformedTrace) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SramageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
