"""Command-line entry point: ``wearcast generate | validate | run | report``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, load_config
from .dataset import LabeledCut, load_dataset, validate_dataset, write_cut_csv, write_dataset
from .errors import ConfigError, DatasetFormatError, WearcastError
from .nn import default_reference_config, default_test_config
from .signals import preprocess
from .synth import cut_label, generate_dataset
from .train import write_loss_trace
from .transfer import ScenarioSpec, run_scenario, same_fpt

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
SEED_ENV = "WEARCAST_SEED"
MODELS = ("test", "reference")


def resolve_config(args) -> ExperimentConfig:
    """Config file, then WEARCAST_SEED, then command-line flags."""
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    env_seed = os.environ.get(SEED_ENV)
    if env_seed not in (None, ""):
        try:
            cfg = cfg.with_overrides(seed=int(env_seed))
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from exc
    return cfg.with_overrides(
        seed=getattr(args, "seed", None),
        output=getattr(args, "output", None),
        jobs=getattr(args, "jobs", None),
        window_length=getattr(args, "window_length", None),
    )


def _synthetic_cuts(cfg: ExperimentConfig) -> list[LabeledCut]:
    return [LabeledCut(rec, cut_label(meas), tuple(meas)) for rec, meas in generate_dataset(cfg.synth_config())]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---- generate


def cmd_generate(cfg: ExperimentConfig, write_csv: bool = False, out=None) -> Path:
    out = out or sys.stdout
    root = Path(cfg.output)
    cuts = _synthetic_cuts(cfg)
    meta = {"generator": "wearcast.synth", "seed": cfg.seed, "synth": cfg.to_dict()["synth"]}
    manifest = write_dataset(root, cuts, meta=meta)
    if write_csv:
        csv_dir = root / "csv"
        csv_dir.mkdir(exist_ok=True)
        for cut in cuts:
            write_cut_csv(csv_dir / f"tool{cut.record.tool_id:02d}_cut{cut.record.cut_index:03d}.csv", cut.record)
    tools = sorted({c.record.tool_id for c in cuts})
    per_fpt = Counter(c.record.conditions.f_z for c in cuts)
    print(f"wrote {manifest}", file=out)
    print(f"tools: {len(tools)}  cuts: {len(cuts)}", file=out)
    for fz in sorted(per_fpt):
        n_tools = len({c.record.tool_id for c in cuts if c.record.conditions.f_z == fz})
        print(f"  f_z={fz:g} mm: {n_tools} tools, {per_fpt[fz]} cuts", file=out)
    return manifest


# ---- validate


def cmd_validate(path, fpt_grid=None, out=None) -> int:
    out = out or sys.stdout
    diags = validate_dataset(path, fpt_grid)
    errors = [d for d in diags if d.severity == "error"]
    for d in diags:
        print(d, file=out)
    print(f"{len(errors)} violation(s), {len(diags) - len(errors)} warning(s)", file=out)
    return EXIT_INVALID if errors else EXIT_OK


# ---- run


def _chains(scenarios) -> list[list[ScenarioSpec]]:
    """Group scenarios so each partial-learning one shares a job with its base scenario."""
    groups: dict[ScenarioSpec, list[ScenarioSpec]] = {}
    for spec in scenarios:
        groups.setdefault(spec.base, []).append(spec)
    # base first inside each chain so its models can be reused
    return [sorted(chain, key=lambda s: s.partial_learning) for chain in groups.values()]


def _run_chain(samples, chain, window_length, condition_keys, train_cfg, seed):
    test_cfg = default_test_config(window_length, condition_keys)
    ref_cfg = default_reference_config(window_length)
    out, bases = [], None
    for spec in chain:
        report, trained = run_scenario(
            samples, spec, test_cfg, ref_cfg, train_cfg, seed=seed, base_models=bases if spec.partial_learning else None
        )
        if not spec.partial_learning:
            bases = trained
        out.append((spec, report, {name: m.loss_trace for name, m in trained.items()}))
    return out


def _write_scenario(root: Path, spec, report, traces) -> list[str]:
    files = [f"reports/{spec.name}.json", f"predictions/{spec.name}.csv"]
    report.write_json(root / files[0])
    report.write_predictions_csv(root / files[1])
    for name, trace in sorted(traces.items()):
        rel = f"losses/{spec.name}_{name}.csv"
        write_loss_trace(root / rel, trace)
        files.append(rel)
    return files


def cmd_run(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    root = Path(cfg.output)
    if cfg.dataset:
        cuts = load_dataset(cfg.dataset)
        source = {"kind": "dataset", "path": str(cfg.dataset), "manifest_sha256": _sha256(Path(cfg.dataset) / "manifest.json")
                  if Path(cfg.dataset).is_dir() else _sha256(Path(cfg.dataset))}
    else:
        cuts = _synthetic_cuts(cfg)
        source = {"kind": "synthetic", "seed": cfg.seed}
    fpts = {c.record.conditions.f_z for c in cuts}
    for spec in cfg.scenarios:
        for f in spec.test_fpts:
            if not any(same_fpt(f, g) for g in fpts):
                raise ConfigError(f"scenario {spec.name}: feed {f:g} not in dataset feeds {sorted(fpts)}")
    samples = [preprocess(c.record, c.label, cfg.preprocess) for c in cuts]
    for sub in ("reports", "predictions", "losses"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    print(f"{len(samples)} cuts preprocessed to {cfg.preprocess.window_length} steps", file=out)

    chains = _chains(cfg.scenarios)
    args = (cfg.preprocess.window_length, cfg.condition_keys, cfg.train_config(), cfg.seed)
    files: dict[str, list[str]] = {}
    if cfg.jobs > 1 and len(chains) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(chains))) as pool:
            futures = [pool.submit(_run_chain, samples, chain, *args) for chain in chains]
            for fut in futures:
                for spec, report, traces in fut.result():
                    files[spec.name] = _write_scenario(root, spec, report, traces)
                    print(f"  {spec.name}: done", file=out)
    else:
        for chain in chains:
            for spec, report, traces in _run_chain(samples, chain, *args):
                files[spec.name] = _write_scenario(root, spec, report, traces)
                print(f"  {spec.name}: done", file=out)

    names = [s.name for s in cfg.scenarios]
    run_manifest = {
        "wearcast_version": __version__,
        "config": cfg.to_dict() | {"output": None},
        "config_hash": cfg.content_hash(),
        "seed": cfg.seed,
        "source": source,
        "n_cuts": len(samples),
        "scenarios": names,
        "files": {n: files[n] for n in names},
    }
    _write_json(root / "run_manifest.json", run_manifest)
    summarize(root, names, out=out)
    return EXIT_OK


# ---- report


def _metric(value):
    return "" if value is None else repr(float(value))


def summarize(root, names=None, out=None) -> None:
    """(Re)write summary.csv and per_fpt.csv from the report JSONs and print a table."""
    out = out or sys.stdout
    root = Path(root)
    if names is None:
        manifest = root / "run_manifest.json"
        if manifest.is_file():
            names = json.loads(manifest.read_text())["scenarios"]
        else:
            names = sorted(p.stem for p in (root / "reports").glob("*.json"))
    if not names:
        raise DatasetFormatError(f"no reports found under {root}")
    reports = []
    for name in names:
        path = root / "reports" / f"{name}.json"
        if not path.is_file():
            raise DatasetFormatError(f"missing report {path}")
        reports.append(json.loads(path.read_text()))

    with open(root / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "model", "metric", "value"])
        for rep in reports:
            for model in MODELS:
                if model in rep["metrics"]:
                    for metric in ("rmse", "r2"):
                        w.writerow([rep["name"], model, metric, _metric(rep["metrics"][model][metric])])
            w.writerow([rep["name"], "test_vs_reference", "advantage_rmse_pct", _metric(rep["advantage_rmse_pct"])])
            w.writerow([rep["name"], "test_vs_reference", "advantage_r2_pct", _metric(rep["advantage_r2_pct"])])
    with open(root / "per_fpt.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "f_z", "model", "rmse", "r2", "n"])
        for rep in reports:
            for model in MODELS:
                for fz, m in sorted(rep["per_fpt"].get(model, {}).items(), key=lambda kv: float(kv[0])):
                    w.writerow([rep["name"], fz, model, _metric(m["rmse"]), _metric(m["r2"]), m["n"]])

    print(f"{'scenario':<16}{'model':<11}{'RMSE um':>10}{'R2':>9}", file=out)
    for rep in reports:
        for model in MODELS:
            m = rep["metrics"].get(model)
            if m:
                r2 = "n/a" if m["r2"] is None else f"{m['r2']:.3f}"
                print(f"{rep['name']:<16}{model:<11}{m['rmse']:>10.2f}{r2:>9}", file=out)
        if rep["advantage_rmse_pct"] is not None:
            print(f"{'':<16}advantage  RMSE {rep['advantage_rmse_pct']:+.1f}%", file=out)


# ---- argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wearcast",
        description="Flank-wear estimation with a condition-channel 1D CNN and feed-transfer evaluation.",
        epilog=f"Exit codes: 0 success, 1 validation failure, 2 runtime error. {SEED_ENV} overrides the config seed.",
    )
    p.add_argument("--version", action="version", version=f"wearcast {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, output_help):
        sp.add_argument("--config", metavar="FILE", help="TOML experiment config")
        sp.add_argument("--seed", type=int, help=f"global seed (beats {SEED_ENV} and the config)")
        sp.add_argument("--output", metavar="DIR", help=output_help)

    g = sub.add_parser("generate", help="write a synthetic dataset", description="Write a synthetic dataset to --output.")
    common(g, "dataset directory to create")
    g.add_argument("--window-length", type=int, metavar="N", help="model window in samples; sets how much milling is recorded")
    g.add_argument("--csv", action="store_true", help="also write one human-readable CSV per cut under csv/")

    v = sub.add_parser("validate", help="check a dataset on disk", description="Check manifest, files and labels.")
    v.add_argument("dataset", nargs="?", help="dataset directory or manifest (default: config 'dataset')")
    v.add_argument("--config", metavar="FILE", help="TOML experiment config")

    r = sub.add_parser("run", help="train and evaluate all scenarios", description="Train and evaluate every configured scenario.")
    common(r, "directory for reports and CSVs")
    r.add_argument("--jobs", type=int, metavar="N", help="scenario chains to run in parallel (default 1)")
    r.add_argument("--window-length", type=int, metavar="N", help="samples per model window (default 2000)")
    r.add_argument("dataset", nargs="?", help="dataset directory (default: config 'dataset', else synthetic)")

    s = sub.add_parser("report", help="summarize a finished run", description="Rebuild summary CSVs and print the metrics table.")
    s.add_argument("--output", metavar="DIR", required=True, help="run directory written by 'run'")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            cmd_generate(resolve_config(args), write_csv=args.csv)
            return EXIT_OK
        if args.command == "validate":
            cfg = load_config(args.config) if args.config else ExperimentConfig()
            path = args.dataset or cfg.dataset
            if not path:
                raise ConfigError("no dataset given")
            return cmd_validate(path, cfg.synth.fpt_grid)
        if args.command == "run":
            cfg = resolve_config(args)
            if args.dataset:
                cfg = cfg.with_overrides(dataset=args.dataset)
            return cmd_run(cfg)
        if args.command == "report":
            summarize(args.output)
            return EXIT_OK
    except ConfigError as exc:
        print(f"wearcast: config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (WearcastError, OSError, ValueError) as exc:
        print(f"wearcast: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
