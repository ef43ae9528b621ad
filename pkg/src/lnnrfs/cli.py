"""Command-line front end: simulate, export, train, track, eval, mc.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
``MANEUVER_TRACK_SEED`` overrides ``--seed`` wherever a seed is accepted.
Monte-Carlo trial ``i`` uses seed ``seed + i``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__
from .config import from_dict, load_json
from .errors import ConfigError, ContractError, CorruptModelError
from .gm import MeasurementModel, TrackerConfig
from .logs import read_estimates, read_scans, read_truth, write_estimates, write_scans, write_truth
from .ltc import load_model, save_model
from .metrics import aggregate_runs, gospa_series, write_gospa_csv
from .pipeline import FILTERS, run_filter
from .plot import line_plot_svg
from .scenario import export_training_set, generate_measurements, generate_truth, load_scenario
from .training import TrainingConfig, load_datasets, save_datasets, train

SEED_ENV = "MANEUVER_TRACK_SEED"


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    configs: dict
    seed: int | None
    version: str
    output_dir: str
    duration_s: float = 0.0
    outputs: list = field(default_factory=list)

    def write(self, path: Path) -> None:
        missing = [o for o in self.outputs if not (Path(self.output_dir) / o).exists()]
        if missing:
            raise RuntimeError(f"manifest lists missing outputs {missing}")
        _atomic_write(path, json.dumps(asdict(self), indent=2) + "\n")


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return args.seed


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _tracker_config(path) -> TrackerConfig:
    if path is None:
        return TrackerConfig()
    return from_dict(TrackerConfig, load_json(_require_file(path)), where=str(path))


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ---------------------------------------------------------------

def cmd_simulate(args) -> RunManifest:
    cfg = load_scenario(_require_file(args.scenario))
    seed = _seed(args)
    out = _outdir(args.out)
    truth = generate_truth(cfg)
    write_truth(out / "truth.jsonl", truth)
    write_scans(out / "scans.jsonl", generate_measurements(truth, cfg, seed=seed))
    return RunManifest("simulate", {"scenario": str(args.scenario)}, seed, __version__, str(out),
                       outputs=["truth.jsonl", "scans.jsonl"])


def cmd_export(args) -> RunManifest:
    seed = _seed(args)
    out = _outdir(args.out)
    tr, te = export_training_set(args.n_train, args.n_test, seed=seed)
    save_datasets(out / "dataset.jsonl", tr, te)
    return RunManifest("export", {}, seed, __version__, str(out), outputs=["dataset.jsonl"])


def cmd_train(args) -> RunManifest:
    data = load_datasets(_require_file(args.dataset))
    if "train" not in data:
        raise ConfigError(f"{args.dataset}: no records with split 'train'")
    cfg_dict = load_json(_require_file(args.config)) if args.config else {}
    if args.epochs is not None:
        cfg_dict["epochs"] = args.epochs
    if args.seed is not None or os.environ.get(SEED_ENV) is not None:
        cfg_dict["seed"] = _seed(args)
    cfg = from_dict(TrainingConfig, cfg_dict, where=str(args.config or "training config"))
    out = _outdir(args.out)
    model, hist = train(data["train"], cfg, test=data.get("test"))
    save_model(model, out / "model.json")
    lines = ["epoch,train_mse,test_mse"]
    lines += [f"{e},{tr!r},{'' if te is None else repr(te)}" for e, tr, te in hist.rows()]
    _atomic_write(out / "loss.csv", "\n".join(lines) + "\n")
    return RunManifest("train", {"dataset": str(args.dataset), "config": args.config}, cfg.seed,
                       __version__, str(out), outputs=["model.json", "loss.csv"])


def cmd_track(args) -> RunManifest:
    if args.filter.startswith("lnn") and args.model is None:
        raise UsageError(f"--filter {args.filter} requires --model")
    scans = read_scans(_require_file(args.scans))
    scenario = load_scenario(_require_file(args.scenario))
    cfg = _tracker_config(args.config)
    model = load_model(_require_file(args.model)) if args.model else None
    out = _outdir(args.out)
    est = run_filter(args.filter, scans, MeasurementModel.from_scenario(scenario), cfg, model)
    name = f"estimates_{args.filter}.jsonl"
    write_estimates(out / name, [s.t for s in scans], est)
    return RunManifest("track", {"scans": str(args.scans), "scenario": str(args.scenario),
                                 "config": args.config, "model": args.model},
                       None, __version__, str(out), outputs=[name])


def _parse_estimate_arg(text: str) -> tuple[str, Path]:
    if "=" in text:
        name, path = text.split("=", 1)
        return name, Path(path)
    p = Path(text)
    return p.stem.removeprefix("estimates_"), p


def _series_for(truth, path, c, p):
    times, est = read_estimates(_require_file(path))
    if len(times) != len(truth):
        raise ContractError(f"{path}: {len(times)} scans but truth has {len(truth)}")
    return gospa_series([truth.positions(k) for k in range(len(truth))], [e[:, :2] for e in est],
                        truth.times, c=c, p=p)


def _trial_dirs(runs_dir: Path) -> list[Path]:
    dirs = sorted(d for d in runs_dir.iterdir() if d.is_dir() and (d / "truth.jsonl").is_file())
    if not dirs:
        raise UsageError(f"{runs_dir}: no trial directories with truth.jsonl")
    return dirs


def evaluate_runs(runs_dir: Path, filters, c=100.0, p=1.0):
    """Aggregate GOSPA over ``runs_dir/*/estimates_<filter>.jsonl``."""
    aggs = {}
    dirs = _trial_dirs(runs_dir)
    truths = [read_truth(d / "truth.jsonl") for d in dirs]
    for f in filters:
        aggs[f] = aggregate_runs([_series_for(t, d / f"estimates_{f}.jsonl", c, p)
                                  for t, d in zip(truths, dirs)])
    return aggs


def _write_report(out: Path, aggs, title: str) -> list[str]:
    write_gospa_csv(out / "gospa.csv", aggs)
    svg = line_plot_svg({f: (a.times, a.mean_total) for f, a in aggs.items()}, title=title)
    (out / "gospa.svg").write_text(svg)
    summary = {f: {"runs": a.runs, **a.time_average()} for f, a in aggs.items()}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return ["gospa.csv", "gospa.svg", "summary.json"]


def cmd_eval(args) -> RunManifest:
    out = _outdir(args.out)
    if args.runs_dir:
        runs = Path(args.runs_dir)
        if not runs.is_dir():
            raise UsageError(f"no such directory: {runs}")
        filters = args.filters.split(",") if args.filters else sorted(
            {p.stem.removeprefix("estimates_") for d in _trial_dirs(runs)
             for p in d.glob("estimates_*.jsonl")})
        aggs = evaluate_runs(runs, filters, args.c, args.p)
    else:
        if not args.truth or not args.estimates:
            raise UsageError("eval needs TRUTH and at least one estimate log, or --runs-dir")
        truth = read_truth(_require_file(args.truth))
        aggs = {}
        for text in args.estimates:
            name, path = _parse_estimate_arg(text)
            aggs[name] = aggregate_runs([_series_for(truth, path, args.c, args.p)])
    outputs = _write_report(out, aggs, f"GOSPA (c={args.c:g}, p={args.p:g})")
    return RunManifest("eval", {"truth": args.truth, "runs_dir": args.runs_dir}, None,
                       __version__, str(out), outputs=outputs)


def _mc_trial(job):
    scenario_path, config_path, model_path, filters, seed, trial_dir = job
    scenario = load_scenario(scenario_path)
    cfg = _tracker_config(config_path)
    model = load_model(model_path) if model_path else None
    trial_dir = Path(trial_dir)
    trial_dir.mkdir(parents=True, exist_ok=True)
    truth = generate_truth(scenario)
    scans = generate_measurements(truth, scenario, seed=seed)
    write_truth(trial_dir / "truth.jsonl", truth)
    write_scans(trial_dir / "scans.jsonl", scans)
    mm = MeasurementModel.from_scenario(scenario)
    for f in filters:
        est = run_filter(f, scans, mm, cfg, model)
        write_estimates(trial_dir / f"estimates_{f}.jsonl", [s.t for s in scans], est)
    return str(trial_dir)


def cmd_mc(args) -> RunManifest:
    filters = args.filters.split(",")
    bad = [f for f in filters if f not in FILTERS]
    if bad:
        raise UsageError(f"unknown filters {bad}; choose from {', '.join(FILTERS)}")
    if any(f.startswith("lnn") for f in filters) and args.model is None:
        raise UsageError("lnn filters require --model")
    if args.trials < 1 or args.jobs < 1:
        raise UsageError("--trials and --jobs must be >= 1")
    _require_file(args.scenario)
    load_scenario(args.scenario)
    _tracker_config(args.config)
    if args.model:
        load_model(_require_file(args.model))
    seed = _seed(args)
    out = _outdir(args.out)
    jobs = [(args.scenario, args.config, args.model, filters, seed + i, str(out / f"trial_{i:03d}"))
            for i in range(args.trials)]
    if args.jobs == 1:
        for j in jobs:
            _mc_trial(j)
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_mc_trial, jobs))
    aggs = evaluate_runs(out, filters, args.c, args.p)
    outputs = _write_report(out, aggs, f"Mean GOSPA over {args.trials} trials")
    outputs += [f"trial_{i:03d}/estimates_{f}.jsonl" for i in range(args.trials) for f in filters]
    return RunManifest("mc", {"scenario": str(args.scenario), "config": args.config,
                              "model": args.model}, seed, __version__, str(out), outputs=outputs)


# -- parser -----------------------------------------------------------------

def default_config_path(name: str) -> str:
    """Path of a bundled JSON file (``scenario2.json``, ``tracker_scenario1.json``, ...)."""
    return str(resources.files("lnnrfs") / "data" / name)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lnnrfs", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="ground truth and measurement logs for a scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export", help="randomized one-step training pairs")
    p.add_argument("--n-train", type=int, default=50_000)
    p.add_argument("--n-test", type=int, default=3_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("train", help="fit the LTC motion model")
    p.add_argument("dataset")
    p.add_argument("--config", help="training JSON (defaults built in)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="run one filter over a scan log")
    p.add_argument("scans")
    p.add_argument("--filter", required=True, choices=FILTERS)
    p.add_argument("--scenario", required=True, help="scenario JSON for the sensor model")
    p.add_argument("--model")
    p.add_argument("--config", help="tracker JSON (defaults built in)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="GOSPA CSV and SVG plot")
    p.add_argument("truth", nargs="?")
    p.add_argument("estimates", nargs="*", help="estimate logs, optionally NAME=PATH")
    p.add_argument("--runs-dir", help="directory of trial subdirectories to aggregate")
    p.add_argument("--filters", help="comma-separated filter names for --runs-dir")
    p.add_argument("--c", type=float, default=100.0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mc", help="Monte-Carlo trials with aggregated GOSPA")
    p.add_argument("scenario")
    p.add_argument("--filters", default="lnn-phd,cv-phd")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--model")
    p.add_argument("--config")
    p.add_argument("--c", type=float, default=100.0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mc)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        manifest = args.func(args)
    except (UsageError, ConfigError, ContractError, CorruptModelError, FileNotFoundError) as exc:
        print(f"lnnrfs {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"lnnrfs {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    manifest.duration_s = round(time.perf_counter() - start, 3)
    manifest.write(Path(manifest.output_dir) / f"manifest_{args.command}.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
