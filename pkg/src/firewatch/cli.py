"""Command-line surface tying the pipeline together.

Subcommands: ``synth`` (generate synthetic bundles + catalog), ``build-dataset``
(extract/split/normalize), ``train`` (one training run), ``evaluate`` (score a
checkpoint) and ``experiment`` (scheduler x seed grid, Table-style report).
Report paths write delimited output plus a rendered PNG figure next to it.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import dataset as ds
from . import synth as sy
from .core import write_crop_bundle
from .metrics import render_table, results_csv
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .optim import SCHEDULER_KINDS
from .report import plot_history, plot_results
from .training import LoadedDataset, RunConfig, evaluate_split, run_experiment, train


def _parse_pair(text: str, sep: str, what: str) -> tuple[int, int]:
    parts = text.lower().split(sep)
    if len(parts) != 2:
        raise ValueError(f"{what} must look like '8{sep}8', got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"ratios must be 'train,val,test', got {text!r}")
    return parts[0], parts[1], parts[2]


def _load_model_config(path: str | None) -> ModelConfig:
    if path is None:
        return ModelConfig()
    import json

    return ModelConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _load_run_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.from_json(Path(path).read_text(encoding="utf-8"))


def _cmd_synth(args: argparse.Namespace) -> int:
    rows, cols = _parse_pair(args.grid, "x", "--grid")
    config = sy.SynthConfig(
        events=args.events,
        rows=rows,
        cols=cols,
        steps=args.steps,
        sigma=args.sigma,
        amplitude=args.amplitude,
        diurnal_amplitude=args.diurnal,
        seed=args.seed,
    )
    bundles, events = sy.synth_generate(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for bundle in bundles:
        write_crop_bundle(bundle, out / bundle.event_id)
    sy.write_event_catalog(events, out / sy.CATALOG_FILE)
    print(f"wrote {len(bundles)} bundles + {sy.CATALOG_FILE} to {out}")
    return 0


def _cmd_build_dataset(args: argparse.Namespace) -> int:
    lat_bins, lon_bins = _parse_pair(args.bins, "x", "--bins")
    events = sy.read_event_catalog(args.events)
    manifest = ds.build_dataset(
        events,
        bundle_dir=args.crops,
        out_dir=args.out,
        neg_ratio=args.neg_ratio,
        buffer_cells=args.buffer,
        ratios=_parse_ratios(args.ratios),
        lat_bins=lat_bins,
        lon_bins=lon_bins,
        seed=args.seed,
    )
    counts = manifest.window_counts
    print(
        f"dataset at {args.out}: "
        + ", ".join(f"{split}={counts.get(split, 0)} windows" for split in ds.SPLITS)
    )
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    run = _load_run_config(args.run_config)
    if args.scheduler:
        run = replace(run, scheduler=args.scheduler)
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if args.epochs is not None:
        run = replace(run, epochs=args.epochs)
    if args.ssl_only:
        run = replace(run, ssl_only=True)
    model_config = _load_model_config(args.model_config)

    dataset = LoadedDataset.load(args.dataset)
    model, history = train(run, dataset, model_config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "checkpoint")
    (out / "history.csv").write_text(history.to_csv(), encoding="utf-8")
    plot_history(history, out / "history.png")
    final = history.epochs[-1]
    print(
        f"trained {run.epochs} epochs ({run.scheduler}, seed {run.seed}): "
        f"l_tot={final.l_tot:.4f} val_f1={final.val_f1:.4f}; artifacts in {out}"
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = LoadedDataset.load(args.dataset)
    score, counts = evaluate_split(model, dataset, args.split)
    print(
        f"split={args.split} f1={score:.4f} "
        f"tp={counts.tp} fp={counts.fp} fn={counts.fn} tn={counts.tn}"
    )
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    schedulers = [s.strip() for s in args.schedulers.split(",") if s.strip()]
    seeds = tuple(int(s) for s in args.seeds.split(","))
    run = _load_run_config(args.run_config)
    if args.epochs is not None:
        run = replace(run, epochs=args.epochs)
    model_config = _load_model_config(args.model_config)

    dataset = LoadedDataset.load(args.dataset)
    results = run_experiment(dataset, schedulers, seeds, model_config, run)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    table = render_table(results)
    out.write_text(table, encoding="utf-8")
    out.with_suffix(".csv").write_text(results_csv(results), encoding="utf-8")
    plot_results(results, out.with_suffix(".png"))
    print(table, end="")
    print(f"report written to {out} (+ .csv, .png)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firewatch",
        description="Hotspot classification from geostationary pixel timeseries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic crop bundles + event catalog")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--events", type=int, default=12)
    p.add_argument("--grid", default="8x8", help="rows x cols, e.g. 8x8")
    p.add_argument("--steps", type=int, default=192, help="timesteps per bundle")
    p.add_argument("--sigma", type=float, default=1.0, help="white-noise std")
    p.add_argument("--amplitude", type=float, default=3.0, help="infrared offset in the AoI")
    p.add_argument("--diurnal", type=float, default=1.0, help="diurnal-cycle amplitude")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("build-dataset", help="extract labeled windows and split by event")
    p.add_argument("--events", required=True, help="event catalog JSON")
    p.add_argument("--crops", required=True, help="directory holding one bundle per event")
    p.add_argument("--out", required=True)
    p.add_argument("--neg-ratio", type=float, default=1.0)
    p.add_argument("--buffer", type=int, default=2)
    p.add_argument("--ratios", default="0.7,0.15,0.15")
    p.add_argument("--bins", default="1x1", help="lat x lon stratification bins")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_build_dataset)

    p = sub.add_parser("train", help="run one training job")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model-config", help="JSON model configuration")
    p.add_argument("--run-config", help="JSON run configuration")
    p.add_argument("--scheduler", choices=SCHEDULER_KINDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--ssl-only", action="store_true",
                   help="optimize reconstruction + land cover only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on one split")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=ds.SPLITS, default="test")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="scheduler x seed grid with a summary table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schedulers", default=",".join(SCHEDULER_KINDS))
    p.add_argument("--seeds", default="17,42,91")
    p.add_argument("--model-config", help="JSON model configuration")
    p.add_argument("--run-config", help="JSON run configuration")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True, help="table file; .csv/.png written alongside")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # surface a diagnostic, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
