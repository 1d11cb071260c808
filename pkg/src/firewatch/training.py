"""Training loop, run configuration, history and the seed-averaged experiment runner.

Determinism contract: given (seed, config, dataset), training produces
byte-identical checkpoints and identical histories. All randomness flows
through numpy PCG64 streams — parameter init from ``seed``, shuffling and
mask sampling from ``[seed, 1]`` — torch is used only for deterministic
tensor math, and the loop runs single-threaded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
import torch

from .dataset import SPLITS, DatasetManifest, load_manifest, load_split
from .core import PixelTimeseries
from .losses import loss_cls, loss_eo, loss_lc, total_loss
from .metrics import ConfusionCounts, ResultRow, ResultTable, confusion, f1
from .model import (
    HotspotMAE,
    ModelConfig,
    init_params,
    masks_to_tensors,
    pack_batch,
    predict_probs,
    sample_mask,
)
from .optim import SCHEDULER_KINDS, AdamState, SchedulerConfig, adam_step, scheduler_lr

HISTORY_COLUMNS = ("epoch", "lr", "l_eo", "l_lc", "l_cls", "l_tot", "val_f1")


@dataclass(frozen=True)
class RunConfig:
    epochs: int = 100
    base_lr: float = 1e-3
    batch_size: int = 32
    scheduler: str = "cosine"
    scheduler_params: SchedulerConfig = field(default_factory=SchedulerConfig)
    seed: int = 17
    mask_ratio: float = 0.75
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    ssl_only: bool = False  # drop the classification term from the objective

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.scheduler not in SCHEDULER_KINDS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError("mask_ratio outside [0, 1]")

    def to_json(self) -> str:
        payload = {
            "epochs": self.epochs,
            "base_lr": self.base_lr,
            "batch_size": self.batch_size,
            "scheduler": self.scheduler,
            "scheduler_params": {
                "step_gamma": self.scheduler_params.step_gamma,
                "step_size": self.scheduler_params.step_size,
                "warmup_epochs": self.scheduler_params.warmup_epochs,
            },
            "seed": self.seed,
            "mask_ratio": self.mask_ratio,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "ssl_only": self.ssl_only,
        }
        return json.dumps(payload, indent=2)

    @staticmethod
    def from_json(text: str) -> "RunConfig":
        payload = json.loads(text)
        sched = payload.get("scheduler_params", {})
        return RunConfig(
            epochs=int(payload.get("epochs", 100)),
            base_lr=float(payload.get("base_lr", 1e-3)),
            batch_size=int(payload.get("batch_size", 32)),
            scheduler=payload.get("scheduler", "cosine"),
            scheduler_params=SchedulerConfig(
                step_gamma=float(sched.get("step_gamma", 0.1)),
                step_size=int(sched.get("step_size", 30)),
                warmup_epochs=int(sched.get("warmup_epochs", 10)),
            ),
            seed=int(payload.get("seed", 17)),
            mask_ratio=float(payload.get("mask_ratio", 0.75)),
            beta1=float(payload.get("beta1", 0.9)),
            beta2=float(payload.get("beta2", 0.999)),
            eps=float(payload.get("eps", 1e-8)),
            ssl_only=bool(payload.get("ssl_only", False)),
        )


class EpochStats(NamedTuple):
    lr: float
    l_eo: float
    l_lc: float
    l_cls: float
    l_tot: float
    val_f1: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epochs)

    def to_csv(self) -> str:
        lines = [",".join(HISTORY_COLUMNS)]
        for i, row in enumerate(self.epochs):
            lines.append(
                f"{i},{row.lr!r},{row.l_eo!r},{row.l_lc!r},{row.l_cls!r},"
                f"{row.l_tot!r},{row.val_f1!r}"
            )
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str) -> "TrainHistory":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if lines[0] != ",".join(HISTORY_COLUMNS):
            raise ValueError(f"unexpected history header {lines[0]!r}")
        rows = []
        for ln in lines[1:]:
            cells = ln.split(",")
            rows.append(EpochStats(*(float(c) for c in cells[1:])))
        return TrainHistory(rows)


@dataclass
class LoadedDataset:
    """Manifest plus the per-split windows, as read from a dataset directory."""

    manifest: DatasetManifest
    series: dict[str, list[PixelTimeseries]]

    @staticmethod
    def load(dataset_dir: str | Path) -> "LoadedDataset":
        dataset_dir = Path(dataset_dir)
        return LoadedDataset(
            manifest=load_manifest(dataset_dir),
            series={split: load_split(dataset_dir, split) for split in SPLITS},
        )


def evaluate_split(
    model: HotspotMAE, dataset: LoadedDataset, split: str, threshold: float = 0.5
) -> tuple[float, ConfusionCounts]:
    """Inference-mode (empty mask) F1 and confusion counts over one split."""
    series = dataset.series[split]
    probs = predict_probs(model, series, dataset.manifest)
    counts = confusion([float(p) for p in probs], [s.label for s in series], threshold)
    return f1(counts), counts


def train(
    run: RunConfig, dataset: LoadedDataset, model_config: ModelConfig
) -> tuple[HotspotMAE, TrainHistory]:
    """Optimize the joint objective for ``run.epochs`` epochs.

    Each epoch: shuffle the train windows, batch them in order, draw a fresh
    mask per sample, minimize eo + lc + cls (eo + lc with ``ssl_only``), then
    score validation F1 under an empty mask. The recorded l_tot is always the
    full three-term sum. The final-epoch model is returned — no early stopping.
    """
    train_series = dataset.series["train"]
    val_series = dataset.series["validation"]
    if not train_series:
        raise ValueError("train split is empty")
    if not val_series:
        raise ValueError("validation split is empty")

    torch.set_num_threads(1)  # keeps two runs byte-identical
    manifest = dataset.manifest
    model = init_params(model_config, run.seed)
    params = dict(model.named_parameters())
    state = AdamState.for_params(params)
    rng = np.random.default_rng([run.seed, 1])

    n = len(train_series)
    history = TrainHistory()
    for epoch in range(run.epochs):
        lr = scheduler_lr(run.scheduler, epoch, run.epochs, run.base_lr, run.scheduler_params)
        perm = rng.permutation(n)
        sums = np.zeros(4)
        for lo in range(0, n, run.batch_size):
            idx = perm[lo : lo + run.batch_size]
            batch_series = [train_series[int(i)] for i in idx]
            masks = [
                sample_mask(model_config.timesteps, run.mask_ratio, rng)
                for _ in batch_series
            ]
            batch = pack_batch(batch_series, manifest.channel_mean, manifest.channel_std)
            step_mask, _ = masks_to_tensors(masks, len(batch_series), model_config.timesteps)

            try:
                out = model(batch, masks)
                eo = loss_eo(out.reconstruction, batch.values, step_mask, batch.validity)
                lc = loss_lc(out.landcover_logits, batch.landcover)
                cls = loss_cls(out.hotspot_logit, batch.labels)
                tot = total_loss(eo, lc, cls)
                objective = eo + lc if run.ssl_only else tot

                model.zero_grad(set_to_none=True)
                objective.backward()
                grads = {
                    name: p.grad if p.grad is not None else torch.zeros_like(p)
                    for name, p in params.items()
                }
                adam_step(params, grads, state, lr, run.beta1, run.beta2, run.eps)
            except (ValueError, RuntimeError) as err:
                raise RuntimeError(
                    f"training aborted at epoch {epoch}, batch {lo // run.batch_size}: {err}"
                ) from err

            sums += len(batch_series) * np.array(
                [t.detach().item() for t in (eo, lc, cls, tot)]
            )

        try:
            val_f1, _ = evaluate_split(model, dataset, "validation")
        except (ValueError, RuntimeError) as err:
            raise RuntimeError(
                f"training aborted at epoch {epoch} during validation: {err}"
            ) from err
        means = sums / n
        history.epochs.append(
            EpochStats(
                lr=lr,
                l_eo=float(means[0]),
                l_lc=float(means[1]),
                l_cls=float(means[2]),
                l_tot=float(means[3]),
                val_f1=val_f1,
            )
        )

    return model, history


def seed_summary(scores: list[float]) -> tuple[float, float]:
    """Mean and population std over per-seed scores (the table's value +- spread)."""
    return float(np.mean(scores)), float(np.std(scores))


def run_experiment(
    dataset: LoadedDataset,
    schedulers: list[str],
    seeds: tuple[int, ...] = (17, 42, 91),
    model_config: ModelConfig | None = None,
    base_run: RunConfig | None = None,
) -> ResultTable:
    """Train per (scheduler, seed) cell and report F1 mean +- population std.

    Cells are fully independent; rows keep the scheduler input order.
    """
    if not schedulers:
        raise ValueError("need at least one scheduler")
    if not seeds:
        raise ValueError("need at least one seed")
    model_config = model_config or ModelConfig()
    base_run = base_run or RunConfig()

    rows = []
    for kind in schedulers:
        val_scores, test_scores = [], []
        for seed in seeds:
            run = replace(base_run, scheduler=kind, seed=seed)
            model, _ = train(run, dataset, model_config)
            val_f1, _ = evaluate_split(model, dataset, "validation")
            test_f1, _ = evaluate_split(model, dataset, "test")
            val_scores.append(val_f1)
            test_scores.append(test_f1)
        val_mean, val_std = seed_summary(val_scores)
        test_mean, test_std = seed_summary(test_scores)
        rows.append(
            ResultRow(
                scheduler=kind,
                val_mean=val_mean,
                val_std=val_std,
                test_mean=test_mean,
                test_std=test_std,
            )
        )
    return ResultTable(tuple(rows))


__all__ = [
    "HISTORY_COLUMNS",
    "RunConfig",
    "EpochStats",
    "TrainHistory",
    "LoadedDataset",
    "evaluate_split",
    "train",
    "seed_summary",
    "run_experiment",
]
