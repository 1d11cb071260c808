"""firewatch: hotspot detection from geostationary pixel timeseries.

A library + CLI that builds labeled pixel-timeseries datasets from raster
crops of geostationary satellite imagery and trains a masked-autoencoder
transformer for binary hotspot classification.
"""

from .core import (
    CropBundle,
    EventRecord,
    PixelTimeseries,
    pixel_at,
    read_crop_bundle,
    window_split,
    write_crop_bundle,
)
from .dataset import (
    DatasetManifest,
    SplitAssignment,
    assign_splits,
    build_dataset,
    compute_norm_stats,
    extract_labeled_pixels,
)
from .encodings import (
    ChannelGroupSpec,
    group_channels,
    location_encoding,
    month_encoding,
    timestep_encoding,
)
from .losses import loss_cls, loss_eo, loss_lc, total_loss
from .metrics import ConfusionCounts, ResultTable, confusion, f1, render_table
from .model import (
    HotspotMAE,
    MaskSpec,
    ModelConfig,
    init_params,
    load_checkpoint,
    predict_proba,
    sample_mask,
    save_checkpoint,
)
from .optim import AdamState, SchedulerConfig, adam_step, scheduler_lr
from .synth import SynthConfig, synth_generate
from .training import LoadedDataset, RunConfig, TrainHistory, run_experiment, train

__version__ = "0.1.0"

__all__ = [
    "CropBundle",
    "EventRecord",
    "PixelTimeseries",
    "pixel_at",
    "read_crop_bundle",
    "window_split",
    "write_crop_bundle",
    "DatasetManifest",
    "SplitAssignment",
    "assign_splits",
    "build_dataset",
    "compute_norm_stats",
    "extract_labeled_pixels",
    "ChannelGroupSpec",
    "group_channels",
    "location_encoding",
    "month_encoding",
    "timestep_encoding",
    "loss_cls",
    "loss_eo",
    "loss_lc",
    "total_loss",
    "ConfusionCounts",
    "ResultTable",
    "confusion",
    "f1",
    "render_table",
    "HotspotMAE",
    "MaskSpec",
    "ModelConfig",
    "init_params",
    "load_checkpoint",
    "predict_proba",
    "sample_mask",
    "save_checkpoint",
    "AdamState",
    "SchedulerConfig",
    "adam_step",
    "scheduler_lr",
    "SynthConfig",
    "synth_generate",
    "LoadedDataset",
    "RunConfig",
    "TrainHistory",
    "run_experiment",
    "train",
]
