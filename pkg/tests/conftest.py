from __future__ import annotations

from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

from firewatch.core import CropBundle, write_crop_bundle
from firewatch.dataset import build_dataset
from firewatch.model import ModelConfig
from firewatch.synth import CATALOG_FILE, SynthConfig, synth_generate, write_event_catalog

T0 = datetime(2021, 8, 1, tzinfo=timezone.utc)
STEP = timedelta(minutes=15)


def make_bundle(
    steps: int = 2,
    rows: int = 1,
    cols: int = 1,
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0),
    data: np.ndarray | None = None,
    event_id: str = "ev-1",
) -> CropBundle:
    if data is None:
        data = np.arange(steps * rows * cols * 11, dtype=np.float32).reshape(
            steps, rows, cols, 11
        )
    return CropBundle(
        event_id=event_id,
        bbox=bbox,
        rows=rows,
        cols=cols,
        timestamps=tuple(T0 + i * STEP for i in range(steps)),
        channels=tuple(f"ch-{i}" for i in range(11)),
        data=data,
        landcover=np.zeros((rows, cols), dtype=np.int64),
        aoi=((bbox[0], bbox[1]), (bbox[2], bbox[1]), (bbox[2], bbox[3]), (bbox[0], bbox[3])),
    )


@pytest.fixture(scope="session")
def tiny_model_config() -> ModelConfig:
    return ModelConfig(d_model=16, encoder_layers=1, decoder_layers=1, attention_heads=2)


@pytest.fixture(scope="session")
def synth_dataset_dir(tmp_path_factory) -> Path:
    """A small built dataset shared by training/CLI tests: 6 events, 6x6 grid."""
    root = tmp_path_factory.mktemp("synth_ds")
    crops = root / "crops"
    bundles, events = synth_generate(
        SynthConfig(events=6, rows=6, cols=6, steps=192, sigma=1.0, amplitude=3.0, seed=11)
    )
    for bundle in bundles:
        write_crop_bundle(bundle, crops / bundle.event_id)
    write_event_catalog(events, crops / CATALOG_FILE)
    out = root / "dataset"
    build_dataset(
        events,
        bundle_dir=crops,
        out_dir=out,
        neg_ratio=1.0,
        buffer_cells=2,
        ratios=(1 / 3, 1 / 3, 1 / 3),
        seed=3,
    )
    return out
