"""Turning crop bundles + event records into labeled, split, normalized datasets.

Labeling rule: a cell belongs to the event iff its center lies inside the AoI
polygon; each of its 96-step windows is positive iff at least one of the
window's timestamps falls in [start, end]. In-AoI windows with no overlap are
ambiguous (the fire may simply not be burning yet) and are dropped. Negatives
are sampled from cells at Chebyshev distance > buffer_cells from every AoI
cell, from the same bundle and time range, so the classifier cannot exploit
acquisition artifacts.

Splits are assigned at event level (never window level) so no event leaks
across train/validation/test.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from shapely.geometry import Point, Polygon

from .core import (
    NUM_CHANNELS,
    WINDOW_LENGTH,
    CropBundle,
    EventRecord,
    PixelTimeseries,
    pixel_at,
    read_crop_bundle,
    window_month,
    window_split,
)

SPLITS = ("train", "validation", "test")

MANIFEST_FILE = "manifest.json"
SERIES_PATTERN = "series_{split}.bin"

# Per-record layout of a series file: 8-byte little-endian unsigned JSON
# length, the UTF-8 JSON header, 96*11 float32 values, 96*11 validity bytes.
_LEN_PREFIX = struct.Struct("<Q")


@dataclass(frozen=True)
class SplitAssignment:
    """Partition of event ids over train/validation/test."""

    assignment: dict[str, str]

    def __post_init__(self):
        for event_id, split in self.assignment.items():
            if split not in SPLITS:
                raise ValueError(f"event {event_id}: unknown split {split!r}")

    def events_in(self, split: str) -> list[str]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return sorted(e for e, s in self.assignment.items() if s == split)

    def counts(self) -> dict[str, int]:
        return {split: len(self.events_in(split)) for split in SPLITS}


@dataclass(frozen=True)
class DatasetManifest:
    """Normalization stats (train split only) plus full dataset provenance."""

    channel_mean: tuple[float, ...]
    channel_std: tuple[float, ...]
    splits: SplitAssignment
    neg_ratio: float
    buffer_cells: int
    seed: int
    window_counts: dict[str, int] = field(default_factory=dict)
    generator: str = "build_dataset"

    def __post_init__(self):
        if len(self.channel_mean) != NUM_CHANNELS or len(self.channel_std) != NUM_CHANNELS:
            raise ValueError(f"need {NUM_CHANNELS} per-channel stats")
        if any(s <= 0 for s in self.channel_std):
            raise ValueError("channel std values must be strictly positive")

    def to_json(self) -> str:
        payload = {
            "channel_mean": list(self.channel_mean),
            "channel_std": list(self.channel_std),
            "splits": dict(sorted(self.splits.assignment.items())),
            "neg_ratio": self.neg_ratio,
            "buffer_cells": self.buffer_cells,
            "seed": self.seed,
            "window_counts": self.window_counts,
            "generator": self.generator,
        }
        return json.dumps(payload, indent=2)

    @staticmethod
    def from_json(text: str) -> "DatasetManifest":
        payload = json.loads(text)
        return DatasetManifest(
            channel_mean=tuple(payload["channel_mean"]),
            channel_std=tuple(payload["channel_std"]),
            splits=SplitAssignment(dict(payload["splits"])),
            neg_ratio=float(payload["neg_ratio"]),
            buffer_cells=int(payload["buffer_cells"]),
            seed=int(payload["seed"]),
            window_counts={k: int(v) for k, v in payload.get("window_counts", {}).items()},
            generator=payload.get("generator", "build_dataset"),
        )


def load_manifest(dataset_dir: str | Path) -> DatasetManifest:
    return DatasetManifest.from_json((Path(dataset_dir) / MANIFEST_FILE).read_text(encoding="utf-8"))


def extract_labeled_pixels(
    bundle: CropBundle,
    event: EventRecord,
    neg_ratio: float = 1.0,
    buffer_cells: int = 2,
    rng: np.random.Generator | None = None,
) -> list[PixelTimeseries]:
    """Extract positive and negative windows for one event.

    Positives: every window of every in-AoI cell that overlaps [start, end].
    Negative candidates: every window of cells at Chebyshev distance
    > buffer_cells from all AoI cells; round(neg_ratio * positives) of them
    (half-up) are sampled uniformly without replacement, all candidates if
    fewer exist. Output order is positives then negatives, each in
    (row, col, window_index) scan order.
    """
    if bundle.event_id != event.event_id:
        raise ValueError(f"bundle {bundle.event_id!r} does not match event {event.event_id!r}")
    if neg_ratio < 0:
        raise ValueError("neg_ratio must be non-negative")
    if buffer_cells < 0:
        raise ValueError("buffer_cells must be non-negative")
    if bundle.num_steps < WINDOW_LENGTH:
        raise ValueError(
            f"bundle covers {bundle.num_steps} steps; need at least {WINDOW_LENGTH}"
        )
    if rng is None:
        rng = np.random.default_rng()

    polygon = Polygon(event.aoi)

    def center_in_aoi(r: int, c: int) -> bool:
        lat, lon = bundle.cell_center(r, c)
        return polygon.contains(Point(lon, lat))

    aoi_cells = [
        (r, c)
        for r in range(bundle.rows)
        for c in range(bundle.cols)
        if center_in_aoi(r, c)
    ]
    if not aoi_cells:
        raise ValueError(f"event {event.event_id}: no cell center intersects the AoI")
    aoi_set = set(aoi_cells)

    def far_from_aoi(r: int, c: int) -> bool:
        return all(max(abs(r - ar), abs(c - ac)) > buffer_cells for ar, ac in aoi_cells)

    def windows_of(r: int, c: int) -> list[tuple[int, np.ndarray, np.ndarray]]:
        px = pixel_at(bundle, r, c)
        return [(i, v, m) for i, (v, m) in enumerate(window_split(px.values, px.validity))]

    def overlaps_event(window_index: int) -> bool:
        lo = window_index * WINDOW_LENGTH
        return any(
            event.start <= ts <= event.end
            for ts in bundle.timestamps[lo : lo + WINDOW_LENGTH]
        )

    def to_series(r: int, c: int, widx: int, values, validity, label: int) -> PixelTimeseries:
        lat, lon = bundle.cell_center(r, c)
        return PixelTimeseries(
            values=values,
            validity=validity,
            lat=lat,
            lon=lon,
            month=window_month(bundle.timestamps, widx),
            landcover=int(bundle.landcover[r, c]),
            label=label,
            event_id=bundle.event_id,
            window_index=widx,
        )

    positives = [
        to_series(r, c, widx, v, m, label=1)
        for r, c in aoi_cells
        for widx, v, m in windows_of(r, c)
        if overlaps_event(widx)
    ]

    candidates = [
        (r, c, widx, v, m)
        for r in range(bundle.rows)
        for c in range(bundle.cols)
        if (r, c) not in aoi_set and far_from_aoi(r, c)
        for widx, v, m in windows_of(r, c)
    ]
    if not candidates:
        raise ValueError(
            f"event {event.event_id}: no negative candidate beyond a "
            f"{buffer_cells}-cell buffer"
        )

    wanted = int(math.floor(neg_ratio * len(positives) + 0.5))
    take = min(wanted, len(candidates))
    chosen = sorted(rng.choice(len(candidates), size=take, replace=False).tolist())
    negatives = [to_series(r, c, widx, v, m, label=0) for r, c, widx, v, m in
                 (candidates[k] for k in chosen)]

    return positives + negatives


def _centroid(event: EventRecord) -> tuple[float, float]:
    pt = Polygon(event.aoi).centroid
    return pt.y, pt.x  # (lat, lon)


def _bin_index(value: float, lo: float, hi: float, bins: int) -> int:
    if hi <= lo:
        return 0
    idx = int((value - lo) / (hi - lo) * bins)
    return min(max(idx, 0), bins - 1)


def _largest_remainder(n: int, ratios: tuple[float, float, float]) -> list[int]:
    quotas = [r * n for r in ratios]
    counts = [int(math.floor(q)) for q in quotas]
    leftover = n - sum(counts)
    by_frac = sorted(range(3), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in by_frac[:leftover]:
        counts[i] += 1
    return counts


def assign_splits(
    events: list[EventRecord],
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
    lat_bins: int = 1,
    lon_bins: int = 1,
    rng: np.random.Generator | None = None,
) -> SplitAssignment:
    """Geographically stratified event-level split.

    Events are bucketed by the lat/lon bin of their AoI centroid (bins span
    the observed centroid range); within each bucket they are shuffled and
    apportioned to train/validation/test by largest remainder. Per-split
    counts deviate from ratio*N by at most the number of buckets; with one
    bucket, by at most 1.
    """
    if not events:
        raise ValueError("event list must be non-empty")
    if len({e.event_id for e in events}) != len(events):
        raise ValueError("duplicate event_id in catalog")
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")
    if lat_bins < 1 or lon_bins < 1:
        raise ValueError("bin counts must be positive")
    if rng is None:
        rng = np.random.default_rng()

    centroids = {e.event_id: _centroid(e) for e in events}
    lats = [lat for lat, _ in centroids.values()]
    lons = [lon for _, lon in centroids.values()]
    lat_lo, lat_hi = min(lats), max(lats)
    lon_lo, lon_hi = min(lons), max(lons)

    buckets: dict[tuple[int, int], list[EventRecord]] = {}
    for ev in events:
        lat, lon = centroids[ev.event_id]
        key = (_bin_index(lat, lat_lo, lat_hi, lat_bins), _bin_index(lon, lon_lo, lon_hi, lon_bins))
        buckets.setdefault(key, []).append(ev)

    assignment: dict[str, str] = {}
    for key in sorted(buckets):
        bucket = buckets[key]
        order = rng.permutation(len(bucket))
        shuffled = [bucket[int(i)] for i in order]
        n_train, n_val, _ = _largest_remainder(len(bucket), ratios)
        for pos, ev in enumerate(shuffled):
            if pos < n_train:
                assignment[ev.event_id] = "train"
            elif pos < n_train + n_val:
                assignment[ev.event_id] = "validation"
            else:
                assignment[ev.event_id] = "test"

    return SplitAssignment(assignment)


def compute_norm_stats(
    train_series: list[PixelTimeseries],
) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and population std over valid positions of the train split.

    Channels with zero valid observations are an error; stds below 1e-6 are
    clamped to 1.0 so normalization never divides by ~0.
    """
    if not train_series:
        raise ValueError("need at least one training window")
    values = np.stack([s.values for s in train_series])  # (N, T, 11)
    valid = np.stack([s.validity for s in train_series])
    counts = valid.sum(axis=(0, 1))
    if (counts == 0).any():
        missing = int(np.argmax(counts == 0))
        raise ValueError(f"channel {missing} has no valid observation in the train split")
    filled = np.where(valid, values.astype(np.float64), 0.0)
    mean = filled.sum(axis=(0, 1)) / counts
    var = (np.where(valid, (values - mean[None, None, :]) ** 2, 0.0)).sum(axis=(0, 1)) / counts
    std = np.sqrt(var)
    std[std < 1e-6] = 1.0
    return mean, std


def event_rng(seed: int, event_id: str) -> np.random.Generator:
    """Per-event stream keyed by (seed, event_id), independent of processing order."""
    digest = hashlib.sha256(event_id.encode("utf-8")).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "little")])


def write_series_file(path: str | Path, series: list[PixelTimeseries]) -> None:
    """Write windows as length-prefixed records (see module docstring for layout)."""
    with open(path, "wb") as fh:
        for s in series:
            if s.values.shape != (WINDOW_LENGTH, NUM_CHANNELS):
                raise ValueError(
                    f"series files hold {WINDOW_LENGTH}x{NUM_CHANNELS} windows, "
                    f"got {s.values.shape}"
                )
            header = json.dumps(
                {
                    "event_id": s.event_id,
                    "lat": s.lat,
                    "lon": s.lon,
                    "month": s.month,
                    "landcover": s.landcover,
                    "label": s.label,
                    "window_index": s.window_index,
                },
                separators=(",", ":"),
                sort_keys=True,
            ).encode("utf-8")
            fh.write(_LEN_PREFIX.pack(len(header)))
            fh.write(header)
            fh.write(np.ascontiguousarray(s.values, dtype="<f4").tobytes())
            fh.write(s.validity.astype(np.uint8).tobytes())


def read_series_file(path: str | Path) -> list[PixelTimeseries]:
    raw = Path(path).read_bytes()
    block = WINDOW_LENGTH * NUM_CHANNELS
    series = []
    offset = 0
    while offset < len(raw):
        if offset + _LEN_PREFIX.size > len(raw):
            raise ValueError(f"{path}: truncated record length prefix at byte {offset}")
        (hlen,) = _LEN_PREFIX.unpack_from(raw, offset)
        offset += _LEN_PREFIX.size
        end = offset + hlen + block * 4 + block
        if end > len(raw):
            raise ValueError(f"{path}: truncated record at byte {offset}")
        header = json.loads(raw[offset : offset + hlen].decode("utf-8"))
        offset += hlen
        values = np.frombuffer(raw, dtype="<f4", count=block, offset=offset).reshape(
            WINDOW_LENGTH, NUM_CHANNELS
        )
        offset += block * 4
        validity = (
            np.frombuffer(raw, dtype=np.uint8, count=block, offset=offset)
            .reshape(WINDOW_LENGTH, NUM_CHANNELS)
            .astype(bool)
        )
        offset += block
        series.append(
            PixelTimeseries(
                values=values,
                validity=validity,
                lat=float(header["lat"]),
                lon=float(header["lon"]),
                month=int(header["month"]),
                landcover=int(header["landcover"]),
                label=int(header["label"]),
                event_id=header["event_id"],
                window_index=int(header["window_index"]),
            )
        )
    return series


def load_split(dataset_dir: str | Path, split: str) -> list[PixelTimeseries]:
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    return read_series_file(Path(dataset_dir) / SERIES_PATTERN.format(split=split))


def build_dataset(
    events: list[EventRecord],
    bundle_dir: str | Path,
    out_dir: str | Path,
    neg_ratio: float = 1.0,
    buffer_cells: int = 2,
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
    lat_bins: int = 1,
    lon_bins: int = 1,
    seed: int = 0,
) -> DatasetManifest:
    """Extract, split and normalize; writes per-split series files + manifest.

    Bundles are looked up as ``bundle_dir/<event_id>``. Extraction uses one
    rng stream per event (keyed by event id), so results do not depend on
    processing order. Normalization stats come from the train split only.
    """
    if len({e.event_id for e in events}) != len(events):
        raise ValueError("duplicate event_id in catalog")
    bundle_dir = Path(bundle_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    splits = assign_splits(
        events, ratios, lat_bins, lon_bins, rng=np.random.default_rng([seed, 0])
    )

    per_split: dict[str, list[PixelTimeseries]] = {split: [] for split in SPLITS}
    for ev in sorted(events, key=lambda e: e.event_id):
        bundle = read_crop_bundle(bundle_dir / ev.event_id)
        windows = extract_labeled_pixels(
            bundle, ev, neg_ratio, buffer_cells, rng=event_rng(seed, ev.event_id)
        )
        per_split[splits.assignment[ev.event_id]].extend(windows)

    mean, std = compute_norm_stats(per_split["train"])

    for split in SPLITS:
        write_series_file(out_dir / SERIES_PATTERN.format(split=split), per_split[split])

    manifest = DatasetManifest(
        channel_mean=tuple(float(v) for v in mean),
        channel_std=tuple(float(v) for v in std),
        splits=splits,
        neg_ratio=neg_ratio,
        buffer_cells=buffer_cells,
        seed=seed,
        window_counts={split: len(per_split[split]) for split in SPLITS},
    )
    (out_dir / MANIFEST_FILE).write_text(manifest.to_json(), encoding="utf-8")
    return manifest


__all__ = [
    "SPLITS",
    "MANIFEST_FILE",
    "SERIES_PATTERN",
    "SplitAssignment",
    "DatasetManifest",
    "load_manifest",
    "extract_labeled_pixels",
    "assign_splits",
    "compute_norm_stats",
    "event_rng",
    "write_series_file",
    "read_series_file",
    "load_split",
    "build_dataset",
]
