"""Core data model: crop bundles, event records and pixel timeseries.

A *crop bundle* is the on-disk unit of raw imagery: a spatio-temporal raster
crop around one fire event (T x rows x cols x 11 radiances at a nominal
15-minute cadence) together with timestamps, a land-cover grid and the event's
area-of-interest polygon. Bundles are stored as a directory holding exactly

- ``metadata.json``: event id, bbox, grid shape, timestamps, channel names,
  row-major land-cover values and the AoI polygon;
- ``data.bin``: IEEE-754 binary32, little endian, row-major ``[T][row][col][channel]``,
  with NaN encoding a missing observation.

All values are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple

import numpy as np

NUM_CHANNELS = 11
WINDOW_LENGTH = 96  # 24 h of 15-minute scans

METADATA_FILE = "metadata.json"
DATA_FILE = "data.bin"


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 UTC instant, accepting both 'Z' and '+00:00' suffixes."""
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {value!r} is not timezone-aware")
    return dt.astimezone(timezone.utc)


def format_utc(dt: datetime) -> str:
    if dt.tzinfo is None:
        raise ValueError("naive datetime; UTC instants must be timezone-aware")
    return dt.astimezone(timezone.utc).isoformat()


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _normalize_ring(aoi) -> tuple[tuple[float, float], ...]:
    """Vertices as floats, dropping a repeated closing vertex (rings are implicit)."""
    ring = tuple((float(x), float(y)) for x, y in aoi)
    if len(ring) > 3 and ring[0] == ring[-1]:
        ring = ring[:-1]
    return ring


@dataclass(frozen=True)
class EventRecord:
    """One fire event: an AoI polygon plus a start and end instant."""

    event_id: str
    aoi: tuple[tuple[float, float], ...]  # (lon, lat) vertices, implicitly closed
    start: datetime
    end: datetime

    def __post_init__(self):
        if not self.event_id:
            raise ValueError("event_id must be non-empty")
        object.__setattr__(self, "aoi", _normalize_ring(self.aoi))
        if len(set(self.aoi)) < 3:
            raise ValueError(f"event {self.event_id}: AoI needs >= 3 distinct vertices")
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError(f"event {self.event_id}: start/end must be timezone-aware")
        if not self.start < self.end:
            raise ValueError(f"event {self.event_id}: start must precede end")


@dataclass(frozen=True)
class CropBundle:
    """A raster crop of T x rows x cols x 11 radiances around one event.

    ``data`` uses NaN as the missing-observation sentinel. ``landcover`` holds
    one of 9 categories (0..8) per cell. The grid is a uniform lon/lat grid
    over ``bbox`` with row 0 the northernmost row.
    """

    event_id: str
    bbox: tuple[float, float, float, float]  # west, south, east, north (degrees)
    rows: int
    cols: int
    timestamps: tuple[datetime, ...]
    channels: tuple[str, ...]
    data: np.ndarray = field(repr=False)
    landcover: np.ndarray = field(repr=False)
    aoi: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.event_id:
            raise ValueError("event_id must be non-empty")
        west, south, east, north = (float(v) for v in self.bbox)
        if not (west < east and south < north):
            raise ValueError(f"degenerate bbox {self.bbox}")
        object.__setattr__(self, "bbox", (west, south, east, north))
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        for ts in self.timestamps:
            if ts.tzinfo is None:
                raise ValueError("timestamps must be timezone-aware UTC instants")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not a < b:
                raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        if len(self.channels) != NUM_CHANNELS:
            raise ValueError(f"expected {NUM_CHANNELS} channels, got {len(self.channels)}")

        data = np.asarray(self.data, dtype=np.float32)
        expected = (len(self.timestamps), self.rows, self.cols, NUM_CHANNELS)
        if data.shape != expected:
            raise ValueError(f"data shape {data.shape} != {expected}")
        if np.isinf(data).any():
            raise ValueError("data must be finite or NaN (NaN is the missing sentinel)")
        object.__setattr__(self, "data", _freeze(data))

        landcover = np.asarray(self.landcover, dtype=np.int64)
        if landcover.shape != (self.rows, self.cols):
            raise ValueError(f"landcover shape {landcover.shape} != {(self.rows, self.cols)}")
        if landcover.size and (landcover.min() < 0 or landcover.max() > 8):
            raise ValueError("landcover categories must lie in [0, 8]")
        object.__setattr__(self, "landcover", _freeze(landcover))

        object.__setattr__(self, "aoi", _normalize_ring(self.aoi))
        if len(set(self.aoi)) < 3:
            raise ValueError("AoI needs >= 3 distinct vertices")

    @property
    def num_steps(self) -> int:
        return len(self.timestamps)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        """(lat, lon) of the cell center; row 0 is the northernmost row."""
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"cell ({row}, {col}) outside {self.rows}x{self.cols} grid")
        west, south, east, north = self.bbox
        lat = north - (row + 0.5) * (north - south) / self.rows
        lon = west + (col + 0.5) * (east - west) / self.cols
        return lat, lon


class PixelSeries(NamedTuple):
    """One cell's full T x 11 series with its validity mask and metadata."""

    values: np.ndarray
    validity: np.ndarray
    lat: float
    lon: float
    landcover: int


@dataclass(frozen=True)
class PixelTimeseries:
    """One labeled model input: a 96-step, 11-channel window plus context.

    ``validity`` is False exactly where the source observation was missing;
    ``values`` must never be read at invalid positions. Windows shorter or
    longer than 96 steps are permitted only for reduced test configurations.
    """

    values: np.ndarray = field(repr=False)
    validity: np.ndarray = field(repr=False)
    lat: float
    lon: float
    month: int  # calendar month of the window's first timestamp
    landcover: int
    label: int
    event_id: str
    window_index: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        validity = np.asarray(self.validity, dtype=bool)
        if values.ndim != 2 or values.shape[1] != NUM_CHANNELS:
            raise ValueError(f"values must be T x {NUM_CHANNELS}, got {values.shape}")
        if validity.shape != values.shape:
            raise ValueError("validity shape must match values")
        if not np.isfinite(values[validity]).all():
            raise ValueError("values must be finite wherever validity is true")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "validity", _freeze(validity))
        if not 1 <= self.month <= 12:
            raise ValueError(f"month {self.month} outside [1, 12]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")
        if not 0 <= self.landcover <= 8:
            raise ValueError(f"landcover {self.landcover} outside [0, 8]")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.window_index < 0:
            raise ValueError("window_index must be non-negative")


def write_crop_bundle(bundle: CropBundle, path: str | Path) -> None:
    """Write ``metadata.json`` + ``data.bin`` under ``path`` (created if needed).

    Read-after-write yields a value-identical bundle, including NaN positions.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "event_id": bundle.event_id,
        "bbox": list(bundle.bbox),
        "rows": bundle.rows,
        "cols": bundle.cols,
        "T": bundle.num_steps,
        "timestamps": [format_utc(ts) for ts in bundle.timestamps],
        "channels": list(bundle.channels),
        "landcover": [int(v) for v in bundle.landcover.reshape(-1)],
        "aoi": [[lon, lat] for lon, lat in bundle.aoi],
    }
    (path / METADATA_FILE).write_text(json.dumps(meta, indent=2), encoding="utf-8")
    (path / DATA_FILE).write_bytes(np.ascontiguousarray(bundle.data, dtype="<f4").tobytes())


def read_crop_bundle(path: str | Path) -> CropBundle:
    """Read a bundle directory written by :func:`write_crop_bundle`."""
    path = Path(path)
    meta_path = path / METADATA_FILE
    if not meta_path.exists():
        raise FileNotFoundError(f"missing {meta_path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))

    rows, cols, steps = int(meta["rows"]), int(meta["cols"]), int(meta["T"])
    data_path = path / DATA_FILE
    if not data_path.exists():
        raise FileNotFoundError(f"missing {data_path}")
    raw = data_path.read_bytes()
    expected_bytes = steps * rows * cols * NUM_CHANNELS * 4
    if len(raw) != expected_bytes:
        raise ValueError(
            f"{data_path}: expected {expected_bytes} bytes for "
            f"T={steps} rows={rows} cols={cols}, found {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(steps, rows, cols, NUM_CHANNELS)

    landcover = np.asarray(meta["landcover"], dtype=np.int64)
    if landcover.size != rows * cols:
        raise ValueError(f"landcover holds {landcover.size} values, expected {rows * cols}")

    return CropBundle(
        event_id=meta["event_id"],
        bbox=tuple(meta["bbox"]),
        rows=rows,
        cols=cols,
        timestamps=tuple(parse_utc(ts) for ts in meta["timestamps"]),
        channels=tuple(meta["channels"]),
        data=data,
        landcover=landcover.reshape(rows, cols),
        aoi=tuple((lon, lat) for lon, lat in meta["aoi"]),
    )


def pixel_at(bundle: CropBundle, row: int, col: int) -> PixelSeries:
    """Extract one cell's T x 11 series, validity mask and cell-center location."""
    lat, lon = bundle.cell_center(row, col)  # raises IndexError out of range
    values = bundle.data[:, row, col, :]
    validity = np.isfinite(values)
    return PixelSeries(
        values=values,
        validity=_freeze(validity),
        lat=lat,
        lon=lon,
        landcover=int(bundle.landcover[row, col]),
    )


def window_split(
    values: np.ndarray, validity: np.ndarray, window: int = WINDOW_LENGTH
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a T x C series into consecutive non-overlapping ``window``-step segments.

    Segments start at index 0; a trailing remainder shorter than ``window`` is
    dropped. Returns ``floor(T / window)`` (values, validity) pairs in order,
    so the list position is the window index.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    values = np.asarray(values)
    validity = np.asarray(validity)
    if validity.shape != values.shape:
        raise ValueError("validity shape must match values")
    count = values.shape[0] // window
    return [
        (values[i * window : (i + 1) * window], validity[i * window : (i + 1) * window])
        for i in range(count)
    ]


def window_month(timestamps: tuple[datetime, ...], window_index: int, window: int = WINDOW_LENGTH) -> int:
    """Calendar month of a window = month of its first timestamp."""
    return timestamps[window_index * window].month


__all__ = [
    "NUM_CHANNELS",
    "WINDOW_LENGTH",
    "CropBundle",
    "EventRecord",
    "PixelSeries",
    "PixelTimeseries",
    "parse_utc",
    "format_utc",
    "write_crop_bundle",
    "read_crop_bundle",
    "pixel_at",
    "window_split",
    "window_month",
]
