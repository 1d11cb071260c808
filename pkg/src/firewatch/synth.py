"""Deterministic synthetic fire events, the desk-scale stand-in for a real archive.

Each event gets its own crop bundle: a diurnal sinusoid plus white noise as
background, with the infrared channels lifted by a fixed amplitude inside the
AoI while the event is burning. Labels downstream therefore have a known
ground truth: elevated infrared radiance inside the AoI during [start, end],
nothing anywhere else. Identical seeds produce byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .core import CropBundle, EventRecord, format_utc, parse_utc
from .encodings import DEFAULT_GROUPS

# Channel names follow the positional wavelength-group contract:
# 7 infrared, 2 visible, 2 water vapor.
CHANNEL_NAMES = (
    "IR-1", "IR-2", "IR-3", "IR-4", "IR-5", "IR-6", "IR-7",
    "VIS-1", "VIS-2",
    "WV-1", "WV-2",
)

CADENCE = timedelta(minutes=15)
STEPS_PER_DAY = 96
CELL_DEG = 0.05  # grid cell size in degrees

CATALOG_FILE = "events.json"


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the generator; every draw comes from the single seeded stream."""

    events: int = 12
    rows: int = 8
    cols: int = 8
    steps: int = 192  # two days at the 15-minute cadence
    sigma: float = 1.0  # white-noise std, all channels
    amplitude: float = 3.0  # infrared offset inside the AoI during the event
    diurnal_amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.events < 1:
            raise ValueError("need at least one event")
        if self.rows < 3 or self.cols < 3:
            raise ValueError("grid must be at least 3x3 so off-AoI negatives exist")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be strictly positive")
        if self.amplitude < 0 or self.diurnal_amplitude < 0:
            raise ValueError("amplitudes must be non-negative")


def synth_generate(config: SynthConfig) -> tuple[list[CropBundle], list[EventRecord]]:
    """Generate ``config.events`` bundles and matching event records.

    Per event, in a fixed draw order: bundle origin (lon, lat), start instant,
    AoI block placement, event time range, per-channel base level and diurnal
    phase, the noise field, then the land-cover grid.
    """
    rng = np.random.default_rng(config.seed)
    bundles: list[CropBundle] = []
    events: list[EventRecord] = []

    aoi_size = max(1, min(config.rows, config.cols) // 4)
    ir = list(DEFAULT_GROUPS.infrared)

    for i in range(config.events):
        event_id = f"synth-{i:04d}"

        lon0 = float(rng.uniform(-10.0, 25.0))
        lat0 = float(rng.uniform(35.0, 60.0))
        bbox = (lon0, lat0, lon0 + config.cols * CELL_DEG, lat0 + config.rows * CELL_DEG)

        start0 = datetime(2021, 1, 1, tzinfo=timezone.utc) + timedelta(
            days=int(rng.integers(0, 365)), minutes=15 * int(rng.integers(0, STEPS_PER_DAY))
        )
        timestamps = tuple(start0 + k * CADENCE for k in range(config.steps))

        # AoI block of cells; rectangle over whole cells so exactly those cell
        # centers fall inside the polygon.
        r0 = int(rng.integers(0, config.rows - aoi_size + 1))
        c0 = int(rng.integers(0, config.cols - aoi_size + 1))
        west, south, east, north = bbox
        aoi_n = north - r0 * CELL_DEG
        aoi_s = north - (r0 + aoi_size) * CELL_DEG
        aoi_w = west + c0 * CELL_DEG
        aoi_e = west + (c0 + aoi_size) * CELL_DEG
        aoi = ((aoi_w, aoi_s), (aoi_e, aoi_s), (aoi_e, aoi_n), (aoi_w, aoi_n))

        # Event time range: starts in the first quarter, burns for one to two days
        # (clipped), so it overlaps every 96-step window of the default series.
        t_start = int(rng.integers(0, max(1, config.steps // 4)))
        duration = int(rng.integers(max(1, config.steps // 2), max(2, 3 * config.steps // 4)))
        t_end = min(config.steps - 1, t_start + duration)

        base = rng.uniform(-1.0, 1.0, size=len(CHANNEL_NAMES))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=len(CHANNEL_NAMES))
        t = np.arange(config.steps)
        diurnal = config.diurnal_amplitude * np.sin(
            2.0 * np.pi * t[:, None] / STEPS_PER_DAY + phase[None, :]
        )
        noise = rng.normal(0.0, config.sigma, size=(config.steps, config.rows, config.cols, len(CHANNEL_NAMES)))
        data = base[None, None, None, :] + diurnal[:, None, None, :] + noise
        data[t_start : t_end + 1, r0 : r0 + aoi_size, c0 : c0 + aoi_size, ir] += config.amplitude

        landcover = rng.integers(0, 9, size=(config.rows, config.cols))

        bundles.append(
            CropBundle(
                event_id=event_id,
                bbox=bbox,
                rows=config.rows,
                cols=config.cols,
                timestamps=timestamps,
                channels=CHANNEL_NAMES,
                data=data.astype(np.float32),
                landcover=landcover,
                aoi=aoi,
            )
        )
        events.append(
            EventRecord(
                event_id=event_id,
                aoi=aoi,
                start=timestamps[t_start],
                end=timestamps[t_end],
            )
        )

    return bundles, events


def write_event_catalog(events: list[EventRecord], path: str | Path) -> None:
    """Write the event catalog as a JSON array of {event_id, aoi, start, end}."""
    records = [
        {
            "event_id": ev.event_id,
            "aoi": [[lon, lat] for lon, lat in ev.aoi],
            "start": format_utc(ev.start),
            "end": format_utc(ev.end),
        }
        for ev in events
    ]
    Path(path).write_text(json.dumps(records, indent=2), encoding="utf-8")


def read_event_catalog(path: str | Path) -> list[EventRecord]:
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        EventRecord(
            event_id=rec["event_id"],
            aoi=tuple((lon, lat) for lon, lat in rec["aoi"]),
            start=parse_utc(rec["start"]),
            end=parse_utc(rec["end"]),
        )
        for rec in records
    ]


__all__ = [
    "CHANNEL_NAMES",
    "CADENCE",
    "STEPS_PER_DAY",
    "CATALOG_FILE",
    "SynthConfig",
    "synth_generate",
    "write_event_catalog",
    "read_event_catalog",
]
