"""Fixed (non-learned) encodings attached to every token.

Channels are partitioned by central wavelength into three groups — infrared
(channels 1-7), visible (8-9) and water vapor (10-11), 1-based — and each
group is tokenized separately. Timestep position uses the standard sinusoidal
scheme, month of the year a point on the unit circle, and geographic location
a point on the unit sphere. All functions here are pure and stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import NUM_CHANNELS


@dataclass(frozen=True)
class ChannelGroupSpec:
    """Ordered partition of the 11 channel indices (0-based) into wavelength groups."""

    infrared: tuple[int, ...] = tuple(range(0, 7))
    visible: tuple[int, ...] = (7, 8)
    water_vapor: tuple[int, ...] = (9, 10)

    def __post_init__(self):
        merged = self.infrared + self.visible + self.water_vapor
        if sorted(merged) != list(range(NUM_CHANNELS)):
            raise ValueError("groups must be disjoint and cover all 11 channels")

    @property
    def ordered(self) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        return self.infrared, self.visible, self.water_vapor

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.infrared), len(self.visible), len(self.water_vapor)

    def permutation(self) -> np.ndarray:
        """Channel order after concatenating the three groups."""
        return np.asarray(self.infrared + self.visible + self.water_vapor)

    def inverse_permutation(self) -> np.ndarray:
        """Indices that restore channel order 1..11 from concatenated group outputs."""
        return np.argsort(self.permutation())


DEFAULT_GROUPS = ChannelGroupSpec()


def group_channels(
    x: np.ndarray, groups: ChannelGroupSpec = DEFAULT_GROUPS
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Route an 11-vector (or ...x11 array) into (infrared, visible, water_vapor)."""
    x = np.asarray(x)
    if x.shape[-1] != NUM_CHANNELS:
        raise ValueError(f"expected {NUM_CHANNELS} channels on the last axis, got {x.shape}")
    ir, vis, wv = groups.ordered
    return x[..., list(ir)], x[..., list(vis)], x[..., list(wv)]


def timestep_encoding(t: int, d: int) -> np.ndarray:
    """Sinusoidal position encoding: entry 2i = sin(t / 10000^(2i/d)), 2i+1 = cos(...)."""
    if d <= 0 or d % 2 != 0:
        raise ValueError(f"encoding width must be a positive even integer, got {d}")
    if t < 0:
        raise ValueError(f"timestep must be non-negative, got {t}")
    i = np.arange(d // 2)
    angle = t / np.power(10000.0, 2.0 * i / d)
    out = np.empty(d)
    out[0::2] = np.sin(angle)
    out[1::2] = np.cos(angle)
    return out


def timestep_encoding_table(ts: int, d: int) -> np.ndarray:
    """Stacked timestep encodings for positions 0..ts-1, shape (ts, d)."""
    return np.stack([timestep_encoding(t, d) for t in range(ts)])


def month_encoding(m: int) -> np.ndarray:
    """Unit-circle encoding of the calendar month: (sin, cos) of 2*pi*(m-1)/12."""
    if not 1 <= m <= 12:
        raise ValueError(f"month {m} outside [1, 12]")
    angle = 2.0 * math.pi * (m - 1) / 12.0
    return np.array([math.sin(angle), math.cos(angle)])


def location_encoding(lat: float, lon: float) -> np.ndarray:
    """Unit-sphere Cartesian encoding (cos lat cos lon, cos lat sin lon, sin lat)."""
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"latitude {lat} outside [-90, 90]")
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"longitude {lon} outside [-180, 180]")
    lat_r = math.radians(lat)
    lon_r = math.radians(lon)
    return np.array(
        [
            math.cos(lat_r) * math.cos(lon_r),
            math.cos(lat_r) * math.sin(lon_r),
            math.sin(lat_r),
        ]
    )


__all__ = [
    "ChannelGroupSpec",
    "DEFAULT_GROUPS",
    "group_channels",
    "timestep_encoding",
    "timestep_encoding_table",
    "month_encoding",
    "location_encoding",
]
