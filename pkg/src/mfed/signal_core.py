"""Signal stage: smoothing, PoI detection, and gesture-window extraction.

A PoI (point of interest) is a candidate eating gesture: a strict negative
peak in the smoothed x-axis acceleration that survives close-peak
suppression, sits at or below the acceleration threshold, and shows enough
summed variance across the three axes in the surrounding window. All
operations here are pure functions over immutable inputs.

Sample spacing is nominally 1/rate. Gaps larger than 1.5x the nominal
spacing split a series into segments that are smoothed and scanned
independently; candidate windows never straddle a dropout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ConfigError, WindowOutOfBounds

MAX_JITTER_FACTOR = 1.5


class AccelSample(NamedTuple):
    t: float
    ax: float
    ay: float
    az: float


class Label(Enum):
    POSITIVE = "positive"
    AMBIGUOUS = "ambiguous"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class AccelSeries:
    """Timestamped tri-axial accelerometer samples at a nominal rate.

    ``t`` is a strictly increasing float64 vector of seconds; ``xyz`` is the
    matching ``(n, 3)`` float64 matrix in m/s^2, x channel first.
    """

    rate: float
    t: np.ndarray
    xyz: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.t, dtype=np.float64))
        xyz = np.ascontiguousarray(np.asarray(self.xyz, dtype=np.float64))
        if self.rate <= 0:
            raise ConfigError(f"rate must be positive, got {self.rate}")
        if xyz.ndim != 2 or xyz.shape[1] != 3 or xyz.shape[0] != t.shape[0]:
            raise ConfigError(f"xyz shape {xyz.shape} does not match {t.shape[0]} timestamps")
        if t.size and (t[0] < 0 or np.any(np.diff(t) <= 0)):
            raise ConfigError("timestamps must be non-negative and strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(xyz))):
            raise ConfigError("samples must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xyz", xyz)

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def duration(self) -> float:
        """Nominal duration in seconds (sample count over rate)."""
        return len(self) / self.rate

    def sample(self, i: int) -> AccelSample:
        return AccelSample(float(self.t[i]), *map(float, self.xyz[i]))

    @classmethod
    def from_samples(cls, rate: float, samples) -> "AccelSeries":
        rows = [(s[0], s[1], s[2], s[3]) for s in samples]
        if not rows:
            return cls(rate, np.empty(0), np.empty((0, 3)))
        arr = np.asarray(rows, dtype=np.float64)
        return cls(rate, arr[:, 0], arr[:, 1:])

    def slice_time(self, t0: float, t1: float = math.inf) -> "AccelSeries":
        """Samples with t0 <= t < t1 (half-open, so adjacent slices partition)."""
        lo, hi = np.searchsorted(self.t, [t0, t1], side="left")
        return AccelSeries(self.rate, self.t[lo:hi], self.xyz[lo:hi])


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds and window geometry for the PoI detector."""

    x_th: float = -3.0  # m/s^2, peaks at or below pass
    v_th: float = 1.0  # (m/s^2)^2, summed variance must exceed
    peak_min_gap: float = 2.0  # s, peaks closer than this are suppressed
    window_len: float = 6.0  # s, variance/extraction window
    smooth_len: float = 1.0  # s, moving-average width (0 disables)

    def validate(self) -> "DetectorConfig":
        if self.x_th >= 0:
            raise ConfigError(f"x_th must be negative, got {self.x_th}")
        if self.v_th < 0:
            raise ConfigError(f"v_th must be non-negative, got {self.v_th}")
        if self.peak_min_gap <= 0:
            raise ConfigError(f"peak_min_gap must be positive, got {self.peak_min_gap}")
        if self.window_len <= 0:
            raise ConfigError(f"window_len must be positive, got {self.window_len}")
        if self.smooth_len < 0:
            raise ConfigError(f"smooth_len must be non-negative, got {self.smooth_len}")
        return self

    def with_thresholds(self, x_th: float, v_th: float) -> "DetectorConfig":
        return replace(self, x_th=x_th, v_th=v_th)


@dataclass(frozen=True)
class Poi:
    """A surviving candidate peak in the smoothed series."""

    index: int
    t: float
    ax_value: float
    variance_sum: float


@dataclass(frozen=True)
class GestureWindow:
    """The fixed-length sample window around one PoI."""

    poi: Poi
    samples: np.ndarray  # (n, 3)
    label: Label | None = None


def window_extent(window_len: float, rate: float) -> tuple[int, int, int]:
    """(rows, rows before the center, rows after) for a window at this rate.

    Even row counts put the extra row after the center.
    """
    n = int(round(window_len * rate))
    left = (n - 1) // 2
    return n, left, n - 1 - left


def smooth_width(smooth_len: float, rate: float) -> int:
    """Moving-average width in samples, rounded to the nearest odd count."""
    w = int(round(smooth_len * rate))
    if w <= 1:
        return 0 if smooth_len == 0 else 1
    return w if w % 2 == 1 else w + 1


def split_segments(series: AccelSeries) -> list[tuple[int, int]]:
    """Half-open index ranges of contiguous samples.

    A gap above MAX_JITTER_FACTOR / rate starts a new segment.
    """
    n = len(series)
    if n == 0:
        return []
    cut = np.flatnonzero(np.diff(series.t) > MAX_JITTER_FACTOR / series.rate) + 1
    bounds = [0, *cut.tolist(), n]
    return list(zip(bounds[:-1], bounds[1:]))


def smooth(series: AccelSeries, smooth_len: float) -> AccelSeries:
    """Centered moving average per channel, truncated at edges.

    Length and timestamps are preserved; smoothing never crosses a dropout
    gap. ``smooth_len=0`` returns the input unchanged.
    """
    width = smooth_width(smooth_len, series.rate)
    if width <= 1 or len(series) == 0:
        return series
    half = width // 2
    out = np.empty_like(series.xyz)
    for lo, hi in split_segments(series):
        out[lo:hi] = kernels.moving_average(series.xyz[lo:hi], half)
    return AccelSeries(series.rate, series.t, out)


def detect_pois(series: AccelSeries, cfg: DetectorConfig) -> list[Poi]:
    """Scan a smoothed series for PoIs.

    The caller smooths first; this function only filters. Returned PoIs are
    ordered by time, pairwise at least ``peak_min_gap`` apart, at or below
    ``x_th``, above ``v_th`` in summed window variance, and their windows
    lie fully inside one contiguous segment.
    """
    cfg.validate()
    _, left, right = window_extent(cfg.window_len, series.rate)
    pois: list[Poi] = []
    for lo, hi in split_segments(series):
        t_seg = series.t[lo:hi]
        xyz_seg = series.xyz[lo:hi]
        idx, var = kernels.poi_scan(
            t_seg,
            np.ascontiguousarray(xyz_seg[:, 0]),
            xyz_seg,
            cfg.x_th,
            cfg.v_th,
            cfg.peak_min_gap,
            left,
            right,
        )
        for i, v in zip(idx.tolist(), var.tolist()):
            g = lo + i
            pois.append(Poi(g, float(series.t[g]), float(series.xyz[g, 0]), v))
    return pois


def extract_window(series: AccelSeries, poi: Poi, cfg: DetectorConfig) -> GestureWindow:
    """Cut the ``window_len`` x rate sample block centered on a PoI.

    Raises WindowOutOfBounds when the block would extend past either end of
    the series.
    """
    n, left, right = window_extent(cfg.window_len, series.rate)
    lo = poi.index - left
    hi = poi.index + right
    if lo < 0 or hi >= len(series):
        raise WindowOutOfBounds(
            f"window of {n} rows around index {poi.index} exceeds series of {len(series)}"
        )
    return GestureWindow(poi, series.xyz[lo : hi + 1].copy())
