"""Evaluation harness: gesture matching, PoI rates, and threshold sweeps."""
from __future__ import annotations

from dataclasses import dataclass

from . import classifier as _classifier
from .signal_core import AccelSeries, DetectorConfig, detect_pois, extract_window, smooth


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


def match_gestures(detected, annotations, tolerance: float = 4.0) -> Metrics:
    """Greedy earliest-first one-to-one matching within +-tolerance.

    Both inputs must be sorted. Every detection matches at most one
    annotation and vice versa, so tp+fp = len(detected) and
    tp+fn = len(annotations).
    """
    i = j = tp = 0
    while i < len(detected) and j < len(annotations):
        if abs(detected[i] - annotations[j]) <= tolerance:
            tp += 1
            i += 1
            j += 1
        elif detected[i] < annotations[j]:
            i += 1
        else:
            j += 1
    return Metrics(tp, len(detected) - tp, len(annotations) - tp)


@dataclass(frozen=True)
class PoiRateReport:
    pois_per_minute: float

    @property
    def ratio_vs_sliding_3s(self) -> float:
        """Against a 6 s window / 3 s step segmentation (20 segments/min)."""
        return self.pois_per_minute / 20.0

    @property
    def ratio_vs_sliding_100ms(self) -> float:
        """Against a 100 ms step segmentation (600 segments/min)."""
        return self.pois_per_minute / 600.0


def poi_rate(series: AccelSeries, cfg: DetectorConfig) -> PoiRateReport:
    """PoIs per minute on the raw series (smoothing applied here)."""
    if len(series) == 0:
        raise ValueError("series must be non-empty")
    pois = detect_pois(smooth(series, cfg.smooth_len), cfg)
    return PoiRateReport(len(pois) / (series.duration / 60.0))


@dataclass(frozen=True)
class SweepRow:
    x_th: float
    v_th: float
    pois_per_min: float
    precision: float
    recall: float
    f1: float


def detect_gesture_times(
    series: AccelSeries,
    cfg: DetectorConfig,
    weights=None,
    threshold: float = 0.5,
) -> tuple[list[float], int]:
    """(classified gesture times, PoI count) for one raw series.

    Without weights every PoI counts as a gesture (threshold-only mode).
    """
    smoothed = smooth(series, cfg.smooth_len)
    pois = detect_pois(smoothed, cfg)
    if weights is None:
        return [p.t for p in pois], len(pois)
    times = [
        p.t
        for p in pois
        if _classifier.classify(weights, extract_window(smoothed, p, cfg), threshold)
    ]
    return times, len(pois)


def threshold_sweep(
    series: AccelSeries,
    annotations,
    x_th_list,
    v_th_list,
    weights=None,
    cfg: DetectorConfig = DetectorConfig(),
    tolerance: float = 4.0,
    threshold: float = 0.5,
) -> list[SweepRow]:
    """Full cross product of thresholds; one row per (x_th, v_th)."""
    if not x_th_list or not v_th_list:
        raise ValueError("threshold lists must be non-empty")
    minutes = series.duration / 60.0
    rows = []
    for x_th in x_th_list:
        for v_th in v_th_list:
            c = cfg.with_thresholds(x_th, v_th)
            times, n_pois = detect_gesture_times(series, c, weights, threshold)
            m = match_gestures(times, annotations, tolerance)
            rows.append(SweepRow(x_th, v_th, n_pois / minutes, m.precision, m.recall, m.f1))
    return rows
