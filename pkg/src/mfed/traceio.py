"""Trace and annotation files, JSONL logs, and the ground-truth CSV.

Trace CSV: header ``t_ms,ax,ay,az``; integer milliseconds, decimal
accelerations in m/s^2. Annotation CSV: header ``t_ms``, one mouth-contact
instant per row. Timestamps must be strictly increasing in both; errors
carry 1-based line numbers.
"""
from __future__ import annotations

import csv
import json

import numpy as np

from .errors import ConfigError, NonMonotonicTimestamp, ParseError
from .signal_core import AccelSeries

RATE_TOLERANCE = 0.25  # declared rate may differ from median spacing by 25%


def load_trace(path: str, rate: float) -> AccelSeries:
    """Read a trace CSV and validate the declared sampling rate."""
    t: list[float] = []
    xyz: list[tuple[float, float, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_ms", "ax", "ay", "az"]:
            raise ParseError(f"expected header t_ms,ax,ay,az, got {header}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", line=lineno)
            try:
                t_ms = int(row[0])
                ax, ay, az = (float(v) for v in row[1:])
            except ValueError as e:
                raise ParseError(str(e), line=lineno) from e
            ts = t_ms / 1000.0
            if t and ts <= t[-1]:
                raise NonMonotonicTimestamp(
                    f"t_ms {t_ms} does not increase past {round(t[-1] * 1000)}", line=lineno
                )
            t.append(ts)
            xyz.append((ax, ay, az))
    series = AccelSeries(rate, np.asarray(t), np.asarray(xyz).reshape(len(xyz), 3))
    if len(series) >= 2:
        median_dt = float(np.median(np.diff(series.t)))
        if abs(median_dt - 1.0 / rate) > RATE_TOLERANCE / rate:
            raise ConfigError(
                f"declared rate {rate} Hz does not match median spacing {median_dt:.4f} s"
            )
    return series


def load_annotations(path: str) -> list[float]:
    """Read annotation instants in seconds; an empty file is a valid non-eating trace."""
    out: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t_ms"]:
            raise ParseError(f"expected header t_ms, got {header}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                t_ms = int(row[0])
            except ValueError as e:
                raise ParseError(str(e), line=lineno) from e
            ts = t_ms / 1000.0
            if out and ts <= out[-1]:
                raise NonMonotonicTimestamp(
                    f"t_ms {t_ms} does not increase past {round(out[-1] * 1000)}", line=lineno
                )
            out.append(ts)
    return out


def dump_jsonl_record(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


def write_jsonl(records, fh):
    for record in records:
        fh.write(dump_jsonl_record(record) + "\n")


GROUND_TRUTH_HEADER = ["subject_id", "start_ms", "end_ms", "fact", "provenance", "sources"]


def write_ground_truth_csv(records, fh):
    """Ground-truth records as CSV rows: one record per line, sources ;-joined."""
    writer = csv.writer(fh)
    writer.writerow(GROUND_TRUTH_HEADER)
    for r in records:
        writer.writerow(
            [
                r.subject_id,
                round(r.window[0] * 1000),
                round(r.window[1] * 1000),
                r.fact.value,
                r.provenance.kind,
                ";".join(r.provenance.sources),
            ]
        )
