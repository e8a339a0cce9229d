"""Watch-side node: upload quorum, cooldown, and duty-cycled sensors.

The watch buffers every sample since its last upload. When ``quorum``
PoIs land inside a sliding ``quorum_window`` it uploads immediately,
unless the previous upload was under ``min_upload_gap`` ago, in which case
the upload is marked pending and fires from ``on_tick`` at cooldown
expiry. PoIs are consumed by the upload that ships them.

Beacon scans occupy ``[k*interval, k*interval + scan_len)`` and the battery
percentage is recorded once per interval. Both record kinds ride along
with the next accelerometer upload.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ClockRegression, ConfigError
from .signal_core import AccelSeries


@dataclass(frozen=True)
class UploadPolicy:
    quorum: int = 4
    quorum_window: float = 120.0  # s
    min_upload_gap: float = 60.0  # s

    def validate(self) -> "UploadPolicy":
        if self.quorum < 1:
            raise ConfigError(f"quorum must be >= 1, got {self.quorum}")
        if self.quorum_window <= 0:
            raise ConfigError(f"quorum_window must be positive, got {self.quorum_window}")
        if self.min_upload_gap < 0:
            raise ConfigError(f"min_upload_gap must be >= 0, got {self.min_upload_gap}")
        return self


@dataclass(frozen=True)
class DutyCycleConfig:
    beacon_scan_len: float = 5.0  # s
    beacon_interval: float = 120.0  # s
    battery_interval: float = 120.0  # s

    def validate(self) -> "DutyCycleConfig":
        if not 0 < self.beacon_scan_len < self.beacon_interval:
            raise ConfigError("beacon_scan_len must lie inside beacon_interval")
        if self.battery_interval <= 0:
            raise ConfigError("battery_interval must be positive")
        return self


@dataclass
class WatchState:
    participant_id: str
    series: AccelSeries | None = None  # trace backing upload payloads
    max_buffer_s: float | None = None  # oldest-first eviction; None = unlimited
    poi_times: list[float] = field(default_factory=list)
    buffer_start: float = 0.0
    last_upload_t: float | None = None
    pending_quorum: bool = False
    pending_beacons: list[tuple[float, str, float]] = field(default_factory=list)
    pending_battery: list[tuple[float, float]] = field(default_factory=list)
    battery_start_percent: float = 100.0
    battery_drain_per_hour: float = 1.5
    last_now: float = -math.inf
    _next_scan: int = 0  # next beacon interval index to open
    _open_scan_stop: float | None = None
    _next_battery: int = 0


@dataclass(frozen=True)
class UploadPayload:
    participant_id: str
    span: tuple[float, float]  # [start, end) in trace seconds
    accel: AccelSeries | None
    beacon_readings: tuple[tuple[float, str, float], ...]
    battery_samples: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Upload:
    payload: UploadPayload


@dataclass(frozen=True)
class BeaconScanStart:
    t: float


@dataclass(frozen=True)
class BeaconScanStop:
    t: float


@dataclass(frozen=True)
class BatterySample:
    t: float
    percent: float


def _check_clock(state: WatchState, now: float):
    if now < state.last_now:
        raise ClockRegression(f"now went backwards: {now} < {state.last_now}")
    state.last_now = now


def record_beacon_reading(state: WatchState, t: float, beacon_id: str, rssi_dbm: float):
    """Store one opportunistic beacon reading for the next upload."""
    state.pending_beacons.append((t, beacon_id, rssi_dbm))


def _battery_at(state: WatchState, t: float) -> float:
    return max(0.0, state.battery_start_percent - state.battery_drain_per_hour * t / 3600.0)


def _make_upload(state: WatchState, now: float) -> Upload:
    start = state.buffer_start
    if state.max_buffer_s is not None:  # capped ring buffer: oldest samples evicted
        start = max(start, now - state.max_buffer_s)
    accel = state.series.slice_time(start, now) if state.series is not None else None
    payload = UploadPayload(
        state.participant_id,
        (start, now),
        accel,
        tuple(state.pending_beacons),
        tuple(state.pending_battery),
    )
    state.buffer_start = now
    state.last_upload_t = now
    state.pending_quorum = False
    state.poi_times.clear()
    state.pending_beacons.clear()
    state.pending_battery.clear()
    return Upload(payload)


def _cooldown_over(state: WatchState, policy: UploadPolicy, now: float) -> bool:
    return state.last_upload_t is None or now - state.last_upload_t >= policy.min_upload_gap


def on_poi(state: WatchState, poi_t: float, policy: UploadPolicy, now: float) -> Upload | None:
    """Feed one PoI; returns an Upload when the quorum rule fires."""
    policy.validate()
    if now < poi_t:
        raise ClockRegression(f"poi at {poi_t} is ahead of now={now}")
    _check_clock(state, now)

    state.poi_times.append(poi_t)
    cutoff = poi_t - policy.quorum_window
    while state.poi_times and state.poi_times[0] < cutoff:
        state.poi_times.pop(0)

    if len(state.poi_times) < policy.quorum:
        return None
    if not _cooldown_over(state, policy, now):
        state.pending_quorum = True
        return None
    return _make_upload(state, now)


def on_tick(
    state: WatchState,
    now: float,
    policy: UploadPolicy,
    duty: DutyCycleConfig | None,
) -> list[Upload | BeaconScanStart | BeaconScanStop | BatterySample]:
    """Advance the clock: emits duty-cycle records due by `now`, then any
    pending upload whose cooldown has expired."""
    _check_clock(state, now)
    actions: list[Upload | BeaconScanStart | BeaconScanStop | BatterySample] = []

    if duty is not None:
        duty.validate()
        while True:
            if state._open_scan_stop is not None:
                if state._open_scan_stop > now:
                    break
                actions.append(BeaconScanStop(state._open_scan_stop))
                state._open_scan_stop = None
            start = state._next_scan * duty.beacon_interval
            if start > now:
                break
            actions.append(BeaconScanStart(start))
            state._open_scan_stop = start + duty.beacon_scan_len
            state._next_scan += 1
        while state._next_battery * duty.battery_interval <= now:
            t = state._next_battery * duty.battery_interval
            pct = _battery_at(state, t)
            actions.append(BatterySample(t, pct))
            state.pending_battery.append((t, pct))
            state._next_battery += 1

    if state.pending_quorum and _cooldown_over(state, policy, now):
        actions.append(_make_upload(state, now))
    return actions


def flush(state: WatchState, now: float) -> Upload | None:
    """Ship whatever remains in the buffer (end of trace)."""
    _check_clock(state, now)
    remaining = (
        state.series is not None and len(state.series.slice_time(state.buffer_start)) > 0
    )
    if not (remaining or state.pending_beacons or state.pending_battery or state.pending_quorum):
        return None
    start = state.buffer_start
    accel = state.series.slice_time(start) if state.series is not None else None
    payload = UploadPayload(
        state.participant_id,
        (start, math.inf),
        accel,
        tuple(state.pending_beacons),
        tuple(state.pending_battery),
    )
    state.buffer_start = now
    state.pending_quorum = False
    state.poi_times.clear()
    state.pending_beacons.clear()
    state.pending_battery.clear()
    return Upload(payload)
