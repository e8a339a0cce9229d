"""Deterministic multi-home simulator on a virtual clock.

One home runs as a single-threaded discrete-event loop: watch nodes replay
their traces, detect PoIs, and upload on quorum; the base station releases
PoIs as their windows arrive, classifies them, clusters gestures into
events, and schedules EMAs; seeded responder agents answer the surveys;
ground truth is resolved at the end of the run. Identical (config, seed)
pairs produce byte-identical JSONL logs. The ``MFED_SEED`` environment
variable overrides the config seed.

Everything is logged as one JSONL record per occurrence, ordered by
emission time; beacon and battery records ride with the upload that
shipped them and carry their original capture times.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import classifier, ema, events, traceio, watch
from .errors import ConfigError
from .signal_core import AccelSeries, DetectorConfig, detect_pois, extract_window, smooth, window_extent


@dataclass(frozen=True)
class BeaconSpec:
    id: str
    distance_m: float = 3.0
    tx_power_dbm: float = -59.0
    path_loss_exp: float = 2.0
    noise_db: float = 2.0


@dataclass(frozen=True)
class ResponderProfile:
    response_prob: float = 1.0
    delay_mean_s: float = 120.0
    truthful: bool = True
    who_with: tuple[str, ...] = ()
    eating_type: str = "meal"

    def validate(self) -> "ResponderProfile":
        if not 0 <= self.response_prob <= 1:
            raise ConfigError(f"response_prob must be in [0, 1], got {self.response_prob}")
        if self.delay_mean_s <= 0:
            raise ConfigError(f"delay_mean_s must be positive, got {self.delay_mean_s}")
        return self


@dataclass(frozen=True)
class ParticipantSpec:
    participant: ema.Participant
    trace: str | None = None
    annotations: str | None = None
    responder: ResponderProfile = ResponderProfile()
    series: AccelSeries | None = None  # programmatic alternative to trace
    annotation_times: tuple[float, ...] | None = None


@dataclass(frozen=True)
class HomeConfig:
    home_id: str
    participants: tuple[ParticipantSpec, ...]
    beacons: tuple[BeaconSpec, ...] = ()
    detector: DetectorConfig = DetectorConfig()
    policy: watch.UploadPolicy = watch.UploadPolicy()
    duty: watch.DutyCycleConfig | None = watch.DutyCycleConfig()
    weights: str | None = None
    seed: int = 0
    rate: float = 25.0
    start_hour: float = 0.0
    duration: float | None = None
    ema_ttl: float = 1800.0
    decision_threshold: float = 0.5

    def validate(self) -> "HomeConfig":
        if not self.participants:
            raise ConfigError("a home needs at least one participant")
        ids = [s.participant.id for s in self.participants]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"participant ids must be unique, got {ids}")
        self.detector.validate()
        self.policy.validate()
        if self.duty is not None:
            self.duty.validate()
        for spec in self.participants:
            spec.responder.validate()
            if spec.trace is None and spec.series is None:
                raise ConfigError(f"participant {spec.participant.id} has no trace")
        return self


def load_home_config(path: str) -> HomeConfig:
    """Read the JSON home-config file (schema documented in the README)."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
    try:
        specs = []
        for p in doc["participants"]:
            resp = p.get("responder", {})
            specs.append(
                ParticipantSpec(
                    participant=ema.Participant(
                        id=p["id"],
                        home_id=doc["home_id"],
                        role=ema.Role(p.get("role", "other")),
                        window=tuple(p.get("window", (0.0, 24.0))),
                    ),
                    trace=p["trace"],
                    annotations=p.get("annotations"),
                    responder=ResponderProfile(
                        response_prob=resp.get("response_prob", 1.0),
                        delay_mean_s=resp.get("delay_mean_s", 120.0),
                        truthful=resp.get("truthful", True),
                        who_with=tuple(resp.get("who_with", ())),
                        eating_type=resp.get("eating_type", "meal"),
                    ),
                )
            )
        duty = None
        if doc.get("duty", {}) is not None:
            d = doc.get("duty", {})
            duty = watch.DutyCycleConfig(
                beacon_scan_len=d.get("beacon_scan_len", 5.0),
                beacon_interval=d.get("beacon_interval", 120.0),
                battery_interval=d.get("battery_interval", 120.0),
            )
        det = doc.get("detector", {})
        pol = doc.get("policy", {})
        return HomeConfig(
            home_id=doc["home_id"],
            participants=tuple(specs),
            beacons=tuple(
                BeaconSpec(
                    id=b["id"],
                    distance_m=b.get("distance_m", 3.0),
                    tx_power_dbm=b.get("tx_power_dbm", -59.0),
                    path_loss_exp=b.get("path_loss_exp", 2.0),
                    noise_db=b.get("noise_db", 2.0),
                )
                for b in doc.get("beacons", ())
            ),
            detector=DetectorConfig(
                x_th=det.get("x_th", -3.0),
                v_th=det.get("v_th", 1.0),
                peak_min_gap=det.get("peak_min_gap", 2.0),
                window_len=det.get("window_len", 6.0),
                smooth_len=det.get("smooth_len", 1.0),
            ),
            policy=watch.UploadPolicy(
                quorum=pol.get("quorum", 4),
                quorum_window=pol.get("quorum_window", 120.0),
                min_upload_gap=pol.get("min_upload_gap", 60.0),
            ),
            duty=duty,
            weights=doc.get("weights"),
            seed=doc.get("seed", 0),
            rate=doc.get("rate", 25.0),
            start_hour=doc.get("start_hour", 0.0),
            duration=doc.get("duration_s"),
            ema_ttl=doc.get("ema_ttl_s", 1800.0),
            decision_threshold=doc.get("decision_threshold", 0.5),
        ).validate()
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"config is malformed: {e}") from e


def _ms(t: float) -> int:
    return round(t * 1000)


class _Node:
    """Per-participant runtime state."""

    def __init__(self, spec: ParticipantSpec, cfg: HomeConfig, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        pid = spec.participant.id
        self.series = (
            spec.series if spec.series is not None else traceio.load_trace(spec.trace, cfg.rate)
        )
        if spec.annotation_times is not None:
            self.annotations = list(spec.annotation_times)
        elif spec.annotations:
            self.annotations = traceio.load_annotations(spec.annotations)
        else:
            self.annotations = []
        self.smoothed = smooth(self.series, cfg.detector.smooth_len)
        self.pois = detect_pois(self.smoothed, cfg.detector)
        self.watch = watch.WatchState(pid, series=self.series)
        self.stream = events.StreamDetector(pid)
        self.schedule = ema.ScheduleState()
        self.released = 0  # PoIs handed to the base station so far
        self.received = 0.0  # upload coverage, trace seconds
        self.finalized: list[events.EatingEvent] = []
        self.responses: list[ema.EmaResponse] = []
        self.survey_seq = itertools.count(1)


class HomeSimulation:
    def __init__(self, config: HomeConfig, log_fh):
        self.cfg = config.validate()
        try:
            seed = int(os.environ.get("MFED_SEED", config.seed))
        except ValueError as e:
            raise ConfigError(f"MFED_SEED must be an integer: {e}") from e
        self.log_fh = log_fh
        self.clock = ema.LocalClock(config.start_hour)
        self.weights = classifier.load_weights(config.weights) if config.weights else None
        self.nodes = [
            _Node(spec, config, np.random.default_rng([seed, i]))
            for i, spec in enumerate(config.participants)
        ]
        self.duration = config.duration or max(n.series.duration for n in self.nodes)
        _, _, self.win_right = window_extent(config.detector.window_len, config.rate)
        self.heap: list[tuple[float, int, str, int, object]] = []
        self.seq = itertools.count()
        self.records = 0
        self.event_count = 0
        self.gt_records: list[ema.GroundTruthRecord] = []

    # -- plumbing ----------------------------------------------------------

    def _log(self, record: dict):
        self.log_fh.write(traceio.dump_jsonl_record(record) + "\n")
        self.records += 1

    def _push(self, t: float, kind: str, node_idx: int, payload=None):
        heapq.heappush(self.heap, (t, next(self.seq), kind, node_idx, payload))

    # -- event handlers ----------------------------------------------------

    def _handle_poi(self, t: float, node: _Node, poi):
        upload = watch.on_poi(node.watch, poi.t, self.cfg.policy, t)
        if upload is not None:
            self._handle_upload(t, node, upload)
        elif node.watch.pending_quorum and node.watch.last_upload_t is not None:
            self._push(node.watch.last_upload_t + self.cfg.policy.min_upload_gap, "tick", self.nodes.index(node))

    def _handle_tick(self, t: float, node: _Node):
        for action in watch.on_tick(node.watch, t, self.cfg.policy, self.cfg.duty):
            if isinstance(action, watch.Upload):
                self._handle_upload(t, node, action)
            elif isinstance(action, watch.BeaconScanStart):
                for beacon in self.cfg.beacons:
                    rssi = (
                        beacon.tx_power_dbm
                        - 10.0 * beacon.path_loss_exp * math.log10(max(beacon.distance_m, 0.1))
                        + node.rng.normal(0.0, beacon.noise_db)
                    )
                    watch.record_beacon_reading(node.watch, action.t, beacon.id, round(rssi, 2))

    def _handle_upload(self, t: float, node: _Node, upload: watch.Upload):
        payload = upload.payload
        pid = node.spec.participant.id
        span_end = min(payload.span[1], self.duration)
        self._log(
            {
                "kind": "upload",
                "t_ms": _ms(t),
                "participant": pid,
                "span_start_ms": _ms(payload.span[0]),
                "span_end_ms": _ms(span_end),
                "samples": len(payload.accel) if payload.accel is not None else 0,
            }
        )
        for bt, beacon_id, rssi in payload.beacon_readings:
            self._log(
                {
                    "kind": "beacon",
                    "t_ms": _ms(bt),
                    "participant": pid,
                    "beacon": beacon_id,
                    "rssi_dbm": rssi,
                }
            )
        for bt, pct in payload.battery_samples:
            self._log(
                {"kind": "battery", "t_ms": _ms(bt), "participant": pid, "percent": round(pct, 3)}
            )
        node.received = payload.span[1]
        self._release_pois(t, node)

    def _release_pois(self, t: float, node: _Node):
        """Classify PoIs whose full window has reached the base station."""
        covered = np.searchsorted(node.series.t, node.received, side="left")
        while node.released < len(node.pois):
            poi = node.pois[node.released]
            if poi.index + self.win_right >= covered:
                break
            node.released += 1
            if self.weights is not None:
                window = extract_window(node.smoothed, poi, self.cfg.detector)
                prob = classifier.forward(self.weights, window)
                if prob < self.cfg.decision_threshold:
                    continue
            else:
                prob = None
            record = {
                "kind": "gesture",
                "t_ms": _ms(poi.t),
                "participant": node.spec.participant.id,
            }
            if prob is not None:
                record["prob"] = round(prob, 6)
            self._log(record)
            for emission in node.stream.observe(poi.t, t):
                self._handle_emission(t, node, emission)
            # quiescence checks; clamped to now since gestures can arrive
            # long after their sample time (next quorum or final flush)
            idx = self.nodes.index(node)
            self._push(max(t, poi.t + events.MERGE_GAP), "stream_check", idx)
            self._push(max(t, poi.t + events.MERGE_GAP + events.CLUSTER_GAP), "stream_check", idx)

    def _handle_emission(self, t: float, node: _Node, emission):
        pid = node.spec.participant.id
        if isinstance(emission, events.EventDetected):
            self.event_count += 1
            event_id = f"{pid}-ev{self.event_count}"
            self._log(
                {
                    "kind": "event_detected",
                    "t_ms": _ms(t),
                    "participant": pid,
                    "event": event_id,
                    "start_ms": _ms(emission.event.start),
                }
            )
            outcome = ema.on_event_detected(
                node.spec.participant, emission.event, t, node.schedule, self.clock
            )
            if isinstance(outcome, ema.SendEatingEma):
                survey = ema.EmaSurvey(
                    id=f"{pid}-{next(node.survey_seq)}",
                    participant_id=pid,
                    kind=ema.SurveyKind.EATING,
                    sent_t=outcome.at,
                    trigger=f"event:{event_id}",
                    event=emission.event,
                )
                self._push(outcome.at, "ema_send", self.nodes.index(node), survey)
            else:
                self._log(
                    {
                        "kind": "ema_suppressed",
                        "t_ms": _ms(t),
                        "participant": pid,
                        "event": event_id,
                        "reason": outcome.reason.value,
                    }
                )
        else:  # EventFinalized
            node.finalized.append(emission.event)
            self._log(
                {
                    "kind": "eating_event",
                    "participant": pid,
                    "start_ms": _ms(emission.event.start),
                    "end_ms": _ms(emission.event.end),
                    "gestures": [_ms(g) for g in emission.event.gesture_times],
                }
            )

    def _handle_stream_check(self, t: float, node: _Node):
        for emission in node.stream.advance(t):
            self._handle_emission(t, node, emission)

    def _handle_hour(self, t: float, node: _Node):
        outcome = ema.hourly_tick(node.spec.participant, t, node.schedule, self.clock)
        if isinstance(outcome, ema.SendMoodEma):
            pid = node.spec.participant.id
            survey = ema.EmaSurvey(
                id=f"{pid}-{next(node.survey_seq)}",
                participant_id=pid,
                kind=ema.SurveyKind.MOOD,
                sent_t=outcome.at,
                trigger="hourly",
            )
            self._push(outcome.at, "ema_send", self.nodes.index(node), survey)

    def _handle_ema_send(self, t: float, node: _Node, survey: ema.EmaSurvey):
        self._log(
            {
                "kind": "ema_sent",
                "t_ms": _ms(t),
                "participant": survey.participant_id,
                "survey": survey.id,
                "ema": survey.kind.value,
                "trigger": survey.trigger,
            }
        )
        profile = node.spec.responder
        idx = self.nodes.index(node)
        if node.rng.random() < profile.response_prob:
            delay = min(self.cfg.ema_ttl - 1.0, max(5.0, node.rng.exponential(profile.delay_mean_s)))
            self._push(t + delay, "ema_answer", idx, survey)
        else:
            self._push(t + self.cfg.ema_ttl, "ema_expire", idx, survey)

    def _answers(self, node: _Node, survey: ema.EmaSurvey):
        """Responder agent: drive the flow to Terminal, truthfully when asked."""
        rng = node.rng
        profile = node.spec.responder
        mood = ema.MoodItems(
            tuple(int(v) for v in rng.integers(1, 5, size=len(ema.MOOD_ITEMS))),
            ate_last_hour=None,
        )
        if survey.kind is ema.SurveyKind.MOOD:
            if profile.truthful:
                lo = survey.sent_t - ema.HOURLY_LOOKBACK
                ate = any(lo <= a <= survey.sent_t for a in node.annotations)
            else:
                ate = bool(rng.random() < 0.2)
            return [replace(mood, ate_last_hour=ate)]
        event = survey.event
        if profile.truthful:
            confirmed = any(
                event.start - 120.0 <= a <= event.end + 120.0 for a in node.annotations
            )
        else:
            confirmed = bool(rng.random() < 0.7)
        if not confirmed:
            return [False, ema.NotEatingActivity(frozenset({"using_phone"})), mood]
        battery = ema.EatingBattery(
            hunger=float(rng.integers(0, 101)),
            satiety=float(rng.integers(0, 101)),
            eah=tuple(int(v) for v in rng.integers(1, 5, size=ema.EAH_ITEM_COUNT)),
            who_with=frozenset(profile.who_with) or frozenset({"nobody"}),
            eating_type=profile.eating_type,
        )
        return [True, True, battery, mood]

    def _handle_ema_answer(self, t: float, node: _Node, survey: ema.EmaSurvey):
        state = ema.new_flow(survey)
        for answer in self._answers(node, survey):
            state = ema.flow_step(state, answer)
        response = replace(state.collected, t=t)
        node.responses.append(response)
        record = {
            "kind": "ema_response",
            "t_ms": _ms(t),
            "participant": survey.participant_id,
            "survey": survey.id,
            "ema": survey.kind.value,
        }
        if survey.kind is ema.SurveyKind.EATING:
            record["eating_confirmed"] = response.eating_confirmed
            if response.eating_confirmed:
                record["who_with"] = sorted(response.who_with)
                record["eating_type"] = response.eating_type
                record["hunger"] = response.hunger
                record["satiety"] = response.satiety
                record["eah"] = list(response.eah)
            else:
                record["activities"] = sorted(response.not_eating_activity.options)
        else:
            record["ate_last_hour"] = response.ate_last_hour
        record["mood"] = list(response.mood)
        self._log(record)

    def _handle_ema_expire(self, t: float, node: _Node, survey: ema.EmaSurvey):
        self._log(
            {
                "kind": "ema_expired",
                "t_ms": _ms(t),
                "participant": survey.participant_id,
                "survey": survey.id,
            }
        )

    # -- main loop ----------------------------------------------------------

    def run(self) -> dict:
        end = self.duration
        for idx, node in enumerate(self.nodes):
            for poi in node.pois:
                if poi.t <= end:
                    self._push(poi.t, "poi", idx, poi)
            if self.cfg.duty is not None:
                k = 0
                while k * self.cfg.duty.beacon_interval <= end:
                    start = k * self.cfg.duty.beacon_interval
                    self._push(start, "tick", idx)
                    self._push(min(end, start + self.cfg.duty.beacon_scan_len), "tick", idx)
                    k += 1
            first_hour = -(self.cfg.start_hour * 3600.0) % 3600.0
            t = first_hour
            while t <= end:
                self._push(t, "hour", idx)
                t += 3600.0

        handlers = {
            "poi": lambda t, n, p: self._handle_poi(t, n, p),
            "tick": lambda t, n, p: self._handle_tick(t, n),
            "hour": lambda t, n, p: self._handle_hour(t, n),
            "stream_check": lambda t, n, p: self._handle_stream_check(t, n),
            "ema_send": lambda t, n, p: self._handle_ema_send(t, n, p),
            "ema_answer": lambda t, n, p: self._handle_ema_answer(t, n, p),
            "ema_expire": lambda t, n, p: self._handle_ema_expire(t, n, p),
        }
        while self.heap:
            t, _, kind, idx, payload = heapq.heappop(self.heap)
            if t > end:
                break
            handlers[kind](t, self.nodes[idx], payload)

        for node in self.nodes:
            final = watch.flush(node.watch, end)
            if final is not None:
                self._handle_upload(end, node, final)
            for emission in node.stream.finish(end):
                self._handle_emission(end, node, emission)

        self._resolve_ground_truth(end)
        return {
            "records": self.records,
            "events": sum(len(n.finalized) for n in self.nodes),
            "ground_truth": list(self.gt_records),
        }

    def _resolve_ground_truth(self, end: float):
        roster = [n.spec.participant for n in self.nodes]
        responses = [r for n in self.nodes for r in n.responses]
        all_events = [ev for n in self.nodes for ev in n.finalized]
        records = ema.first_person_gt(responses)
        records += ema.resolve_collaborative_gt(responses, roster)
        records += ema.resolve_hourly_gt(responses, all_events)
        self.gt_records = records
        for r in records:
            self._log(
                {
                    "kind": "ground_truth",
                    "t_ms": _ms(end),
                    "subject": r.subject_id,
                    "start_ms": _ms(r.window[0]),
                    "end_ms": _ms(r.window[1]),
                    "fact": r.fact.value,
                    "provenance": r.provenance.kind,
                    "sources": list(r.provenance.sources),
                    "missed_detection": r.missed_detection,
                }
            )


def run_home_simulation(config: HomeConfig, log_fh, gt_fh=None) -> dict:
    """Run one home to completion, writing JSONL to log_fh (and optionally
    the ground-truth CSV to gt_fh). Returns a summary dict."""
    sim = HomeSimulation(config, log_fh)
    summary = sim.run()
    if gt_fh is not None:
        traceio.write_ground_truth_csv(sim.gt_records, gt_fh)
    return summary
