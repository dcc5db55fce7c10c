"""Trace-level defenses against the length side-channel, and what survives.

Each defense rewrites the client control records of an existing trace
the way a patched client would have emitted them: padding to a fixed
size or to buckets, splitting one record into several, or shrinking
lengths the way compression would. The timing probe then checks for the
residual signal a defense cannot remove this way: the pause in chunk
requests while a choice window is open.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .classify import LengthBands, calibrate_bands, classify_events
from .errors import BadPolicy, InseparableBands, ValidationError
from .trace import (
    APPLICATION_DATA,
    Direction,
    MAX_RECORD_LEN,
    TlsRecord,
    Trace,
)

PAD_FIXED = "pad_fixed"
PAD_BUCKETS = "pad_buckets"
SPLIT = "split"
COMPRESS = "compress"

DEFAULT_GAP_FACTOR = 3.0


@dataclass(frozen=True)
class DefensePolicy:
    kind: str
    pad_to: int = 0
    buckets: tuple[int, ...] = ()
    split_unit: int = 0
    compress_ratio_range: tuple[float, float] = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.kind == PAD_FIXED:
            if self.pad_to < 1:
                raise ValidationError("pad_to must be positive")
        elif self.kind == PAD_BUCKETS:
            if not self.buckets or any(b < 1 for b in self.buckets):
                raise ValidationError("buckets must be positive integers")
            if list(self.buckets) != sorted(set(self.buckets)):
                raise ValidationError("buckets must be strictly ascending")
        elif self.kind == SPLIT:
            if self.split_unit < 1:
                raise ValidationError("split_unit must be positive")
        elif self.kind == COMPRESS:
            lo, hi = self.compress_ratio_range
            if not (0 < lo <= hi <= 1):
                raise ValidationError("compress ratios must lie in (0, 1]")
        else:
            raise ValidationError(f"unknown defense kind {self.kind!r}")

    def to_obj(self) -> dict:
        obj: dict = {"kind": self.kind, "seed": self.seed}
        if self.kind == PAD_FIXED:
            obj["pad_to"] = self.pad_to
        elif self.kind == PAD_BUCKETS:
            obj["buckets"] = list(self.buckets)
        elif self.kind == SPLIT:
            obj["split_unit"] = self.split_unit
        elif self.kind == COMPRESS:
            obj["compress_ratio_range"] = list(self.compress_ratio_range)
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "DefensePolicy":
        return cls(
            kind=obj["kind"],
            pad_to=int(obj.get("pad_to", 0)),
            buckets=tuple(obj.get("buckets", ())),
            split_unit=int(obj.get("split_unit", 0)),
            compress_ratio_range=tuple(obj.get("compress_ratio_range", (1.0, 1.0))),
            seed=int(obj.get("seed", 0)),
        )


BandSet = Sequence[tuple[int, int]]


def _as_band_set(protected: BandSet | LengthBands) -> list[tuple[int, int]]:
    if isinstance(protected, LengthBands):
        bands = [protected.type1, protected.type2]
    else:
        bands = [(int(lo), int(hi)) for lo, hi in protected]
    for i, (lo, hi) in enumerate(bands):
        if lo > hi:
            raise ValidationError(f"protected band [{lo},{hi}] is empty")
        for lo2, hi2 in bands[i + 1 :]:
            if lo <= hi2 and lo2 <= hi:
                raise ValidationError("protected bands must be disjoint")
    return bands


def apply_defense(
    trace: Trace, policy: DefensePolicy, protected: BandSet | LengthBands
) -> Trace:
    """Rewrite in-band client application-data records per the policy.

    Records outside the protected bands (and everything server-side) are
    passed through bit-identical. Timestamps never change; split parts
    all inherit the original record's timestamp.
    """
    bands = _as_band_set(protected)
    rng = np.random.default_rng(policy.seed % (1 << 64))

    def is_protected(record: TlsRecord) -> bool:
        return (
            record.direction is Direction.CLIENT_TO_SERVER
            and record.content_type == APPLICATION_DATA
            and any(lo <= record.length <= hi for lo, hi in bands)
        )

    out: list[TlsRecord] = []
    for record in trace.records:
        if not is_protected(record):
            out.append(record)
            continue
        if policy.kind == PAD_FIXED:
            if policy.pad_to < record.length:
                raise BadPolicy(
                    f"pad_to {policy.pad_to} below protected record length {record.length}"
                )
            out.append(_with_length(record, policy.pad_to))
        elif policy.kind == PAD_BUCKETS:
            target = next(
                (b for b in policy.buckets if b >= record.length), MAX_RECORD_LEN
            )
            out.append(_with_length(record, target))
        elif policy.kind == SPLIT:
            parts = math.ceil(record.length / policy.split_unit)
            remainder = record.length - (parts - 1) * policy.split_unit
            for i in range(parts):
                size = policy.split_unit if i < parts - 1 else max(1, remainder)
                out.append(_with_length(record, size))
        else:  # COMPRESS
            lo, hi = policy.compress_ratio_range
            ratio = float(rng.uniform(lo, hi))
            out.append(_with_length(record, max(1, math.ceil(record.length * ratio))))
    return Trace(meta=trace.meta, records=out)


def _with_length(record: TlsRecord, length: int) -> TlsRecord:
    return TlsRecord(
        t_us=record.t_us,
        direction=record.direction,
        content_type=record.content_type,
        length=length,
    )


# ---------------------------------------------------------------------------
# Residual timing channel
# ---------------------------------------------------------------------------


def timing_probe(
    trace: Trace,
    gap_factor: float = DEFAULT_GAP_FACTOR,
    chunk_band: tuple[int, int] | None = None,
) -> list[tuple[int, int]]:
    """Suspected choice-window intervals from gaps in chunk-request arrivals.

    Chunk requests are the steady bulk of client traffic, so their band
    is estimated as median +/- 5 MAD of client record lengths unless
    given explicitly. Any inter-arrival between band-matching records
    exceeding ``gap_factor`` times the median inter-arrival is reported
    as a (start_us, end_us) interval. Padding defenses do not disturb
    timestamps, so these gaps survive them.
    """
    lengths = [
        (r.t_us, r.length)
        for r in trace.records
        if r.direction is Direction.CLIENT_TO_SERVER
        and r.content_type == APPLICATION_DATA
    ]
    if len(lengths) < 3:
        return []
    if chunk_band is None:
        values = [length for _, length in lengths]
        center = statistics.median(values)
        mad = statistics.median([abs(v - center) for v in values])
        radius = max(5 * mad, 64)
        chunk_band = (int(center - radius), int(center + radius))

    times = [t for t, length in lengths if chunk_band[0] <= length <= chunk_band[1]]
    if len(times) < 3:
        return []
    gaps = [b - a for a, b in zip(times, times[1:])]
    median_gap = statistics.median(gaps)
    if median_gap <= 0:
        return []
    threshold = gap_factor * median_gap
    return [
        (times[i], times[i + 1]) for i, gap in enumerate(gaps) if gap > threshold
    ]


# ---------------------------------------------------------------------------
# Corpus-level defense evaluation
# ---------------------------------------------------------------------------


@dataclass
class DefenseReport:
    """Before/after attack quality for one defense over one corpus."""

    policy: DefensePolicy
    before: "Metrics"
    after: "Metrics"
    recalibration_inseparable: bool
    timing_intervals: list[list[tuple[int, int]]] = field(default_factory=list)
    window_coverage: float = 0.0

    def to_obj(self) -> dict:
        return {
            "policy": self.policy.to_obj(),
            "before": self.before.to_obj(),
            "after": self.after.to_obj(),
            "recalibration_inseparable": self.recalibration_inseparable,
            "window_coverage": self.window_coverage,
            "timing_intervals": [
                [[start, end] for start, end in session]
                for session in self.timing_intervals
            ],
        }


def evaluate_defense(
    corpus: "DatasetManifest",
    policy: DefensePolicy,
    bands: LengthBands,
    graph=None,
    calibration_fraction: float = 0.1,
) -> DefenseReport:
    """Measure what a defense does to the attack over a labelled corpus.

    The attacker's calibrated ``bands`` identify the records to protect.
    Post-defense metrics reuse those stale bands (the attacker does not
    know about the defense); separately, recalibration on the defended
    traces is attempted to see whether the length channel is closed
    outright (InseparableBands). Timing intervals are probed per
    defended session, and coverage counts sessions whose every true
    choice window overlaps at least one reported interval.
    """
    from .evaluate import Metrics, _metrics_for_sessions, load_entry

    entries = list(corpus.entries)
    if not entries:
        raise ValidationError("corpus manifest has no entries")
    sessions = [load_entry(corpus, e) for e in entries]

    n_cal = max(1, math.ceil(calibration_fraction * len(sessions)))
    eval_sessions = sessions[n_cal:] or sessions

    before = _metrics_for_sessions(
        [(classify_events(tr, bands), truth, graph) for tr, truth in eval_sessions]
    )

    defended = [(apply_defense(tr, policy, bands), truth) for tr, truth in sessions]
    defended_eval = defended[n_cal:] or defended
    after = _metrics_for_sessions(
        [(classify_events(tr, bands), truth, graph) for tr, truth in defended_eval]
    )

    # recalibrate over every defended session: if even full knowledge cannot
    # separate the bands, the length channel is closed outright
    try:
        calibrate_bands(defended)
        inseparable = False
    except InseparableBands:
        inseparable = True

    intervals = [timing_probe(tr) for tr, _ in defended]
    coverage = 0.0
    if graph is not None:
        covered = sum(
            1
            for (tr, truth), found in zip(defended, intervals)
            if _all_windows_flagged(truth, graph, found)
        )
        coverage = covered / len(defended)

    return DefenseReport(
        policy=policy,
        before=before,
        after=after,
        recalibration_inseparable=inseparable,
        timing_intervals=intervals,
        window_coverage=coverage,
    )


def _all_windows_flagged(truth, graph, intervals: list[tuple[int, int]]) -> bool:
    from .simulate import EventKind

    windows = []
    for event in truth.events:
        if event.kind is EventKind.TYPE1 and event.qid is not None:
            window_ms = next(
                (cp.window_ms for cp in graph.choices.values() if cp.qid == event.qid),
                10_000,
            )
            windows.append((event.t_us, event.t_us + window_ms * 1000))
    return all(
        any(start <= w_end and w_start <= end for start, end in intervals)
        for w_start, w_end in windows
    )


def write_policy(policy: DefensePolicy) -> bytes:
    return (json.dumps(policy.to_obj(), separators=(",", ":")) + "\n").encode("utf-8")


def read_policy(source: bytes | str | IO) -> DefensePolicy:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return DefensePolicy.from_obj(json.loads(source))
