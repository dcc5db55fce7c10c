"""Length-band calibration and control-event classification.

The attack's observable is one-dimensional: the TLS record length of
each client application-data record. Question markers and alternate-
choice records occupy two narrow, disjoint length bands, so a pair of
closed integer intervals is both sufficient and auditable as a
classifier. Calibration fits the intervals from labelled sessions; when
the intervals cannot be separated the side channel is considered closed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .errors import InseparableBands, InsufficientLabels, ValidationError
from .simulate import EventKind, GroundTruthLog, SideChannelModel
from .trace import Trace, client_record_lengths

CALIBRATION_MARGIN = 1


@dataclass(frozen=True)
class LengthBands:
    """Closed, disjoint length intervals for the two control-record kinds."""

    type1: tuple[int, int]
    type2: tuple[int, int]

    def __post_init__(self):
        for name, (lo, hi) in (("type1", self.type1), ("type2", self.type2)):
            if lo > hi:
                raise ValidationError(f"{name} band [{lo},{hi}] is empty")
        if _overlap(self.type1, self.type2):
            raise ValidationError("type1 and type2 bands overlap")

    def kind_of(self, length: int) -> EventKind | None:
        if self.type1[0] <= length <= self.type1[1]:
            return EventKind.TYPE1
        if self.type2[0] <= length <= self.type2[1]:
            return EventKind.TYPE2
        return None


@dataclass(frozen=True)
class ClassifiedEvent:
    t_us: int
    kind: EventKind
    length: int


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def _control_lengths(
    trace: Trace, truth: GroundTruthLog
) -> dict[EventKind, list[int]]:
    """Record length of each labelled control event, matched by timestamp."""
    by_time: dict[int, list[int]] = {}
    for t_us, length in client_record_lengths(trace):
        by_time.setdefault(t_us, []).append(length)
    consumed: dict[int, int] = {}
    out: dict[EventKind, list[int]] = {EventKind.TYPE1: [], EventKind.TYPE2: []}
    for event in truth.events:
        if event.kind not in out:
            # advance the per-timestamp cursor so co-timed noise cannot
            # shadow a control record later in the same microsecond
            if event.t_us in by_time:
                consumed[event.t_us] = consumed.get(event.t_us, 0) + 1
            continue
        lengths = by_time.get(event.t_us)
        if not lengths:
            continue
        idx = consumed.get(event.t_us, 0)
        if idx < len(lengths):
            out[event.kind].append(lengths[idx])
            consumed[event.t_us] = idx + 1
    return out


def calibrate_bands(
    labelled: Iterable[tuple[Trace, GroundTruthLog]],
) -> LengthBands:
    """Fit length bands from labelled sessions.

    Each band is the observed min/max of its kind widened by one length
    unit. If that makes the bands overlap they are shrunk to the 1st/99th
    percentile of their samples; if they still overlap the side channel
    is closed and InseparableBands is raised.
    """
    samples: dict[EventKind, list[int]] = {EventKind.TYPE1: [], EventKind.TYPE2: []}
    for trace, truth in labelled:
        for kind, lengths in _control_lengths(trace, truth).items():
            samples[kind].extend(lengths)
    if not samples[EventKind.TYPE1] or not samples[EventKind.TYPE2]:
        raise InsufficientLabels(
            "calibration needs at least one sample of each control-event kind"
        )

    def outer(kind: EventKind) -> tuple[int, int]:
        values = samples[kind]
        return min(values) - CALIBRATION_MARGIN, max(values) + CALIBRATION_MARGIN

    def percentile(kind: EventKind) -> tuple[int, int]:
        values = np.asarray(samples[kind])
        lo, hi = np.percentile(values, [1, 99], method="nearest")
        return int(lo), int(hi)

    band1, band2 = outer(EventKind.TYPE1), outer(EventKind.TYPE2)
    if _overlap(band1, band2):
        band1, band2 = percentile(EventKind.TYPE1), percentile(EventKind.TYPE2)
    if _overlap(band1, band2):
        raise InseparableBands(
            f"control-record bands overlap: type1={band1} type2={band2}"
        )
    return LengthBands(type1=band1, type2=band2)


def classify_events(trace: Trace, bands: LengthBands) -> list[ClassifiedEvent]:
    """Pick control events out of a trace by band membership, in time order."""
    out = []
    for t_us, length in client_record_lengths(trace):
        kind = bands.kind_of(length)
        if kind is not None:
            out.append(ClassifiedEvent(t_us=t_us, kind=kind, length=length))
    return out


def bands_for_model(model: SideChannelModel) -> LengthBands:
    """Bands covering the full sampling support of a model's control records.

    Useful when the model is known exactly (oracle checks, noiseless
    pipelines) and calibration data is unnecessary.
    """
    lo1, hi1 = model.type1_len.support()
    lo2, hi2 = model.type2_len.support()
    return LengthBands(
        type1=(lo1 - CALIBRATION_MARGIN, hi1 + CALIBRATION_MARGIN),
        type2=(lo2 - CALIBRATION_MARGIN, hi2 + CALIBRATION_MARGIN),
    )


def length_histogram(trace: Trace, bin_width: int) -> dict[int, int]:
    """Histogram of client application-data lengths, floor-binned.

    Keys are bin lower bounds (multiples of ``bin_width``); values are
    counts. The counts sum to the number of client application-data
    records in the trace.
    """
    if bin_width < 1:
        raise ValidationError("bin_width must be >= 1")
    hist: dict[int, int] = {}
    for _, length in client_record_lengths(trace):
        key = (length // bin_width) * bin_width
        hist[key] = hist.get(key, 0) + 1
    return dict(sorted(hist.items()))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def write_bands(bands: LengthBands) -> bytes:
    obj = {"type1": list(bands.type1), "type2": list(bands.type2)}
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def read_bands(source: bytes | str | IO) -> LengthBands:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    obj = json.loads(source)
    return LengthBands(type1=tuple(obj["type1"]), type2=tuple(obj["type2"]))


def write_events(events: list[ClassifiedEvent]) -> bytes:
    obj = {
        "events": [
            {"t_us": e.t_us, "kind": e.kind.value, "len": e.length} for e in events
        ]
    }
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def read_events(source: bytes | str | IO) -> list[ClassifiedEvent]:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    obj = json.loads(source)
    return [
        ClassifiedEvent(int(e["t_us"]), EventKind(e["kind"]), int(e["len"]))
        for e in obj["events"]
    ]


def histogram_csv(hist: dict[int, int]) -> str:
    lines = ["bin,count"]
    lines += [f"{bin_lo},{count}" for bin_lo, count in sorted(hist.items())]
    return "\n".join(lines) + "\n"
