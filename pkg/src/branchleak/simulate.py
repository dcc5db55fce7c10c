"""Synthetic session generator for check-pointed interactive streaming.

The simulator plays a choice path through a script graph and emits the
client/server TLS records such a session would produce: steady chunk
requests while a segment streams, one question-marker control record
when a choice appears, speculative prefetch of the default branch during
the choice window, a second control record only when the viewer picks
the alternate option, and background noise records. Every run is a pure
function of (graph, path, profile, model, seed).

Lengths are sampled from per-kind distributions; the defaults are
simulator parameters chosen to give well-separated unimodal bands, not
measurements of any real service.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np

from .profiles import OperationalProfile
from .script import Branch, ChoicePath, ScriptGraph, segments_for_path
from .trace import (
    APPLICATION_DATA,
    Direction,
    MAX_RECORD_LEN,
    Origin,
    TlsRecord,
    Trace,
    TraceMeta,
)

SERVER_BULK_LEN = MAX_RECORD_LEN
SERVER_RESPONSE_LAG_US = 20_000


class EventKind(enum.Enum):
    TYPE1 = "type1"  # question appeared on screen
    TYPE2 = "type2"  # viewer picked the non-default option
    CHUNK_REQ = "chunk_req"
    NOISE = "noise"


CONTROL_KINDS = (EventKind.TYPE1, EventKind.TYPE2)


@dataclass(frozen=True)
class LengthDist:
    """Integer length distribution, clamped to the TLS record range.

    ``normal`` is a discretized Gaussian cut off at four jitters either
    side of the center; ``uniform`` draws integers from
    [center - jitter, center + jitter].
    """

    center: int
    jitter: int = 0
    shape: str = "normal"

    def __post_init__(self):
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")
        if self.shape not in ("normal", "uniform"):
            raise ValueError(f"unknown distribution shape {self.shape!r}")

    def sample(self, rng: np.random.Generator) -> int:
        if self.jitter == 0:
            value = self.center
        elif self.shape == "uniform":
            value = int(rng.integers(self.center - self.jitter, self.center + self.jitter + 1))
        else:
            offset = rng.normal(0.0, self.jitter)
            bound = 4 * self.jitter
            offset = max(-bound, min(bound, offset))
            value = self.center + round(offset)
        return max(1, min(MAX_RECORD_LEN, value))

    def support(self) -> tuple[int, int]:
        """Smallest closed interval every sample falls into."""
        radius = self.jitter if self.shape == "uniform" else 4 * self.jitter
        lo = max(1, self.center - radius)
        hi = min(MAX_RECORD_LEN, self.center + radius)
        return lo, hi


@dataclass(frozen=True)
class SideChannelModel:
    """Record-length and timing knobs of the simulated client."""

    type1_len: LengthDist = LengthDist(710, 8)
    type2_len: LengthDist = LengthDist(910, 8)
    chunk_req_len: LengthDist = LengthDist(450, 40)
    noise_rate_hz: float = 0.5
    noise_len: LengthDist = LengthDist(770, 690, "uniform")
    prefetch_chunks: int = 3

    def __post_init__(self):
        if self.noise_rate_hz < 0:
            raise ValueError("noise_rate_hz must be >= 0")
        if self.prefetch_chunks < 0:
            raise ValueError("prefetch_chunks must be >= 0")

    def noiseless(self) -> "SideChannelModel":
        """Copy with all jitter and background noise removed."""
        return replace(
            self,
            type1_len=replace(self.type1_len, jitter=0),
            type2_len=replace(self.type2_len, jitter=0),
            chunk_req_len=replace(self.chunk_req_len, jitter=0),
            noise_rate_hz=0.0,
        )


@dataclass(frozen=True)
class TruthEvent:
    t_us: int
    kind: EventKind
    qid: str | None = None


@dataclass
class GroundTruthLog:
    """What actually happened in a simulated session."""

    events: list[TruthEvent]
    path: ChoicePath

    def control_events(self) -> list[TruthEvent]:
        return [e for e in self.events if e.kind in CONTROL_KINDS]

    def count(self, kind: EventKind) -> int:
        return sum(1 for e in self.events if e.kind is kind)


def model_for_profile(
    profile: OperationalProfile, base: SideChannelModel
) -> SideChannelModel:
    """Deterministic per-profile variant of a side-channel model.

    Different stacks shift the control-record sizes a little, so each
    operational profile nudges the distribution centers by a stable
    offset in [-4, 4]. Jitters are never touched, which keeps the
    question/alternate bands separated for every profile.
    """
    digest = hashlib.md5(profile.operational_key().encode("utf-8")).digest()

    def nudge(dist: LengthDist, i: int) -> LengthDist:
        offset = digest[i] % 9 - 4
        center = max(1, min(MAX_RECORD_LEN, dist.center + offset))
        return replace(dist, center=center)

    return replace(
        base,
        type1_len=nudge(base.type1_len, 0),
        type2_len=nudge(base.type2_len, 1),
        chunk_req_len=nudge(base.chunk_req_len, 2),
    )


# ---------------------------------------------------------------------------
# Session simulation
# ---------------------------------------------------------------------------


@dataclass
class _Timeline:
    records: list[tuple[int, int, TlsRecord]] = field(default_factory=list)
    events: list[tuple[int, int, TruthEvent]] = field(default_factory=list)
    _order: int = 0

    def client(self, t_us: int, length: int, kind: EventKind, qid: str | None = None):
        rec = TlsRecord(t_us, Direction.CLIENT_TO_SERVER, APPLICATION_DATA, length)
        self.records.append((t_us, self._order, rec))
        self.events.append((t_us, self._order, TruthEvent(t_us, kind, qid)))
        self._order += 1

    def server(self, t_us: int, length: int):
        rec = TlsRecord(t_us, Direction.SERVER_TO_CLIENT, APPLICATION_DATA, length)
        self.records.append((t_us, self._order, rec))
        self._order += 1


def simulate_session(
    graph: ScriptGraph,
    path: ChoicePath,
    profile: OperationalProfile,
    model: SideChannelModel,
    seed: int,
    trace_id: str | None = None,
) -> tuple[Trace, GroundTruthLog]:
    """Produce one labelled synthetic trace for a path through the graph.

    Timeline: each visited segment streams one chunk request per
    ``chunk_ms``; when the segment carries a decided question, a type-1
    record marks the question, the default branch's first chunks are
    prefetched early in the window, and an alternate decision adds a
    type-2 record at the (sampled) decision instant and cancels any
    prefetch scheduled after it. Buffered playout covers the window, so
    the chosen branch starts streaming when the window closes. Background
    noise arrives as a Poisson process over the session.
    """
    rng = np.random.default_rng(seed % (1 << 64))
    segment_ids = segments_for_path(graph, path)
    timeline = _Timeline()

    t = 0
    for i, seg_id in enumerate(segment_ids):
        seg = graph.segments[seg_id]
        n_chunks = math.ceil(seg.duration_ms / seg.chunk_ms)
        for j in range(n_chunks):
            tc = t + j * seg.chunk_ms * 1000
            timeline.client(tc, model.chunk_req_len.sample(rng), EventKind.CHUNK_REQ)
            timeline.server(tc + SERVER_RESPONSE_LAG_US, SERVER_BULK_LEN)
        t_question = t + seg.duration_ms * 1000

        if i >= len(path.decisions):
            t = t_question
            break

        qid, taken = path.decisions[i]
        cp = graph.choices[seg_id]
        window_us = cp.window_ms * 1000
        timeline.client(t_question, model.type1_len.sample(rng), EventKind.TYPE1, qid)
        decision_at = t_question + int(
            rng.integers(window_us // 10, 9 * window_us // 10 + 1)
        )

        prefetch_step = graph.segments[cp.default_next].chunk_ms * 1000
        for j in range(model.prefetch_chunks):
            tp = t_question + j * prefetch_step
            if tp >= t_question + window_us:
                break
            if taken is Branch.ALT and tp >= decision_at:
                break  # the alternate choice cancels the remaining prefetch
            timeline.client(tp, model.chunk_req_len.sample(rng), EventKind.CHUNK_REQ, qid)
            timeline.server(tp + SERVER_RESPONSE_LAG_US, SERVER_BULK_LEN)

        if taken is Branch.ALT:
            timeline.client(decision_at, model.type2_len.sample(rng), EventKind.TYPE2, qid)
        t = t_question + window_us

    session_end = t
    if model.noise_rate_hz > 0 and session_end > 0:
        n_noise = int(rng.poisson(model.noise_rate_hz * session_end / 1e6))
        if n_noise:
            times = np.sort(rng.integers(0, session_end, size=n_noise))
            for tn in times:
                timeline.client(int(tn), model.noise_len.sample(rng), EventKind.NOISE)

    timeline.records.sort(key=lambda item: (item[0], item[1]))
    timeline.events.sort(key=lambda item: (item[0], item[1]))

    if trace_id is None:
        trace_id = f"sim-{seed % (1 << 64):016x}"
    meta = TraceMeta(trace_id=trace_id, origin=Origin.SYNTHETIC, profile=profile)
    trace = Trace(meta=meta, records=[r for _, _, r in timeline.records])
    truth = GroundTruthLog(events=[e for _, _, e in timeline.events], path=path)
    return trace, truth


# ---------------------------------------------------------------------------
# Ground-truth serialization
# ---------------------------------------------------------------------------


def write_truth(truth: GroundTruthLog) -> bytes:
    obj = {
        "path": truth.path.to_obj(),
        "events": [
            {"t_us": e.t_us, "kind": e.kind.value}
            | ({"qid": e.qid} if e.qid is not None else {})
            for e in truth.events
        ],
    }
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def read_truth(source: bytes | str | IO) -> GroundTruthLog:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    obj = json.loads(source)
    events = [
        TruthEvent(int(e["t_us"]), EventKind(e["kind"]), e.get("qid"))
        for e in obj["events"]
    ]
    return GroundTruthLog(events=events, path=ChoicePath.from_obj(obj["path"]))


def load_truth(path) -> GroundTruthLog:
    with open(path, "rb") as fh:
        return read_truth(fh)


def save_truth(truth: GroundTruthLog, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_truth(truth))
