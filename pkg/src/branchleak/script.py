"""Branching script graphs for interactive movies.

A script is a set of playable segments connected by binary choice points.
Playback starts at the entry segment; when a segment with a choice point
finishes, the viewer picks the default or the alternate branch and the
corresponding segment plays next. A segment without a choice point ends
the traversal.

The same question may be reachable from both branches of an earlier one
(the graph rejoins), in which case several choice-point rows share a qid;
they must then agree on their targets and window. Cycles are legal and
are kept finite by the depth bound of :func:`enumerate_paths`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import IO, Iterable

from .errors import DepthExceeded, InconsistentPath, ParseError, ValidationError

DEFAULT_WINDOW_MS = 10_000


class Branch(enum.Enum):
    """Which option of a binary choice the viewer took."""

    DEFAULT = "default"
    ALT = "alt"

    @property
    def sort_key(self) -> int:
        return 0 if self is Branch.DEFAULT else 1


@dataclass(frozen=True)
class Segment:
    """A contiguous piece of the movie, streamed in fixed-size time chunks."""

    id: str
    duration_ms: int
    chunk_ms: int


@dataclass(frozen=True)
class ChoicePoint:
    """A binary question shown when ``after_segment`` finishes playing.

    ``default_next`` is the branch the player prefetches during the choice
    window and falls back to when the window lapses.
    """

    qid: str
    after_segment: str
    default_next: str
    alt_next: str
    window_ms: int = DEFAULT_WINDOW_MS

    def next_segment(self, taken: Branch) -> str:
        return self.default_next if taken is Branch.DEFAULT else self.alt_next


@dataclass(frozen=True)
class ChoicePath:
    """Ordered (qid, taken) decisions of one traversal."""

    decisions: tuple[tuple[str, Branch], ...] = ()

    def __len__(self) -> int:
        return len(self.decisions)

    def sort_key(self) -> tuple:
        return tuple((qid, taken.sort_key) for qid, taken in self.decisions)

    def to_obj(self) -> list[dict]:
        return [{"qid": q, "taken": t.value} for q, t in self.decisions]

    @classmethod
    def from_obj(cls, obj: Iterable[dict]) -> "ChoicePath":
        return cls(tuple((d["qid"], Branch(d["taken"])) for d in obj))


@dataclass(frozen=True)
class ScriptGraph:
    """Validated branching script: segments plus one choice point per segment."""

    entry: str
    segments: dict[str, Segment] = field(default_factory=dict)
    choices: dict[str, ChoicePoint] = field(default_factory=dict)

    def choice_after(self, segment_id: str) -> ChoicePoint | None:
        return self.choices.get(segment_id)

    def question_ids(self) -> list[str]:
        """Distinct qids in first-seen order of the choice table."""
        seen: dict[str, None] = {}
        for cp in self.choices.values():
            seen.setdefault(cp.qid, None)
        return list(seen)


# ---------------------------------------------------------------------------
# Loading / serialization
# ---------------------------------------------------------------------------


def load_script(source: bytes | str | IO) -> ScriptGraph:
    """Parse and validate script JSON.

    Accepts raw bytes, a JSON string, or a readable file object. Raises
    ParseError for malformed JSON and ValidationError when any graph
    invariant fails.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        obj = json.loads(source)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed script JSON: {exc}") from exc

    try:
        entry = obj["entry"]
        seg_rows = obj["segments"]
        choice_rows = obj.get("choices", [])
    except (TypeError, KeyError) as exc:
        raise ParseError(f"script JSON missing required key: {exc}") from exc

    segments: dict[str, Segment] = {}
    for row in seg_rows:
        try:
            seg = Segment(
                id=str(row["id"]),
                duration_ms=int(row["duration_ms"]),
                chunk_ms=int(row["chunk_ms"]),
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise ParseError(f"bad segment row {row!r}: {exc}") from exc
        if seg.id in segments:
            raise ValidationError(f"duplicate segment id {seg.id!r}")
        segments[seg.id] = seg

    choices: dict[str, ChoicePoint] = {}
    for row in choice_rows:
        try:
            cp = ChoicePoint(
                qid=str(row["qid"]),
                after_segment=str(row["after_segment"]),
                default_next=str(row["default_next"]),
                alt_next=str(row["alt_next"]),
                window_ms=int(row.get("window_ms", DEFAULT_WINDOW_MS)),
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise ParseError(f"bad choice row {row!r}: {exc}") from exc
        if cp.after_segment in choices:
            raise ValidationError(
                f"segment {cp.after_segment!r} has more than one choice point"
            )
        choices[cp.after_segment] = cp

    graph = ScriptGraph(entry=entry, segments=segments, choices=choices)
    violations = validate_graph(graph)
    if violations:
        raise ValidationError("; ".join(violations))
    return graph


def dump_script(graph: ScriptGraph) -> str:
    """Serialize a graph back to script JSON (inverse of load_script)."""
    obj = {
        "entry": graph.entry,
        "segments": [
            {"id": s.id, "duration_ms": s.duration_ms, "chunk_ms": s.chunk_ms}
            for s in graph.segments.values()
        ],
        "choices": [
            {
                "qid": c.qid,
                "after_segment": c.after_segment,
                "default_next": c.default_next,
                "alt_next": c.alt_next,
                "window_ms": c.window_ms,
            }
            for c in graph.choices.values()
        ],
    }
    return json.dumps(obj, indent=2)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_graph(graph: ScriptGraph) -> list[str]:
    """Check every graph invariant; return one description per violation.

    An empty list means the graph is valid. Violations are data, not
    exceptions, so callers can report all of them at once.
    """
    out: list[str] = []

    for seg in graph.segments.values():
        if seg.chunk_ms < 1:
            out.append(f"segment {seg.id!r}: chunk_ms must be >= 1")
        elif seg.duration_ms < seg.chunk_ms:
            out.append(f"segment {seg.id!r}: duration_ms < chunk_ms")

    if graph.entry not in graph.segments:
        out.append(f"entry segment {graph.entry!r} does not exist")

    qid_defs: dict[str, tuple] = {}
    for cp in graph.choices.values():
        if cp.after_segment not in graph.segments:
            out.append(f"choice {cp.qid!r}: after_segment {cp.after_segment!r} missing")
        for ref in (cp.default_next, cp.alt_next):
            if ref not in graph.segments:
                out.append(f"choice {cp.qid!r}: branch target {ref!r} missing")
        if cp.default_next == cp.alt_next:
            out.append(f"choice {cp.qid!r}: default and alternate branches coincide")
        if cp.after_segment in (cp.default_next, cp.alt_next):
            out.append(f"choice {cp.qid!r}: segment {cp.after_segment!r} loops to itself")
        if cp.window_ms < 1:
            out.append(f"choice {cp.qid!r}: window_ms must be positive")
        # The same question may be asked after several segments (the graph
        # rejoins), but its branches and window must be defined consistently.
        signature = (cp.default_next, cp.alt_next, cp.window_ms)
        if qid_defs.setdefault(cp.qid, signature) != signature:
            out.append(f"duplicate qid {cp.qid!r} with conflicting definitions")

    if graph.entry in graph.segments:
        reachable = {graph.entry}
        frontier = [graph.entry]
        while frontier:
            cp = graph.choices.get(frontier.pop())
            if cp is None:
                continue
            for ref in (cp.default_next, cp.alt_next):
                if ref in graph.segments and ref not in reachable:
                    reachable.add(ref)
                    frontier.append(ref)
        for seg_id in graph.segments:
            if seg_id not in reachable:
                out.append(f"segment {seg_id!r} unreachable from entry")

    return out


# ---------------------------------------------------------------------------
# Traversal
# ---------------------------------------------------------------------------


def enumerate_paths(graph: ScriptGraph, max_questions: int) -> list[ChoicePath]:
    """All distinct choice paths from the entry, default branch first.

    Traversal stops at segments without a choice point. A path that still
    faces a fresh question at the depth bound is truncated there; if the
    question at the bound was already answered on the path (a cycle),
    DepthExceeded is raised since enumeration would not terminate.
    """
    if max_questions < 1:
        raise ValidationError("max_questions must be positive")

    paths: list[ChoicePath] = []

    def walk(seg_id: str, decisions: tuple[tuple[str, Branch], ...]) -> None:
        cp = graph.choices.get(seg_id)
        if cp is None:
            paths.append(ChoicePath(decisions))
            return
        if len(decisions) >= max_questions:
            if any(qid == cp.qid for qid, _ in decisions):
                raise DepthExceeded(
                    f"question {cp.qid!r} revisited beyond depth {max_questions}"
                )
            paths.append(ChoicePath(decisions))
            return
        for taken in (Branch.DEFAULT, Branch.ALT):
            walk(cp.next_segment(taken), decisions + ((cp.qid, taken),))

    walk(graph.entry, ())
    return paths


def segments_for_path(graph: ScriptGraph, path: ChoicePath) -> list[str]:
    """Segment ids visited by a path, starting with the entry segment.

    The result has exactly ``1 + len(path.decisions)`` entries. Raises
    InconsistentPath when a decision names a question that is not the one
    encountered at that position, or when decisions outlast the graph.
    """
    seq = [graph.entry]
    current = graph.entry
    for qid, taken in path.decisions:
        cp = graph.choices.get(current)
        if cp is None:
            raise InconsistentPath(
                f"decision for {qid!r} but segment {current!r} has no choice point"
            )
        if cp.qid != qid:
            raise InconsistentPath(
                f"expected a decision for {cp.qid!r} after {current!r}, got {qid!r}"
            )
        current = cp.next_segment(taken)
        if current not in graph.segments:
            raise InconsistentPath(f"branch target {current!r} missing from graph")
        seq.append(current)
    return seq


# ---------------------------------------------------------------------------
# Fixture factories
# ---------------------------------------------------------------------------


def binary_chain(
    n_questions: int,
    *,
    duration_ms: int = 8_000,
    chunk_ms: int = 500,
    alt_extra_chunks: int = 2,
    window_ms: int = DEFAULT_WINDOW_MS,
) -> ScriptGraph:
    """A rejoining chain of ``n_questions`` binary questions (2**n paths).

    Both branches of question ``i`` lead to question ``i + 1``, so every
    traversal answers the same n questions. Alternate segments run
    ``alt_extra_chunks`` chunks longer than their defaults, which keeps
    per-path chunk counts distinct.
    """
    segments = {"s0": Segment("s0", duration_ms, chunk_ms)}
    choices: dict[str, ChoicePoint] = {}
    prev = ["s0"]
    for i in range(1, n_questions + 1):
        d = Segment(f"s{i}", duration_ms, chunk_ms)
        a = Segment(
            f"s{i}x", duration_ms + alt_extra_chunks * (2 ** (i - 1)) * chunk_ms, chunk_ms
        )
        segments[d.id] = d
        segments[a.id] = a
        for src in prev:
            choices[src] = ChoicePoint(
                qid=f"q{i}",
                after_segment=src,
                default_next=d.id,
                alt_next=a.id,
                window_ms=window_ms,
            )
        prev = [d.id, a.id]
    return ScriptGraph(entry="s0", segments=segments, choices=choices)
