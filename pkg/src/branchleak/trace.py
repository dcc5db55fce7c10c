"""Canonical trace representation and its JSONL serialization.

A trace is the unit of analysis everywhere in this package: an ordered
sequence of timestamped, directed TLS records, each reduced to the
metadata an eavesdropper can see (time, direction, content type, length
field). The JSONL format is one header object followed by one object per
record; writing is byte-deterministic so traces round-trip exactly.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import IO, Iterator

from .errors import OrderViolation, ParseError, ValidationError
from .profiles import OperationalProfile

APPLICATION_DATA = 23
TLS_CONTENT_TYPES = (20, 21, 22, 23)
MAX_RECORD_LEN = 16_384


class Direction(enum.Enum):
    CLIENT_TO_SERVER = "c2s"
    SERVER_TO_CLIENT = "s2c"


class Origin(enum.Enum):
    CAPTURED = "captured"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class TlsRecord:
    """One TLS record: time, direction, content type, and length field."""

    t_us: int
    direction: Direction
    content_type: int
    length: int

    def __post_init__(self):
        if self.t_us < 0:
            raise ValidationError(f"negative record timestamp {self.t_us}")
        if self.content_type not in TLS_CONTENT_TYPES:
            raise ValidationError(f"content type {self.content_type} outside 20..23")
        if not 0 <= self.length <= MAX_RECORD_LEN:
            raise ValidationError(f"record length {self.length} outside 0..16384")


@dataclass(frozen=True)
class TraceMeta:
    trace_id: str
    origin: Origin = Origin.SYNTHETIC
    profile: OperationalProfile | None = None
    connections: int | None = None
    reassembly_gaps: int | None = None

    def __post_init__(self):
        if not self.trace_id:
            raise ValidationError("trace_id must be non-empty")


@dataclass
class Trace:
    meta: TraceMeta
    records: list[TlsRecord] = field(default_factory=list)

    def __post_init__(self):
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.t_us < prev.t_us:
                raise OrderViolation(
                    f"record times decrease: {prev.t_us} -> {cur.t_us}"
                )

    def __iter__(self) -> Iterator[TlsRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def client_record_lengths(trace: Trace) -> list[tuple[int, int]]:
    """(t_us, length) of client application-data records, in time order.

    This is the side-channel view: record lengths of what the viewer's
    machine sends, everything else stripped away.
    """
    return [
        (r.t_us, r.length)
        for r in trace.records
        if r.direction is Direction.CLIENT_TO_SERVER
        and r.content_type == APPLICATION_DATA
    ]


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------


def write_trace(trace: Trace) -> bytes:
    """Serialize to JSONL. Output bytes are a pure function of the trace."""
    header: dict = {
        "trace_id": trace.meta.trace_id,
        "origin": trace.meta.origin.value,
        "profile": trace.meta.profile.to_obj() if trace.meta.profile else None,
    }
    if trace.meta.connections is not None:
        header["connections"] = trace.meta.connections
    if trace.meta.reassembly_gaps is not None:
        header["reassembly_gaps"] = trace.meta.reassembly_gaps
    lines = [json.dumps(header, separators=(",", ":"))]
    for r in trace.records:
        lines.append(
            json.dumps(
                {"t_us": r.t_us, "dir": r.direction.value, "ctype": r.content_type, "len": r.length},
                separators=(",", ":"),
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_trace(source: bytes | str | IO) -> Trace:
    """Parse trace JSONL; inverse of write_trace.

    Raises ParseError on malformed lines and OrderViolation when record
    timestamps decrease.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    lines = [ln for ln in source.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty trace file")

    try:
        header = json.loads(lines[0])
        meta = TraceMeta(
            trace_id=header["trace_id"],
            origin=Origin(header["origin"]),
            profile=(
                OperationalProfile.from_obj(header["profile"])
                if header.get("profile")
                else None
            ),
            connections=header.get("connections"),
            reassembly_gaps=header.get("reassembly_gaps"),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad trace header: {exc}") from exc

    records: list[TlsRecord] = []
    last_t = -1
    for i, line in enumerate(lines[1:], start=2):
        try:
            row = json.loads(line)
            rec = TlsRecord(
                t_us=int(row["t_us"]),
                direction=Direction(row["dir"]),
                content_type=int(row["ctype"]),
                length=int(row["len"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad record on line {i}: {exc}") from exc
        if rec.t_us < last_t:
            raise OrderViolation(
                f"line {i}: t_us {rec.t_us} after {last_t}"
            )
        last_t = rec.t_us
        records.append(rec)
    return Trace(meta=meta, records=records)


def load_trace(path) -> Trace:
    with open(path, "rb") as fh:
        return read_trace(fh)


def save_trace(trace: Trace, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_trace(trace))
