"""Offline pcap ingest: TCP stream reassembly and TLS record extraction.

Only classic pcap is handled (both byte orders, microsecond and
nanosecond timestamp variants), with Ethernet or raw-IP link layers and
IPv4/TCP payloads. Each connection's bytes are reassembled per direction
in sequence-number order and parsed into TLS records; records from all
connections are merged into a single timeline relative to the first
packet of the capture.

Nothing is ever decrypted here: the parser reads record headers only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO

import numpy as np

from .errors import (
    BadMagic,
    InvalidContentType,
    NoTcpPayload,
    ReassemblyConflict,
    TruncatedCapture,
)
from .trace import Direction, Origin, TlsRecord, Trace, TraceMeta

MAGIC_US = 0xA1B2C3D4
MAGIC_NS = 0xA1B23C4D
LINKTYPE_ETHERNET = 1
LINKTYPE_RAW_IP = 101

TLS_HEADER_LEN = 5
_SEQ_MOD = 1 << 32


@dataclass
class TlsStreamParse:
    """Result of parsing one direction of one reassembled connection."""

    records: list[TlsRecord]
    residue: int  # trailing bytes of an incomplete record, not parsed


def extract_tls_records(
    stream: bytes,
    base_times: np.ndarray | None = None,
    direction: Direction = Direction.CLIENT_TO_SERVER,
) -> TlsStreamParse:
    """Greedy left-to-right TLS record parse of one direction's bytes.

    ``base_times`` gives the capture timestamp of every byte offset (the
    packet that carried it); a record is stamped with the time of its
    first header byte. Raises InvalidContentType when a record boundary
    holds a byte outside 20..23; an incomplete trailing record is counted
    as residue rather than parsed.
    """
    records, residue, stop = _parse_tls_stream(stream, base_times, direction)
    if stop is not None:
        raise InvalidContentType(stop, stream[stop])
    return TlsStreamParse(records=records, residue=residue)


def _parse_tls_stream(
    stream: bytes,
    base_times: np.ndarray | None,
    direction: Direction,
) -> tuple[list[TlsRecord], int, int | None]:
    """Lenient parse: returns (records, residue, invalid_boundary_offset)."""
    records: list[TlsRecord] = []
    offset = 0
    n = len(stream)
    while True:
        if n - offset < TLS_HEADER_LEN:
            return records, n - offset, None
        ctype = stream[offset]
        if ctype not in (20, 21, 22, 23):
            return records, n - offset, offset
        length = (stream[offset + 3] << 8) | stream[offset + 4]
        if length > 16_384:
            # not a plausible record boundary; treat like a bad content type
            return records, n - offset, offset
        if n - offset < TLS_HEADER_LEN + length:
            return records, n - offset, None
        t_us = 0 if base_times is None else int(base_times[offset])
        records.append(
            TlsRecord(t_us=t_us, direction=direction, content_type=ctype, length=length)
        )
        offset += TLS_HEADER_LEN + length


# ---------------------------------------------------------------------------
# pcap file walking
# ---------------------------------------------------------------------------


def _iter_packets(data: bytes):
    """Yield (t_us, frame_bytes) from a classic pcap byte string."""
    if len(data) < 24:
        raise TruncatedCapture("file shorter than the pcap global header")
    magic_be = struct.unpack(">I", data[:4])[0]
    magic_le = struct.unpack("<I", data[:4])[0]
    if magic_be == MAGIC_US:
        endian, ns = ">", False
    elif magic_le == MAGIC_US:
        endian, ns = "<", False
    elif magic_be == MAGIC_NS:
        endian, ns = ">", True
    elif magic_le == MAGIC_NS:
        endian, ns = "<", True
    else:
        raise BadMagic(f"unrecognised pcap magic {data[:4].hex()}")

    linktype = struct.unpack(endian + "I", data[20:24])[0]
    if linktype not in (LINKTYPE_ETHERNET, LINKTYPE_RAW_IP):
        raise BadMagic(f"unsupported linktype {linktype}")

    pos = 24
    while pos < len(data):
        if len(data) - pos < 16:
            raise TruncatedCapture("file ends inside a packet header")
        ts_sec, ts_frac, incl_len, orig_len = struct.unpack(
            endian + "IIII", data[pos : pos + 16]
        )
        pos += 16
        if len(data) - pos < incl_len:
            raise TruncatedCapture("file ends inside a packet body")
        if incl_len < orig_len:
            raise TruncatedCapture(
                f"packet snapped to {incl_len} of {orig_len} bytes"
            )
        t_us = ts_sec * 1_000_000 + (ts_frac // 1000 if ns else ts_frac)
        yield t_us, data[pos : pos + incl_len], linktype
        pos += incl_len


@dataclass
class _TcpSegment:
    seq: int
    payload: bytes
    t_us: int
    syn: bool


def _decode_tcp(frame: bytes, linktype: int) -> tuple | None:
    """Pull (src, dst, sport, dport, segment) out of one frame, if IPv4/TCP."""
    if linktype == LINKTYPE_ETHERNET:
        if len(frame) < 14 or struct.unpack(">H", frame[12:14])[0] != 0x0800:
            return None
        ip = frame[14:]
    else:
        ip = frame
    if len(ip) < 20 or ip[0] >> 4 != 4:
        return None
    ihl = (ip[0] & 0x0F) * 4
    total_len = struct.unpack(">H", ip[2:4])[0]
    flags_frag = struct.unpack(">H", ip[6:8])[0]
    if flags_frag & 0x2000 or flags_frag & 0x1FFF:
        return None  # fragmented IP is out of scope
    if ip[9] != 6 or len(ip) < total_len or total_len < ihl + 20:
        return None
    src = ".".join(str(b) for b in ip[12:16])
    dst = ".".join(str(b) for b in ip[16:20])
    tcp = ip[ihl:total_len]
    sport, dport = struct.unpack(">HH", tcp[:4])
    seq = struct.unpack(">I", tcp[4:8])[0]
    data_off = (tcp[12] >> 4) * 4
    syn = bool(tcp[13] & 0x02)
    payload = tcp[data_off:]
    return src, dst, sport, dport, seq, syn, payload


class _DirectionStream:
    """Reassembles one direction of one connection, first copy wins."""

    def __init__(self):
        self.segments: list[_TcpSegment] = []
        self.isn: int | None = None  # seq after SYN, when seen

    def add(self, seq: int, payload: bytes, t_us: int, syn: bool):
        if syn and self.isn is None:
            self.isn = (seq + 1) % _SEQ_MOD
        if payload:
            self.segments.append(_TcpSegment(seq, payload, t_us, syn))

    def assemble(self) -> tuple[bytes, np.ndarray, int]:
        """Returns (stream, per-byte times, gap_count); stops at any gap."""
        if not self.segments:
            return b"", np.empty(0, dtype=np.int64), 0
        base = self.isn if self.isn is not None else self.segments[0].seq
        ordered = sorted(
            self.segments, key=lambda s: ((s.seq - base) % _SEQ_MOD, s.t_us)
        )
        out = bytearray()
        times: list[np.ndarray] = []
        expected = 0
        for seg in ordered:
            rel = (seg.seq - base) % _SEQ_MOD
            payload = seg.payload
            if rel > expected:
                return bytes(out), _concat_times(times), 1
            skip = expected - rel
            if skip >= len(payload):
                if payload != bytes(out[rel : rel + len(payload)]):
                    raise ReassemblyConflict(
                        f"retransmission mismatch at relative seq {rel}"
                    )
                continue
            if skip and payload[:skip] != bytes(out[rel:expected]):
                raise ReassemblyConflict(
                    f"overlapping bytes disagree at relative seq {rel}"
                )
            fresh = payload[skip:]
            out.extend(fresh)
            times.append(np.full(len(fresh), seg.t_us, dtype=np.int64))
            expected += len(fresh)
        return bytes(out), _concat_times(times), 0


def _concat_times(chunks: list[np.ndarray]) -> np.ndarray:
    if not chunks:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(chunks)


def _parse_client_hint(hint: str | None) -> tuple[str, int | None] | None:
    if hint is None or hint in ("", "first-syn"):
        return None
    if ":" in hint:
        addr, _, port = hint.rpartition(":")
        return addr, int(port)
    return hint, None


def ingest_pcap(capture: bytes | IO, client_hint: str | None = None) -> Trace:
    """Convert a pcap byte stream into a canonical Trace.

    ``client_hint`` selects the viewer endpoint: "addr:port", a bare
    address, or None to use the first SYN sender (first packet sender if
    the capture has no SYN). TCP payload of every connection is
    reassembled per direction, parsed into TLS records, and the records
    of all connections are merged into one timeline. A missing segment
    abandons that direction at the gap and is counted in the metadata.
    """
    if hasattr(capture, "read"):
        capture = capture.read()

    # connection key: frozenset of the two endpoints
    streams: dict[tuple, dict[tuple, _DirectionStream]] = {}
    first_sender: dict[tuple, tuple] = {}
    first_syn_sender: tuple | None = None
    first_packet_sender: tuple | None = None
    t0: int | None = None
    saw_tcp_payload = False

    for t_us, frame, linktype in _iter_packets(capture):
        decoded = _decode_tcp(frame, linktype)
        if decoded is None:
            continue
        src, dst, sport, dport, seq, syn, payload = decoded
        if t0 is None:
            t0 = t_us
        sender = (src, sport)
        receiver = (dst, dport)
        if first_packet_sender is None:
            first_packet_sender = sender
        if syn and first_syn_sender is None:
            first_syn_sender = sender
        key = frozenset((sender, receiver))
        conn = streams.setdefault(key, {})
        first_sender.setdefault(key, sender)
        stream = conn.setdefault(sender, _DirectionStream())
        stream.add(seq, payload, t_us, syn)
        if payload:
            saw_tcp_payload = True

    if not saw_tcp_payload:
        raise NoTcpPayload("capture holds no TCP payload bytes")

    hint = _parse_client_hint(client_hint)
    default_client = first_syn_sender or first_packet_sender

    records: list[tuple[int, int, TlsRecord]] = []
    order = 0
    tls_connections = 0
    gap_count = 0
    for key, conn in streams.items():
        endpoints = sorted(key)
        client = None
        if hint is not None:
            for ep in endpoints:
                if ep[0] == hint[0] and (hint[1] is None or ep[1] == hint[1]):
                    client = ep
                    break
        if client is None:
            client = default_client if default_client in key else first_sender[key]
        conn_records = 0
        for sender, stream in conn.items():
            direction = (
                Direction.CLIENT_TO_SERVER
                if sender == client
                else Direction.SERVER_TO_CLIENT
            )
            data, times, gaps = stream.assemble()
            gap_count += gaps
            parsed, _residue, _stop = _parse_tls_stream(data, times, direction)
            for rec in parsed:
                records.append((rec.t_us, order, rec))
                order += 1
            conn_records += len(parsed)
        if conn_records:
            tls_connections += 1

    if tls_connections == 0:
        raise NoTcpPayload("no connection carries parseable TLS records")

    records.sort(key=lambda item: (item[0], item[1]))
    base = t0 or 0
    shifted = [
        TlsRecord(
            t_us=t - base,
            direction=r.direction,
            content_type=r.content_type,
            length=r.length,
        )
        for t, _, r in records
    ]
    meta = TraceMeta(
        trace_id="capture",
        origin=Origin.CAPTURED,
        profile=None,
        connections=tls_connections,
        reassembly_gaps=gap_count,
    )
    return Trace(meta=meta, records=shifted)
