"""Minimal pcap writer for constructing capture fixtures in tests."""

from __future__ import annotations

import struct

CLIENT = ("10.0.0.1", 40000)
SERVER = ("93.184.216.34", 443)


def _ip_bytes(addr: str) -> bytes:
    return bytes(int(part) for part in addr.split("."))


def tcp_packet(
    src: tuple[str, int],
    dst: tuple[str, int],
    seq: int,
    payload: bytes,
    syn: bool = False,
    linktype: int = 1,
) -> bytes:
    flags = 0x02 if syn else 0x18  # SYN, or PSH|ACK
    tcp = struct.pack(
        ">HHIIBBHHH",
        src[1],
        dst[1],
        seq & 0xFFFFFFFF,
        0,
        5 << 4,
        flags,
        65535,
        0,
        0,
    ) + payload
    total_len = 20 + len(tcp)
    ip = (
        struct.pack(
            ">BBHHHBBH",
            0x45,
            0,
            total_len,
            0,
            0,
            64,
            6,
            0,
        )
        + _ip_bytes(src[0])
        + _ip_bytes(dst[0])
        + tcp
    )
    if linktype == 101:
        return ip
    return b"\x00" * 12 + b"\x08\x00" + ip


def pcap_bytes(
    packets: list[tuple[int, bytes]],
    byte_order: str = "<",
    nanosecond: bool = False,
    linktype: int = 1,
) -> bytes:
    """Assemble (t_us, frame) pairs into a classic pcap byte string."""
    magic = 0xA1B23C4D if nanosecond else 0xA1B2C3D4
    out = struct.pack(byte_order + "IHHiIII", magic, 2, 4, 0, 0, 65535, linktype)
    for t_us, frame in packets:
        sec, rem = divmod(t_us, 1_000_000)
        frac = rem * 1000 if nanosecond else rem
        out += struct.pack(byte_order + "IIII", sec, frac, len(frame), len(frame))
        out += frame
    return out


def session_pcap(
    flows: list[tuple[str, bytes]],
    *,
    with_syn: bool = True,
    t_step_us: int = 1000,
    byte_order: str = "<",
    nanosecond: bool = False,
    linktype: int = 1,
    shuffle=None,
) -> bytes:
    """One TCP connection carrying the given ("c2s"/"s2c", payload) flows.

    Sequence numbers accumulate per direction in the order given;
    ``shuffle`` optionally reorders the emitted data packets (sequence
    numbers stay correct, exercising out-of-order reassembly).
    """
    packets: list[tuple[int, bytes]] = []
    t = 0
    seqs = {"c2s": 1000, "s2c": 5000}
    if with_syn:
        packets.append((t, tcp_packet(CLIENT, SERVER, seqs["c2s"], b"", syn=True, linktype=linktype)))
        seqs["c2s"] += 1
        t += t_step_us
        packets.append((t, tcp_packet(SERVER, CLIENT, seqs["s2c"], b"", syn=True, linktype=linktype)))
        seqs["s2c"] += 1
        t += t_step_us

    data_packets: list[tuple[int, bytes]] = []
    for direction, payload in flows:
        src, dst = (CLIENT, SERVER) if direction == "c2s" else (SERVER, CLIENT)
        data_packets.append((t, tcp_packet(src, dst, seqs[direction], payload, linktype=linktype)))
        seqs[direction] += len(payload)
        t += t_step_us

    if shuffle is not None:
        order = list(range(len(data_packets)))
        shuffle(order)
        data_packets = [data_packets[i] for i in order]
        # keep capture timestamps monotone even when payload order is shuffled
        data_packets = [
            (with_syn * 2 * t_step_us + k * t_step_us, frame)
            for k, (_, frame) in enumerate(data_packets)
        ]

    packets.extend(data_packets)
    return pcap_bytes(packets, byte_order=byte_order, nanosecond=nanosecond, linktype=linktype)


def tls_record(ctype: int, length: int, fill: int = 0xAB) -> bytes:
    return bytes((ctype, 3, 3)) + length.to_bytes(2, "big") + bytes([fill]) * length
