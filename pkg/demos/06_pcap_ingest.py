#!/usr/bin/env python3
"""From raw capture bytes to the canonical trace.

Builds a tiny single-connection pcap in memory (two client control
records around a burst of chunk requests, plus server data), then runs
it through the ingest path: TCP reassembly, TLS record framing, and
direction assignment relative to the viewer endpoint. The same record
stream split across different TCP segmentations ingests identically.
"""

import struct

from branchleak import ingest_pcap, client_record_lengths

CLIENT = ("192.168.1.20", 51234)
SERVER = ("198.51.100.7", 443)


def ipv4_tcp(src, dst, seq, payload, syn=False):
    flags = 0x02 if syn else 0x18
    tcp = struct.pack(">HHIIBBHHH", src[1], dst[1], seq, 0, 5 << 4, flags, 65535, 0, 0)
    tcp += payload
    ip = struct.pack(">BBHHHBBH", 0x45, 0, 20 + len(tcp), 0, 0, 64, 6, 0)
    ip += bytes(int(b) for b in src[0].split("."))
    ip += bytes(int(b) for b in dst[0].split("."))
    return b"\x00" * 12 + b"\x08\x00" + ip + tcp


def pcap(packets):
    out = struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1)
    for t_us, frame in packets:
        sec, usec = divmod(t_us, 1_000_000)
        out += struct.pack("<IIII", sec, usec, len(frame), len(frame))
        out += frame
    return out


def tls(ctype, length):
    return bytes((ctype, 3, 3)) + length.to_bytes(2, "big") + b"\x00" * length


# client stream: chunk requests, a question marker, one alternate pick
client_bytes = tls(23, 451) + tls(23, 449) + tls(23, 710) + tls(23, 452) + tls(23, 910)
server_bytes = tls(23, 16384) + tls(23, 16384)

# cut the client byte stream at arbitrary points; seq numbers keep it whole
cuts = [0, 7, 456, 461, 1300, len(client_bytes)]
pieces = [client_bytes[a:b] for a, b in zip(cuts, cuts[1:])]

packets = [(0, ipv4_tcp(CLIENT, SERVER, 100, b"", syn=True))]
t, seq = 1000, 101
for piece in pieces:
    packets.append((t, ipv4_tcp(CLIENT, SERVER, seq, piece)))
    seq += len(piece)
    t += 40_000
packets.append((t, ipv4_tcp(SERVER, CLIENT, 9000, server_bytes)))

trace = ingest_pcap(pcap(packets))
print(f"ingested {len(trace.records)} TLS records from {len(packets)} packets")
print(f"connections: {trace.meta.connections}, reassembly gaps: {trace.meta.reassembly_gaps}")
print("\nclient application-data lengths (the side channel):")
for t_us, length in client_record_lengths(trace):
    marker = {710: "  <- question marker", 910: "  <- non-default choice"}.get(length, "")
    print(f"  t={t_us/1e6:6.3f}s len={length}{marker}")
