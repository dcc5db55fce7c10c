#!/usr/bin/env python3
"""Simulating a check-pointed streaming session and eyeballing its shape.

The simulator turns (graph, choice path, profile, model, seed) into the
TLS records a viewer's machine would emit: steady chunk requests, one
question-marker record per choice, prefetch of the default branch during
each choice window, a second control record only for non-default picks,
and background noise. The client record-length histogram makes the two
control bands visible to the naked eye.
"""

from branchleak import (
    EventKind,
    SideChannelModel,
    binary_chain,
    client_record_lengths,
    default_profiles,
    enumerate_paths,
    length_histogram,
    simulate_session,
)

graph = binary_chain(3)
paths = enumerate_paths(graph, 12)
path = paths[5]  # default, alt, default
profile = default_profiles()[7]
model = SideChannelModel()

trace, truth = simulate_session(graph, path, profile, model, seed=2024)

print("simulated path: ", ", ".join(f"{q}={t.value}" for q, t in path.decisions))
print(f"profile:         {profile.operational_key()}")
print(f"trace records:   {len(trace.records)}")
print(f"client records:  {len(client_record_lengths(trace))}")
for kind in EventKind:
    print(f"  {kind.value:<10} {truth.count(kind)}")

print("\nfirst moments of the session:")
for event in truth.events[:6]:
    tag = f" ({event.qid})" if event.qid else ""
    print(f"  t={event.t_us/1e6:8.3f}s  {event.kind.value}{tag}")

print("\ncontrol events:")
for event in truth.control_events():
    print(f"  t={event.t_us/1e6:8.3f}s  {event.kind.value} at question {event.qid}")

# -- record-length histogram ---------------------------------------------------
hist = length_histogram(trace, bin_width=50)
peak = max(hist.values())
print("\nclient record-length histogram (50-byte bins):")
for bin_lo, count in hist.items():
    bar = "#" * max(1, round(40 * count / peak))
    print(f"  {bin_lo:>6}..{bin_lo + 49:<6} {count:>4} {bar}")
print("\nthe tall band is chunk requests; the two narrow bands around the")
print("question-marker and alternate-choice sizes are the side channel.")
