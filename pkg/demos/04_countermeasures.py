#!/usr/bin/env python3
"""Defenses against the length channel, and the timing channel they leave.

Padding, splitting, or compressing the control records changes what the
length classifier sees. But none of these touch timestamps: the chunk
request stream still pauses for the whole choice window, and a simple
gap probe finds every window even in a fully padded trace.
"""

from branchleak import (
    DefensePolicy,
    SideChannelModel,
    apply_defense,
    bands_for_model,
    binary_chain,
    calibrate_bands,
    classify_events,
    default_profiles,
    enumerate_paths,
    simulate_session,
    timing_probe,
)
from branchleak.errors import InseparableBands

graph = binary_chain(3)
model = SideChannelModel()
profile = default_profiles()[0]
path = enumerate_paths(graph, 12)[3]

trace, truth = simulate_session(graph, path, profile, model, seed=31)
bands = bands_for_model(model)
print(f"protected bands: question={bands.type1} alternate={bands.type2}")
print(f"undefended classification finds {len(classify_events(trace, bands))} control events\n")

policies = [
    DefensePolicy("pad_fixed", pad_to=1024),
    DefensePolicy("pad_buckets", buckets=(512, 1024, 16384)),
    DefensePolicy("split", split_unit=400),
    DefensePolicy("compress", compress_ratio_range=(0.5, 0.9), seed=8),
]
for policy in policies:
    defended = apply_defense(trace, policy, bands)
    found = classify_events(defended, bands)
    delta = len(defended.records) - len(trace.records)
    extra = f", {delta:+d} records" if delta else ""
    print(f"{policy.kind:<12} leaves {len(found)} stale-band control events{extra}")
    try:
        calibrate_bands([(defended, truth)])
        print(f"{'':<12} recalibration still separates the kinds")
    except InseparableBands:
        print(f"{'':<12} recalibration fails: length channel closed")

# -- the residual timing channel ------------------------------------------------
padded = apply_defense(trace, policies[0], bands)
intervals = timing_probe(padded)
print(f"\ntiming probe on the fully padded trace reports {len(intervals)} gaps:")
for start, end in intervals:
    print(f"  {start/1e6:8.3f}s .. {end/1e6:8.3f}s  ({(end - start)/1e6:.1f}s quiet)")
print("\ntrue choice windows were:")
for event in truth.control_events():
    if event.kind.value == "type1":
        print(f"  {event.t_us/1e6:8.3f}s .. {(event.t_us + 10_000_000)/1e6:8.3f}s  ({event.qid})")
