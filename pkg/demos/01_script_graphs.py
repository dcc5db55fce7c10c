#!/usr/bin/env python3
"""Branching scripts: build, validate, enumerate, serialize.

An interactive movie is a set of playable segments joined by binary
choice points. This demo builds a small script by hand, shows what the
validator catches, and enumerates every path a viewer could take.
"""

from branchleak import (
    ChoicePoint,
    ScriptGraph,
    Segment,
    binary_chain,
    dump_script,
    enumerate_paths,
    load_script,
    segments_for_path,
    validate_graph,
)

# -- a hand-built two-question script ---------------------------------------
# Both branches of q1 rejoin at q2, so every viewer answers both questions.
segments = {
    "intro": Segment("intro", duration_ms=8000, chunk_ms=500),
    "cereal": Segment("cereal", duration_ms=6000, chunk_ms=500),
    "no-breakfast": Segment("no-breakfast", duration_ms=7000, chunk_ms=500),
    "record-shop": Segment("record-shop", duration_ms=9000, chunk_ms=500),
    "bus-ride": Segment("bus-ride", duration_ms=9500, chunk_ms=500),
}
choices = {
    "intro": ChoicePoint("breakfast", "intro", "cereal", "no-breakfast"),
    "cereal": ChoicePoint("music", "cereal", "record-shop", "bus-ride"),
    "no-breakfast": ChoicePoint("music", "no-breakfast", "record-shop", "bus-ride"),
}
graph = ScriptGraph(entry="intro", segments=segments, choices=choices)

print("violations:", validate_graph(graph) or "none")

print("\nall viewer paths (default branch enumerated first):")
for path in enumerate_paths(graph, max_questions=12):
    plays = segments_for_path(graph, path)
    took = ", ".join(f"{qid}={taken.value}" for qid, taken in path.decisions)
    print(f"  [{took}] plays {' -> '.join(plays)}")

# -- what the validator rejects ----------------------------------------------
broken = ScriptGraph(
    entry="intro",
    segments=dict(segments, orphan=Segment("orphan", 1000, 100)),
    choices=dict(choices, bad=ChoicePoint("dup", "bus-ride", "intro", "intro")),
)
print("\na broken variant reports:")
for violation in validate_graph(broken):
    print("  -", violation)

# -- JSON round trip ----------------------------------------------------------
text = dump_script(graph)
assert load_script(text) == graph
print("\nscript JSON round-trips; first lines:")
print("\n".join(text.splitlines()[:6]), "...")

# -- generated chains ---------------------------------------------------------
chain = binary_chain(5)
print(f"\nbinary_chain(5): {len(chain.segments)} segments,")
print(f"  {len(enumerate_paths(chain, 12))} paths over {len(chain.question_ids())} questions")
