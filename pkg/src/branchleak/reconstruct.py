"""Turning a classified event stream back into the viewer's choice path.

The decision rule follows the protocol directly: the i-th question
marker corresponds to the i-th choice point reached while walking the
graph from its entry; an alternate-choice record between two consecutive
question markers means the alternate branch was taken, otherwise the
default played. Event-stream irregularities never abort a reconstruction;
they are collected as anomalies and fold into a consistency score.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .classify import ClassifiedEvent, bands_for_model
from .errors import ValidationError
from .script import Branch, ChoicePath, ScriptGraph, enumerate_paths
from .simulate import EventKind, SideChannelModel, simulate_session
from .trace import Trace, client_record_lengths

ORACLE_MAX_QUESTIONS = 12

RULE_TYPE2_OBSERVED = "type2_observed"
RULE_NO_TYPE2_DEFAULT = "no_type2_default"


@dataclass
class Reconstruction:
    path: ChoicePath
    per_decision_basis: list[tuple[str, str]] = field(default_factory=list)
    anomalies: list[str] = field(default_factory=list)

    def to_obj(self, events: list[ClassifiedEvent] | None = None) -> dict:
        obj = {
            "path": self.path.to_obj(),
            "basis": [{"qid": q, "rule": r} for q, r in self.per_decision_basis],
            "anomalies": list(self.anomalies),
        }
        if events is not None:
            obj["score"] = consistency_score(self, events)
        return obj


def reconstruct_path(
    events: list[ClassifiedEvent], graph: ScriptGraph
) -> Reconstruction:
    """Walk the graph, consuming question markers and alternate records.

    Events before the first question marker, second and later alternate
    records within one question, and events left over once the walk ends
    are all recorded as anomalies.
    """
    anomalies: list[str] = []
    decisions: list[tuple[str, Branch]] = []
    basis: list[tuple[str, str]] = []

    # split the stream into per-question groups: each TYPE1 opens a group
    groups: list[tuple[ClassifiedEvent, list[ClassifiedEvent]]] = []
    for ev in events:
        if ev.kind is EventKind.TYPE1:
            groups.append((ev, []))
        elif not groups:
            anomalies.append(f"orphan_type2@{ev.t_us}")
            continue
        else:
            groups[-1][1].append(ev)

    current = graph.entry
    consumed = 0
    for _marker, group in groups:
        cp = graph.choices.get(current)
        if cp is None:
            for extra_marker, extra_group in groups[consumed:]:
                anomalies.append(f"surplus_type1@{extra_marker.t_us}")
                for ev in extra_group:
                    anomalies.append(f"surplus_type2@{ev.t_us}")
            break
        consumed += 1
        type2s = [ev for ev in group if ev.kind is EventKind.TYPE2]
        if type2s:
            taken = Branch.ALT
            basis.append((cp.qid, RULE_TYPE2_OBSERVED))
            for extra in type2s[1:]:
                anomalies.append(f"duplicate_type2@{extra.t_us} for {cp.qid}")
        else:
            taken = Branch.DEFAULT
            basis.append((cp.qid, RULE_NO_TYPE2_DEFAULT))
        decisions.append((cp.qid, taken))
        current = cp.next_segment(taken)

    return Reconstruction(
        path=ChoicePath(tuple(decisions)),
        per_decision_basis=basis,
        anomalies=anomalies,
    )


def consistency_score(
    reconstruction: Reconstruction,
    events: list[ClassifiedEvent],
    graph: ScriptGraph | None = None,
) -> float:
    """1 - anomalies/events; 1.0 when the walk consumed everything cleanly."""
    return 1.0 - len(reconstruction.anomalies) / max(1, len(events))


def oracle_reconstruct(
    trace: Trace, graph: ScriptGraph, model: SideChannelModel
) -> ChoicePath:
    """Brute-force path recovery by exhaustive simulation.

    Every enumerable path is re-simulated without jitter or noise and
    summarised as the multiset of its in-band client record lengths
    (question, alternate, and chunk-request bands). The path whose
    signature has minimum symmetric difference from the observed trace's
    multiset wins; ties go to the lexicographically smaller path with the
    default branch ordered first.
    """
    paths = enumerate_paths(graph, ORACLE_MAX_QUESTIONS)
    if len(paths) > 4096:
        raise ValidationError(
            f"oracle limited to 4096 candidate paths, graph has {len(paths)}"
        )

    control = bands_for_model(model)
    chunk_band = model.chunk_req_len.support()
    bands = (control.type1, control.type2, chunk_band)

    def signature(t: Trace) -> Counter:
        return Counter(
            length
            for _, length in client_record_lengths(t)
            if any(lo <= length <= hi for lo, hi in bands)
        )

    observed = signature(trace)
    clean = model.noiseless()
    profile = trace.meta.profile
    best: tuple[int, tuple] | None = None
    best_path = paths[0]
    for path in paths:
        candidate, _ = simulate_session(graph, path, profile, clean, seed=0)
        expected = signature(candidate)
        diff = observed - expected
        diff.update(expected - observed)
        score = (sum(diff.values()), path.sort_key())
        if best is None or score < best:
            best = score
            best_path = path
    return best_path
