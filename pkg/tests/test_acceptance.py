"""Acceptance suite: one test per headline criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS lines
for criteria that succeed; failures surface through pytest as usual.
"""

from __future__ import annotations

import filecmp
import time

import numpy as np
import pytest

from branchleak.capture import extract_tls_records, ingest_pcap
from branchleak.classify import (
    bands_for_model,
    calibrate_bands,
    classify_events,
)
from branchleak.defenses import DefensePolicy, evaluate_defense
from branchleak.evaluate import (
    build_corpus,
    evaluate_pipeline,
    load_entry,
    read_manifest,
    split_manifest,
)
from branchleak.profiles import default_profiles
from branchleak.reconstruct import oracle_reconstruct, reconstruct_path
from branchleak.script import Branch, binary_chain, enumerate_paths
from branchleak.simulate import EventKind, SideChannelModel, simulate_session
from branchleak.trace import read_trace, write_trace

from _pcap import session_pcap, tls_record

CORPUS_SEED = 1
CORPUS_SESSIONS = 100
CALIBRATION_FRACTION = 0.1


def announce(criterion: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def acceptance_graph():
    """The two-question demo shape extended to five chained questions."""
    return binary_chain(5)


@pytest.fixture(scope="module")
def corpus(acceptance_graph, tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus-a")
    manifest = build_corpus(
        acceptance_graph, CORPUS_SESSIONS, CORPUS_SEED, SideChannelModel(), out
    )
    return manifest


@pytest.fixture(scope="module")
def corpus_bands(corpus):
    calibration, _ = split_manifest(corpus, CALIBRATION_FRACTION)
    return calibrate_bands(load_entry(corpus, e) for e in calibration)


def test_criterion_1_surrogate_accuracy(acceptance_graph, corpus):
    start = time.perf_counter()
    metrics = evaluate_pipeline(corpus, CALIBRATION_FRACTION)
    elapsed = time.perf_counter() - start
    ok = metrics.per_event_accuracy >= 0.96 and elapsed < 60
    announce(
        "1 surrogate-accuracy",
        ok,
        f"per_event_accuracy={metrics.per_event_accuracy:.4f} >= 0.96, "
        f"runtime={elapsed:.1f}s < 60s over {metrics.n_sessions} evaluated sessions",
    )


def test_criterion_2_identity_law(acceptance_graph, profile):
    start = time.perf_counter()
    clean = SideChannelModel().noiseless()
    paths = enumerate_paths(acceptance_graph, 12)
    assert len(paths) == 32
    labelled = [
        simulate_session(acceptance_graph, path, profile, clean, 7000 + i)
        for i, path in enumerate(paths)
    ]
    bands = calibrate_bands(labelled)
    recovered = 0
    for (trace, truth), path in zip(labelled, paths):
        recon = reconstruct_path(classify_events(trace, bands), acceptance_graph)
        if recon.path == path:
            recovered += 1
    elapsed = time.perf_counter() - start
    ok = recovered == 32 and elapsed < 5
    announce(
        "2 identity-law", ok, f"{recovered}/32 paths exact, runtime={elapsed:.2f}s < 5s"
    )


def test_criterion_3_oracle_equivalence(two_question_graph, profile):
    clean = SideChannelModel().noiseless()
    graphs = [
        two_question_graph,
        binary_chain(3, duration_ms=2000, chunk_ms=250),
        binary_chain(5, duration_ms=2000, chunk_ms=250),
    ]
    agreements = 0
    total = 0
    for g_idx, graph in enumerate(graphs):
        bands = bands_for_model(clean)
        for p_idx, path in enumerate(enumerate_paths(graph, 12)):
            trace, _ = simulate_session(
                graph, path, profile, clean, 100 * g_idx + p_idx
            )
            walked = reconstruct_path(classify_events(trace, bands), graph).path
            oracle = oracle_reconstruct(trace, graph, clean)
            total += 1
            if walked == oracle == path:
                agreements += 1
    ok = agreements == total
    announce(
        "3 oracle-equivalence",
        ok,
        f"{agreements}/{total} noiseless traces agree across {len(graphs)} graphs",
    )


def test_criterion_4_framing_and_segmentation():
    rng = np.random.default_rng(20260810)
    conserved = 0
    invariant = 0
    fixtures = 1000
    resegmentations = 10
    for _ in range(fixtures):
        n_records = int(rng.integers(1, 7))
        recs = [
            (int(rng.choice([20, 21, 22, 23])), int(rng.integers(0, 1200)))
            for _ in range(n_records)
        ]
        stream = b"".join(tls_record(ct, ln, fill=int(rng.integers(0, 256))) for ct, ln in recs)
        residue_len = int(rng.integers(0, 5))
        stream += bytes([23, 3, 3, 0])[:residue_len]

        parse = extract_tls_records(stream, np.zeros(len(stream), dtype=np.int64))
        if sum(5 + r.length for r in parse.records) + parse.residue == len(stream):
            conserved += 1

        reference = [(r.content_type, r.length) for r in parse.records]
        same = 0
        for _ in range(resegmentations):
            n_cuts = int(rng.integers(0, 6))
            cuts = sorted(set(rng.integers(1, max(2, len(stream)), size=n_cuts)))
            bounds = [0] + [c for c in cuts if c < len(stream)] + [len(stream)]
            pieces = [stream[a:b] for a, b in zip(bounds, bounds[1:]) if b > a]
            trace = ingest_pcap(session_pcap([("c2s", p) for p in pieces]))
            if [(r.content_type, r.length) for r in trace.records] == reference:
                same += 1
        if same == resegmentations:
            invariant += 1
    ok = conserved == fixtures and invariant == fixtures
    announce(
        "4 framing-conservation",
        ok,
        f"{conserved}/{fixtures} streams conserve framing, "
        f"{invariant}/{fixtures} invariant under {resegmentations} re-segmentations",
    )


def test_criterion_5_count_law(acceptance_graph):
    rng = np.random.default_rng(55)
    paths = enumerate_paths(acceptance_graph, 12)
    profiles = default_profiles()
    clean = SideChannelModel().noiseless()
    noisy = SideChannelModel()
    bands = bands_for_model(clean)
    sessions = 200
    exact = 0
    for i in range(sessions):
        path = paths[int(rng.integers(len(paths)))]
        profile = profiles[int(rng.integers(len(profiles)))]
        seed = int(rng.integers(1 << 48))
        questions = len(path.decisions)
        alts = sum(1 for _, taken in path.decisions if taken is Branch.ALT)

        _, truth = simulate_session(acceptance_graph, path, profile, noisy, seed)
        trace, _ = simulate_session(acceptance_graph, path, profile, clean, seed)
        events = classify_events(trace, bands)

        truth_ok = (
            truth.count(EventKind.TYPE1) == questions
            and truth.count(EventKind.TYPE2) == alts
        )
        classified_ok = (
            sum(1 for e in events if e.kind is EventKind.TYPE1) == questions
            and sum(1 for e in events if e.kind is EventKind.TYPE2) == alts
        )
        if truth_ok and classified_ok:
            exact += 1
    ok = exact == sessions
    announce("5 count-law", ok, f"{exact}/{sessions} sessions with exact control counts")


def test_criterion_6_defense_outcomes(acceptance_graph, corpus, corpus_bands):
    pad_report = evaluate_defense(
        corpus,
        DefensePolicy("pad_fixed", pad_to=1024),
        corpus_bands,
        graph=acceptance_graph,
        calibration_fraction=CALIBRATION_FRACTION,
    )
    split_report = evaluate_defense(
        corpus,
        DefensePolicy("split", split_unit=400),
        corpus_bands,
        graph=acceptance_graph,
        calibration_fraction=CALIBRATION_FRACTION,
    )
    ok = (
        pad_report.recalibration_inseparable
        and split_report.after.per_event_accuracy < 0.05
        and pad_report.window_coverage >= 0.95
    )
    announce(
        "6 defense-outcomes",
        ok,
        f"pad-fixed inseparable={pad_report.recalibration_inseparable}, "
        f"split per_event={split_report.after.per_event_accuracy:.4f} < 0.05, "
        f"padded window coverage={pad_report.window_coverage:.2%} >= 95%",
    )


def test_criterion_7_round_trips_and_determinism(
    acceptance_graph, corpus, tmp_path_factory
):
    # byte-stable JSONL round-trip on real corpus traces
    stable = True
    for entry in corpus.entries[:10]:
        raw = open(corpus.resolve(entry.trace_path), "rb").read()
        stable &= write_trace(read_trace(raw)) == raw

    # identical seeds: byte-identical corpus directories
    out_b = tmp_path_factory.mktemp("corpus-b")
    build_corpus(
        acceptance_graph, CORPUS_SESSIONS, CORPUS_SEED, SideChannelModel(), out_b
    )
    names = sorted(p.name for p in corpus.base_dir.iterdir())
    same_names = names == sorted(p.name for p in out_b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(
        corpus.base_dir, out_b, names, shallow=False
    )
    identical = same_names and not mismatch and not errors

    # identical metrics across two evaluations
    manifest_b = read_manifest(out_b / "manifest.json")
    metrics_a = evaluate_pipeline(corpus, CALIBRATION_FRACTION)
    metrics_b = evaluate_pipeline(manifest_b, CALIBRATION_FRACTION)
    same_metrics = metrics_a == metrics_b

    ok = stable and identical and same_metrics
    announce(
        "7 round-trips-determinism",
        ok,
        f"jsonl byte-stable={stable}, corpora identical={identical} "
        f"({len(match)} files), metrics identical={same_metrics}",
    )
