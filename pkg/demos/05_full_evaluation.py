#!/usr/bin/env python3
"""Corpus-scale evaluation: build, attack, score, report.

Builds a 100-session labelled corpus on a five-question script,
calibrates on the first tenth, attacks the rest, and writes the report
files (metrics JSON, confusion CSV, per-profile histograms). Also shows
what the two headline defenses do to the numbers.
"""

from pathlib import Path
from tempfile import TemporaryDirectory

from branchleak import (
    DefensePolicy,
    SideChannelModel,
    binary_chain,
    build_corpus,
    calibrate_bands,
    emit_report,
    evaluate_defense,
    evaluate_pipeline,
)
from branchleak.evaluate import load_entry, profile_histograms, split_manifest

OUT = Path(__file__).parent / "output"

graph = binary_chain(5)
with TemporaryDirectory() as tmp:
    manifest = build_corpus(graph, n_sessions=100, seed=1, model=SideChannelModel(), out_dir=tmp)
    print(f"built {len(manifest.entries)} labelled sessions")

    metrics = evaluate_pipeline(manifest, calibration_fraction=0.1)
    print(f"\nattack quality on the {metrics.n_sessions}-session evaluation split:")
    print(f"  per-event accuracy : {metrics.per_event_accuracy:.4f}")
    print(f"  per-choice accuracy: {metrics.per_choice_accuracy:.4f}")
    print(f"  exact-path rate    : {metrics.path_exact_rate:.4f}")

    written = emit_report(metrics, profile_histograms(manifest)[:4], OUT)
    print(f"\nwrote {len(written)} report files under {OUT}/")
    for path in written:
        print(f"  {path.name}")

    calibration, _ = split_manifest(manifest, 0.1)
    bands = calibrate_bands(load_entry(manifest, e) for e in calibration)
    for policy in (
        DefensePolicy("pad_fixed", pad_to=1024),
        DefensePolicy("split", split_unit=400),
    ):
        report = evaluate_defense(manifest, policy, bands, graph=graph)
        print(
            f"\n{policy.kind}: per-event {report.before.per_event_accuracy:.4f} -> "
            f"{report.after.per_event_accuracy:.4f}, "
            f"recalibration {'fails (channel closed)' if report.recalibration_inseparable else 'still separates'}, "
            f"timing probe covers {report.window_coverage:.0%} of sessions' choice windows"
        )

print("\neven the strongest length defense leaves every choice window visible in time.")
