"""Command-line front end over the library.

Exit codes: 0 success, 2 validation/parse errors, 3 analysis errors
(e.g. inseparable bands), 4 I/O problems.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluate as ev
from .capture import ingest_pcap
from .classify import (
    calibrate_bands,
    classify_events,
    histogram_csv,
    length_histogram,
    read_bands,
    read_events,
    write_bands,
    write_events,
)
from .defenses import evaluate_defense, read_policy
from .errors import AnalysisError, BranchleakError, ParseError, ValidationError
from .profiles import default_profiles
from .reconstruct import consistency_score, reconstruct_path
from .script import Branch, ChoicePath, load_script
from .simulate import SideChannelModel, model_for_profile, save_truth, simulate_session
from .trace import load_trace, save_trace, write_trace

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ANALYSIS = 3
EXIT_IO = 4


def _parse_path_spec(spec: str) -> ChoicePath:
    """Parse "Q1=D,Q2=A" into a ChoicePath."""
    decisions = []
    if spec.strip():
        for token in spec.split(","):
            qid, _, letter = token.strip().partition("=")
            letter = letter.strip().upper()
            if not qid or letter not in ("D", "A"):
                raise ValidationError(f"bad path token {token!r}, expected QID=D|A")
            decisions.append(
                (qid.strip(), Branch.DEFAULT if letter == "D" else Branch.ALT)
            )
    return ChoicePath(tuple(decisions))


def _load_script_file(path: str):
    with open(path, "rb") as fh:
        return load_script(fh)


def cmd_simulate(args) -> int:
    graph = _load_script_file(args.script)
    path = _parse_path_spec(args.path)
    profiles = default_profiles()
    profile = profiles[args.profile_index % len(profiles)]
    model = model_for_profile(profile, SideChannelModel())
    trace, truth = simulate_session(graph, path, profile, model, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_trace(trace, out / "trace.jsonl")
    save_truth(truth, out / "truth.json")
    print(f"wrote {out / 'trace.jsonl'} ({len(trace)} records)")
    return EXIT_OK


def cmd_corpus(args) -> int:
    graph = _load_script_file(args.script)
    manifest = ev.build_corpus(graph, args.n, args.seed, SideChannelModel(), args.out)
    print(f"wrote {Path(args.out) / 'manifest.json'} ({len(manifest.entries)} sessions)")
    return EXIT_OK


def cmd_ingest(args) -> int:
    with open(args.pcap, "rb") as fh:
        trace = ingest_pcap(fh, args.client)
    save_trace(trace, args.out)
    print(f"wrote {args.out} ({len(trace)} records)")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    manifest = ev.read_manifest(args.manifest)
    calibration, _ = ev.split_manifest(manifest, args.fraction)
    bands = calibrate_bands(ev.load_entry(manifest, e) for e in calibration)
    Path(args.out).write_bytes(write_bands(bands))
    print(f"wrote {args.out} (type1={list(bands.type1)} type2={list(bands.type2)})")
    return EXIT_OK


def cmd_classify(args) -> int:
    trace = load_trace(args.trace)
    with open(args.bands, "rb") as fh:
        bands = read_bands(fh)
    events = classify_events(trace, bands)
    Path(args.out).write_bytes(write_events(events))
    print(f"wrote {args.out} ({len(events)} control events)")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    with open(args.events, "rb") as fh:
        events = read_events(fh)
    graph = _load_script_file(args.script)
    recon = reconstruct_path(events, graph)
    obj = recon.to_obj(events)
    Path(args.out).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    took = ",".join(f"{q}={t.value[0].upper()}" for q, t in recon.path.decisions)
    print(f"wrote {args.out} (path: {took or '<empty>'})")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = ev.read_manifest(args.manifest)
    metrics = ev.evaluate_pipeline(manifest, args.fraction)
    histograms = ev.profile_histograms(manifest)
    written = ev.emit_report(metrics, histograms, args.report)
    print(
        f"per_event={metrics.per_event_accuracy:.4f} "
        f"per_choice={metrics.per_choice_accuracy:.4f} "
        f"path_exact={metrics.path_exact_rate:.4f}"
    )
    print(f"wrote {len(written)} report files to {args.report}")
    return EXIT_OK


def cmd_defend(args) -> int:
    manifest = ev.read_manifest(args.manifest)
    with open(args.policy, "rb") as fh:
        policy = read_policy(fh)
    with open(args.bands, "rb") as fh:
        bands = read_bands(fh)
    report = evaluate_defense(manifest, policy, bands, graph=manifest.graph())
    out = Path(args.report)
    out.mkdir(parents=True, exist_ok=True)
    (out / "defense_report.json").write_text(
        json.dumps(report.to_obj(), indent=2) + "\n", encoding="utf-8"
    )
    print(
        f"before per_event={report.before.per_event_accuracy:.4f} "
        f"after per_event={report.after.per_event_accuracy:.4f} "
        f"inseparable={report.recalibration_inseparable} "
        f"window_coverage={report.window_coverage:.2f}"
    )
    return EXIT_OK


def cmd_hist(args) -> int:
    trace = load_trace(args.trace)
    hist = length_histogram(trace, args.bin)
    Path(args.out).write_text(histogram_csv(hist), encoding="utf-8")
    print(f"wrote {args.out} ({len(hist)} bins)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchleak",
        description="Recover interactive-video viewer choices from TLS record lengths",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one labelled session")
    p.add_argument("--script", required=True)
    p.add_argument("--path", required=True, help='decisions, e.g. "Q1=D,Q2=A"')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile-index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("corpus", help="build a synthetic labelled corpus")
    p.add_argument("--script", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("ingest", help="convert a pcap capture to trace JSONL")
    p.add_argument("--pcap", required=True)
    p.add_argument("--client", default=None, help="viewer endpoint ADDR[:PORT]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("calibrate", help="fit length bands from a corpus slice")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("classify", help="extract control events from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--bands", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("reconstruct", help="rebuild the choice path from events")
    p.add_argument("--events", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="run the full pipeline over a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("defend", help="apply a defense policy and re-evaluate")
    p.add_argument("--manifest", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--bands", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_defend)

    p = sub.add_parser("hist", help="client record-length histogram CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--bin", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hist)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BranchleakError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
