"""Corpus construction, end-to-end evaluation, and report emission.

A corpus is a directory of labelled sessions indexed by a manifest:
trace JSONL plus ground-truth JSON per session, the script JSON they
were generated from, and the operational profile of each session. The
pipeline calibrates bands on a leading slice of the corpus, attacks the
rest, and scores the result against ground truth.

Event accuracy is recall of the true control events under order-based
matching within each kind: of the control records actually sent, the
fraction the classifier recovered. Spurious in-band records (noise) do
not lower it directly, but they derail reconstruction and therefore show
up in the per-choice and exact-path numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import (
    ClassifiedEvent,
    calibrate_bands,
    classify_events,
    histogram_csv,
    length_histogram,
)
from .errors import EmptySplit, ParseError, ValidationError
from .profiles import OperationalProfile, default_profiles
from .reconstruct import reconstruct_path
from .script import ScriptGraph, dump_script, enumerate_paths, load_script
from .simulate import (
    EventKind,
    GroundTruthLog,
    SideChannelModel,
    load_truth,
    save_truth,
    simulate_session,
)
from .trace import Trace, load_trace, save_trace

DEFAULT_MAX_QUESTIONS = 12
DEFAULT_CALIBRATION_FRACTION = 0.1


@dataclass(frozen=True)
class ManifestEntry:
    trace_path: str
    truth_path: str
    profile: OperationalProfile


@dataclass
class DatasetManifest:
    """Index of a labelled corpus; paths are relative to ``base_dir``."""

    name: str
    entries: list[ManifestEntry] = field(default_factory=list)
    script_path: str | None = None
    base_dir: Path = field(default_factory=Path)

    def resolve(self, relative: str) -> Path:
        return self.base_dir / relative

    def graph(self) -> ScriptGraph:
        if self.script_path is None:
            raise ValidationError(f"manifest {self.name!r} records no script")
        with open(self.resolve(self.script_path), "rb") as fh:
            return load_script(fh)


def load_entry(
    manifest: DatasetManifest, entry: ManifestEntry
) -> tuple[Trace, GroundTruthLog]:
    return (
        load_trace(manifest.resolve(entry.trace_path)),
        load_truth(manifest.resolve(entry.truth_path)),
    )


def write_manifest(manifest: DatasetManifest, path) -> None:
    obj = {
        "name": manifest.name,
        "script": manifest.script_path,
        "entries": [
            {
                "trace": e.trace_path,
                "truth": e.truth_path,
                "profile": e.profile.to_obj(),
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        entries = [
            ManifestEntry(
                trace_path=e["trace"],
                truth_path=e["truth"],
                profile=OperationalProfile.from_obj(e["profile"]),
            )
            for e in obj["entries"]
        ]
        return DatasetManifest(
            name=obj["name"],
            entries=entries,
            script_path=obj.get("script"),
            base_dir=path.parent,
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"bad manifest {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Corpus construction
# ---------------------------------------------------------------------------


def build_corpus(
    graph: ScriptGraph,
    n_sessions: int,
    seed: int,
    model: SideChannelModel,
    out_dir,
    max_questions: int = DEFAULT_MAX_QUESTIONS,
    name: str = "synthetic-corpus",
) -> DatasetManifest:
    """Simulate ``n_sessions`` labelled sessions and write them to disk.

    Paths are drawn uniformly from the graph's enumerable paths and
    profiles cycle through the 72 default operational profiles; every
    session uses the model exactly as given, so jitter-free corpora stay
    jitter-free. Byte-identical output for identical arguments.
    """
    if n_sessions < 1:
        raise ValidationError("n_sessions must be positive")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = enumerate_paths(graph, max_questions)
    profiles = default_profiles()
    rng = np.random.default_rng(seed % (1 << 64))

    (out_dir / "script.json").write_text(dump_script(graph), encoding="utf-8")
    entries: list[ManifestEntry] = []
    for i in range(n_sessions):
        path = paths[int(rng.integers(len(paths)))]
        profile = profiles[i % len(profiles)]
        session_seed = int(rng.integers(1 << 63))
        trace, truth = simulate_session(
            graph,
            path,
            profile,
            model,
            session_seed,
            trace_id=f"session-{i:04d}",
        )
        trace_rel = f"session-{i:04d}.jsonl"
        truth_rel = f"session-{i:04d}.truth.json"
        save_trace(trace, out_dir / trace_rel)
        save_truth(truth, out_dir / truth_rel)
        entries.append(ManifestEntry(trace_rel, truth_rel, profile))

    manifest = DatasetManifest(
        name=name, entries=entries, script_path="script.json", base_dir=out_dir
    )
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    """Attack quality on an evaluation split.

    ``per_event_accuracy`` is control-event recall (matched within kind,
    in order); ``per_choice_accuracy`` scores reconstructed decisions
    position-wise against the true path; ``path_exact_rate`` is the
    fraction of sessions whose full path came back exactly. The confusion
    matrix rows are truth, columns are classification, over matched
    events only.
    """

    per_event_accuracy: float
    per_choice_accuracy: float
    path_exact_rate: float
    confusion: tuple[tuple[int, int], tuple[int, int]]
    n_sessions: int
    n_truth_events: int
    n_classified_events: int

    def to_obj(self) -> dict:
        return {
            "per_event_accuracy": self.per_event_accuracy,
            "per_choice_accuracy": self.per_choice_accuracy,
            "path_exact_rate": self.path_exact_rate,
            "confusion": [list(row) for row in self.confusion],
            "n_sessions": self.n_sessions,
            "n_truth_events": self.n_truth_events,
            "n_classified_events": self.n_classified_events,
        }


def _metrics_for_sessions(
    items: list[tuple[list[ClassifiedEvent], GroundTruthLog, ScriptGraph]],
) -> Metrics:
    matched = {EventKind.TYPE1: 0, EventKind.TYPE2: 0}
    truth_total = 0
    classified_total = 0
    choice_hits = 0
    choice_slots = 0
    exact = 0

    for events, truth, graph in items:
        truth_counts = {
            kind: sum(1 for e in truth.control_events() if e.kind is kind)
            for kind in matched
        }
        cls_counts = {
            kind: sum(1 for e in events if e.kind is kind) for kind in matched
        }
        for kind in matched:
            matched[kind] += min(truth_counts[kind], cls_counts[kind])
        truth_total += sum(truth_counts.values())
        classified_total += sum(cls_counts.values())

        recon = reconstruct_path(events, graph)
        got = recon.path.decisions
        want = truth.path.decisions
        choice_slots += max(len(got), len(want))
        choice_hits += sum(1 for g, w in zip(got, want) if g == w)
        if got == want:
            exact += 1

    n = len(items)
    return Metrics(
        per_event_accuracy=(
            sum(matched.values()) / truth_total if truth_total else 1.0
        ),
        per_choice_accuracy=(choice_hits / choice_slots if choice_slots else 1.0),
        path_exact_rate=(exact / n if n else 1.0),
        confusion=(
            (matched[EventKind.TYPE1], 0),
            (0, matched[EventKind.TYPE2]),
        ),
        n_sessions=n,
        n_truth_events=truth_total,
        n_classified_events=classified_total,
    )


def split_manifest(
    manifest: DatasetManifest, calibration_fraction: float
) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Leading calibration slice and trailing evaluation slice."""
    if not 0 < calibration_fraction < 1:
        raise ValidationError("calibration_fraction must lie in (0, 1)")
    n = len(manifest.entries)
    n_cal = math.ceil(calibration_fraction * n)
    calibration = manifest.entries[:n_cal]
    evaluation = manifest.entries[n_cal:]
    if not calibration or not evaluation:
        raise EmptySplit(
            f"{n} sessions cannot be split at fraction {calibration_fraction}"
        )
    return calibration, evaluation


def evaluate_pipeline(
    manifest: DatasetManifest,
    calibration_fraction: float = DEFAULT_CALIBRATION_FRACTION,
) -> Metrics:
    """Calibrate on the leading slice, attack the rest, score the attack."""
    calibration, evaluation = split_manifest(manifest, calibration_fraction)
    graph = manifest.graph()
    bands = calibrate_bands(load_entry(manifest, e) for e in calibration)
    items = []
    for entry in evaluation:
        trace, truth = load_entry(manifest, entry)
        items.append((classify_events(trace, bands), truth, graph))
    return _metrics_for_sessions(items)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def emit_report(
    metrics: Metrics,
    histograms: list[tuple[OperationalProfile, dict[int, int]]],
    destination,
) -> list[Path]:
    """Write metrics JSON, confusion CSV, and per-profile histogram CSVs."""
    destination = Path(destination)
    destination.mkdir(parents=True, exist_ok=True)
    written = []

    metrics_path = destination / "metrics.json"
    metrics_path.write_text(
        json.dumps(metrics.to_obj(), indent=2) + "\n", encoding="utf-8"
    )
    written.append(metrics_path)

    confusion_path = destination / "confusion.csv"
    rows = ["truth\\classified,type1,type2"]
    rows.append(f"type1,{metrics.confusion[0][0]},{metrics.confusion[0][1]}")
    rows.append(f"type2,{metrics.confusion[1][0]},{metrics.confusion[1][1]}")
    confusion_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    written.append(confusion_path)

    for profile, hist in histograms:
        slug = profile.operational_key().replace("|", "_").lower()
        hist_path = destination / f"hist_{slug}.csv"
        hist_path.write_text(histogram_csv(hist), encoding="utf-8")
        written.append(hist_path)
    return written


def profile_histograms(
    manifest: DatasetManifest, bin_width: int = 10
) -> list[tuple[OperationalProfile, dict[int, int]]]:
    """Merged client-length histogram per distinct operational profile."""
    merged: dict[str, tuple[OperationalProfile, dict[int, int]]] = {}
    for entry in manifest.entries:
        trace = load_trace(manifest.resolve(entry.trace_path))
        hist = length_histogram(trace, bin_width)
        key = entry.profile.operational_key()
        if key not in merged:
            merged[key] = (entry.profile, dict(hist))
        else:
            acc = merged[key][1]
            for bin_lo, count in hist.items():
                acc[bin_lo] = acc.get(bin_lo, 0) + count
    return [merged[key] for key in sorted(merged)]
