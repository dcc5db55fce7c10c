"""branchleak: choice-path recovery from encrypted interactive-video traffic.

Interactive movies stream check-pointed: the client announces each
on-screen question with one control message and sends a second one only
when the viewer picks the non-default branch. Both control messages ride
in TLS application-data records whose length fields stay visible to any
passive observer, so the sequence of record lengths alone reveals the
viewer's choice path. This package simulates such sessions, extracts
record lengths from captures, classifies the control records, rebuilds
choice paths, scores the attack against ground truth, and measures how
well padding/splitting/compression defenses close the channel.
"""

from .classify import (
    ClassifiedEvent,
    LengthBands,
    bands_for_model,
    calibrate_bands,
    classify_events,
    length_histogram,
)
from .capture import extract_tls_records, ingest_pcap
from .defenses import DefensePolicy, apply_defense, evaluate_defense, timing_probe
from .errors import (
    AnalysisError,
    BranchleakError,
    ParseError,
    ValidationError,
)
from .evaluate import (
    DatasetManifest,
    Metrics,
    build_corpus,
    emit_report,
    evaluate_pipeline,
    read_manifest,
)
from .profiles import OperationalProfile, default_profiles
from .reconstruct import (
    Reconstruction,
    consistency_score,
    oracle_reconstruct,
    reconstruct_path,
)
from .script import (
    Branch,
    ChoicePath,
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
from .simulate import (
    EventKind,
    GroundTruthLog,
    LengthDist,
    SideChannelModel,
    model_for_profile,
    simulate_session,
)
from .trace import (
    Direction,
    Origin,
    TlsRecord,
    Trace,
    TraceMeta,
    client_record_lengths,
    read_trace,
    write_trace,
)

__version__ = "0.1.0"
