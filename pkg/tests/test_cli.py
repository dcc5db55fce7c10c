from __future__ import annotations

import json

import pytest

from branchleak.cli import main
from branchleak.classify import calibrate_bands, write_bands
from branchleak.defenses import DefensePolicy, apply_defense, write_policy
from branchleak.evaluate import load_entry, read_manifest, split_manifest
from branchleak.script import binary_chain, dump_script
from branchleak.simulate import load_truth
from branchleak.trace import load_trace, save_trace

from _pcap import session_pcap, tls_record


@pytest.fixture()
def script_file(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(dump_script(binary_chain(2, duration_ms=2000, chunk_ms=500)))
    return path


@pytest.fixture()
def corpus_dir(tmp_path, script_file):
    out = tmp_path / "corpus"
    assert main(["corpus", "--script", str(script_file), "--n", "20", "--seed", "5", "--out", str(out)]) == 0
    return out


def test_simulate_writes_labelled_session(tmp_path, script_file):
    out = tmp_path / "session"
    code = main(
        [
            "simulate",
            "--script", str(script_file),
            "--path", "q1=D,q2=A",
            "--seed", "9",
            "--profile-index", "3",
            "--out", str(out),
        ]
    )
    assert code == 0
    trace = load_trace(out / "trace.jsonl")
    truth = load_truth(out / "truth.json")
    assert len(trace.records) > 0
    assert [t.value for _, t in truth.path.decisions] == ["default", "alt"]


def test_corpus_manifest_entries(corpus_dir):
    manifest = read_manifest(corpus_dir / "manifest.json")
    assert len(manifest.entries) == 20
    assert (corpus_dir / "script.json").exists()


def test_ingest_pcap_to_trace(tmp_path):
    pcap = tmp_path / "capture.pcap"
    pcap.write_bytes(session_pcap([("c2s", tls_record(23, 99))]))
    out = tmp_path / "trace.jsonl"
    code = main(["ingest", "--pcap", str(pcap), "--client", "10.0.0.1:40000", "--out", str(out)])
    assert code == 0
    trace = load_trace(out)
    assert [r.length for r in trace.records] == [99]


def test_calibrate_classify_reconstruct_chain(tmp_path, corpus_dir, script_file):
    bands_file = tmp_path / "bands.json"
    assert main(
        ["calibrate", "--manifest", str(corpus_dir / "manifest.json"), "--fraction", "0.2", "--out", str(bands_file)]
    ) == 0
    assert json.loads(bands_file.read_text()).keys() == {"type1", "type2"}

    manifest = read_manifest(corpus_dir / "manifest.json")
    entry = manifest.entries[-1]
    events_file = tmp_path / "events.json"
    assert main(
        ["classify", "--trace", str(corpus_dir / entry.trace_path), "--bands", str(bands_file), "--out", str(events_file)]
    ) == 0

    recon_file = tmp_path / "recon.json"
    assert main(
        ["reconstruct", "--events", str(events_file), "--script", str(script_file), "--out", str(recon_file)]
    ) == 0
    obj = json.loads(recon_file.read_text())
    assert {"path", "basis", "anomalies", "score"} <= obj.keys()


def test_eval_writes_report(tmp_path, corpus_dir):
    report = tmp_path / "report"
    code = main(
        ["eval", "--manifest", str(corpus_dir / "manifest.json"), "--fraction", "0.2", "--report", str(report)]
    )
    assert code == 0
    metrics = json.loads((report / "metrics.json").read_text())
    assert 0.0 <= metrics["per_event_accuracy"] <= 1.0
    assert (report / "confusion.csv").exists()
    assert list(report.glob("hist_*.csv"))


def test_defend_reports_outcome(tmp_path, corpus_dir):
    manifest = read_manifest(corpus_dir / "manifest.json")
    calibration, _ = split_manifest(manifest, 0.2)
    bands = calibrate_bands(load_entry(manifest, e) for e in calibration)
    bands_file = tmp_path / "bands.json"
    bands_file.write_bytes(write_bands(bands))
    policy_file = tmp_path / "policy.json"
    policy_file.write_bytes(write_policy(DefensePolicy("pad_fixed", pad_to=1024)))
    report = tmp_path / "dreport"
    code = main(
        [
            "defend",
            "--manifest", str(corpus_dir / "manifest.json"),
            "--policy", str(policy_file),
            "--bands", str(bands_file),
            "--report", str(report),
        ]
    )
    assert code == 0
    obj = json.loads((report / "defense_report.json").read_text())
    assert obj["recalibration_inseparable"] is True
    assert obj["after"]["per_event_accuracy"] == 0.0


def test_hist_csv(tmp_path, corpus_dir):
    manifest = read_manifest(corpus_dir / "manifest.json")
    out = tmp_path / "hist.csv"
    code = main(
        ["hist", "--trace", str(corpus_dir / manifest.entries[0].trace_path), "--bin", "10", "--out", str(out)]
    )
    assert code == 0
    assert out.read_text().startswith("bin,count\n")


class TestExitCodes:
    def test_validation_error_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"entry": "s0", "segments": [], "choices": []}')
        out = tmp_path / "o"
        assert main(["simulate", "--script", str(bad), "--path", "", "--out", str(out)]) == 2

    def test_bad_path_spec_exits_2(self, tmp_path, script_file):
        out = tmp_path / "o"
        assert main(
            ["simulate", "--script", str(script_file), "--path", "q1=X", "--out", str(out)]
        ) == 2

    def test_inseparable_exits_3(self, tmp_path, corpus_dir):
        manifest = read_manifest(corpus_dir / "manifest.json")
        calibration, _ = split_manifest(manifest, 0.2)
        bands = calibrate_bands(load_entry(manifest, e) for e in calibration)
        policy = DefensePolicy("pad_fixed", pad_to=1024)
        for entry in manifest.entries:
            trace = load_trace(corpus_dir / entry.trace_path)
            save_trace(apply_defense(trace, policy, bands), corpus_dir / entry.trace_path)
        out = tmp_path / "bands.json"
        assert main(
            ["calibrate", "--manifest", str(corpus_dir / "manifest.json"), "--fraction", "0.9", "--out", str(out)]
        ) != 0  # split or separation failure, never success
        assert main(
            ["calibrate", "--manifest", str(corpus_dir / "manifest.json"), "--fraction", "0.5", "--out", str(out)]
        ) == 3

    def test_missing_file_exits_4(self, tmp_path):
        assert main(
            ["hist", "--trace", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "h.csv")]
        ) == 4
