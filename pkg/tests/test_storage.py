import json
import struct
import wave

import numpy as np
import pytest

from tapstroop.protocol import InsufficientData, RtPolicy, SessionConfig, summarize
from tapstroop.responder import ResponderModel, run_simulated_session
from tapstroop.signal import (
    DEFAULT_MATERIALS,
    Material,
    MaterialParams,
    SynthesisConfig,
    WaveformBuffer,
    render_transient,
)
from tapstroop.storage import (
    CorruptLog,
    EventRecord,
    ParseError,
    Recorder,
    analyze,
    load_material_params,
    read_log,
    recorded_summary,
    save_material_params,
    write_log,
    write_wav,
)

# header of the 1152-sample reference transient, derived once from the
# stdlib wave module writing identical frames
GOLDEN_WAV_HEADER = bytes.fromhex(
    "524946462409000057415645666d7420100000000100010010270000204e0000020010006461746100090000"
)


def simulated_records(seed=21, model_seed=22):
    rec = Recorder()
    run_simulated_session(SessionConfig(seed=seed), ResponderModel(seed=model_seed), on_event=rec.record)
    return rec.records


class TestLogRoundTrip:
    def test_round_trip_identity(self, tmp_path):
        records = simulated_records()
        path = tmp_path / "session.jsonl"
        write_log(records, path)
        assert read_log(path) == records

    def test_empty_file_readable(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert read_log(path) == []

    def test_seq_gap_detected(self, tmp_path):
        path = tmp_path / "gap.jsonl"
        lines = [
            {"seq": 1, "t_us": 0, "kind": "TrialStart", "payload": {}},
            {"seq": 2, "t_us": 1, "kind": "Contact", "payload": {}},
            {"seq": 4, "t_us": 2, "kind": "Response", "payload": {}},
        ]
        path.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
        with pytest.raises(CorruptLog, match="record 3"):
            read_log(path)

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = json.dumps({"seq": 1, "t_us": 0, "kind": "TrialStart", "payload": {}})
        path.write_text(good + "\n{not json\n")
        with pytest.raises(ParseError, match="line 2"):
            read_log(path)

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "kind.jsonl"
        path.write_text(json.dumps({"seq": 1, "t_us": 0, "kind": "Nope", "payload": {}}) + "\n")
        with pytest.raises(ParseError):
            read_log(path)

    def test_backwards_time_rejected(self, tmp_path):
        path = tmp_path / "time.jsonl"
        lines = [
            {"seq": 1, "t_us": 100, "kind": "TrialStart", "payload": {}},
            {"seq": 2, "t_us": 50, "kind": "Contact", "payload": {}},
        ]
        path.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
        with pytest.raises(CorruptLog):
            read_log(path)

    def test_recorder_seq_and_kind_guard(self):
        rec = Recorder()
        rec.record("TrialStart", 10, {})
        with pytest.raises(ValueError):
            rec.record("Bogus", 20, {})
        with pytest.raises(ValueError):
            rec.record("Contact", 5, {})


class TestAnalyze:
    def test_matches_live_summary(self, tmp_path):
        rec = Recorder()
        cfg = SessionConfig(seed=31)
        trials = run_simulated_session(cfg, ResponderModel(seed=32), on_event=rec.record)
        live = summarize(trials, cfg.rt_policy)
        path = tmp_path / "s.jsonl"
        write_log(rec.records, path)
        assert analyze(path) == live
        assert recorded_summary(read_log(path)) == live

    def test_two_copies_same_summary(self, tmp_path):
        records = simulated_records()
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_log(records, a)
        write_log(records, b)
        assert analyze(a) == analyze(b)

    def test_hand_built_log_delta_60(self, tmp_path):
        rec = Recorder()
        t = 0
        rts = {"congruent": [500.0, 520.0, 540.0], "incongruent": [560.0, 580.0, 600.0]}
        idx = 0
        for block, block_rts in rts.items():
            for rt in block_rts:
                visual = "rubber"
                tactile = visual if block == "congruent" else "aluminum"
                rec.record("TrialStart", t, {"index": idx, "block": block, "visual": visual, "tactile": tactile})
                rec.record(
                    "TrialResult",
                    t + 1,
                    {
                        "index": idx,
                        "block": block,
                        "visual": visual,
                        "tactile": tactile,
                        "response": visual,
                        "rt_ms": rt,
                        "correct": True,
                        "onset_us": t,
                    },
                )
                t += 10
                idx += 1
            rec.record("BlockEnd", t, {"block": block})
        rec.record("SessionEnd", t, {"rt_policy": "correct_only", "summary": {}})
        path = tmp_path / "hand.jsonl"
        write_log(rec.records, path)
        s = analyze(path)
        assert s.stroop_delta_ms == pytest.approx(60.0)
        assert not s.partial

    def test_truncated_log_flagged_partial(self, tmp_path):
        records = simulated_records()
        assert records[-1].kind == "SessionEnd"
        path = tmp_path / "trunc.jsonl"
        write_log(records[:-1], path)
        s = analyze(path)
        assert s.partial is True
        # still the same arithmetic on what is there
        full = tmp_path / "full.jsonl"
        write_log(records, full)
        complete = analyze(full)
        assert s.stroop_delta_ms == complete.stroop_delta_ms

    def test_insufficient_data_passthrough(self, tmp_path):
        rec = Recorder()
        rec.record("TrialStart", 0, {"index": 0, "block": "congruent", "visual": "rubber", "tactile": "rubber"})
        path = tmp_path / "short.jsonl"
        write_log(rec.records, path)
        with pytest.raises(InsufficientData):
            analyze(path)


class TestWav:
    def reference_transient(self):
        params = MaterialParams(Material.RUBBER, 1.0, 40.0, 150.0)
        return render_transient(params, 1.0, SynthesisConfig())

    def test_derived_byte_counts(self, tmp_path):
        buf = self.reference_transient()
        assert len(buf) == 1152
        path = tmp_path / "ref.wav"
        write_wav(buf, path)
        blob = path.read_bytes()
        assert len(blob) == 44 + 2 * 1152
        data_size = struct.unpack_from("<I", blob, 40)[0]
        assert data_size == 2304
        rate = struct.unpack_from("<I", blob, 24)[0]
        assert rate == 10_000

    def test_golden_header(self, tmp_path):
        path = tmp_path / "g.wav"
        write_wav(self.reference_transient(), path)
        assert path.read_bytes()[:44] == GOLDEN_WAV_HEADER

    def test_matches_independent_writer(self, tmp_path):
        buf = self.reference_transient()
        ours = tmp_path / "ours.wav"
        write_wav(buf, ours)
        with wave.open(str(ours)) as wf:
            assert wf.getnchannels() == 1
            assert wf.getsampwidth() == 2
            assert wf.getframerate() == 10_000
            assert wf.getnframes() == 1152
            frames = wf.readframes(1152)
        theirs = tmp_path / "theirs.wav"
        with wave.open(str(theirs), "wb") as out:
            out.setnchannels(1)
            out.setsampwidth(2)
            out.setframerate(10_000)
            out.writeframes(frames)
        assert ours.read_bytes() == theirs.read_bytes()

    def test_all_zero_buffer(self, tmp_path):
        buf = WaveformBuffer(10_000.0, np.zeros(64))
        path = tmp_path / "z.wav"
        write_wav(buf, path)
        assert path.read_bytes()[44:] == b"\x00" * 128

    def test_empty_buffer_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_wav(WaveformBuffer(10_000.0, np.zeros(0)), tmp_path / "e.wav")

    def test_chunk_sizes_consistent(self, tmp_path):
        buf = WaveformBuffer(10_000.0, np.linspace(-1, 1, 333))
        path = tmp_path / "c.wav"
        write_wav(buf, path)
        blob = path.read_bytes()
        riff_size = struct.unpack_from("<I", blob, 4)[0]
        data_size = struct.unpack_from("<I", blob, 40)[0]
        assert riff_size == len(blob) - 8
        assert data_size == len(blob) - 44


class TestMaterialsFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "materials.json"
        save_material_params(DEFAULT_MATERIALS, path, note="placeholder values")
        loaded = load_material_params(path)
        assert loaded == DEFAULT_MATERIALS
        doc = json.loads(path.read_text())
        assert doc["schema"] == 1
        assert set(doc["materials"]) == {"rubber", "aluminum"}

    def test_unknown_schema_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema": 99, "materials": {}}))
        with pytest.raises(ValueError):
            load_material_params(path)
