"""Session persistence and offline analysis.

Event logs are append-only JSONL: one object per line with keys `seq`,
`t_us`, `kind`, `payload`.  Sequence numbers start at 1 and increase by
exactly one, which makes truncation and corruption detectable.  Waveforms
export as mono 16-bit PCM WAV.  Material coefficient files are JSON keyed
by material name.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

from . import protocol
from .protocol import RtPolicy, SessionSummary, Trial, Block, summary_from_payload
from .signal import Material, MaterialParams, WaveformBuffer

EVENT_KINDS = (
    protocol.EVENT_TRIAL_START,
    protocol.EVENT_CONTACT,
    protocol.EVENT_STIMULUS,
    protocol.EVENT_RESPONSE,
    protocol.EVENT_TRIAL_RESULT,
    protocol.EVENT_BLOCK_END,
    protocol.EVENT_SESSION_END,
)

MATERIALS_SCHEMA_VERSION = 1


class ParseError(ValueError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CorruptLog(ValueError):
    pass


@dataclass(frozen=True)
class EventRecord:
    seq: int
    t_us: int
    kind: str
    payload: dict


class Recorder:
    """Assigns sequence numbers and keeps timestamps non-decreasing.

    Wire it to SessionEngine's on_event callback; the collected records go
    straight to write_log.
    """

    def __init__(self):
        self.records: list[EventRecord] = []

    def record(self, kind: str, t_us: int, payload: dict) -> EventRecord:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if self.records and t_us < self.records[-1].t_us:
            raise ValueError(
                f"timestamp went backwards: {t_us} after {self.records[-1].t_us}"
            )
        rec = EventRecord(seq=len(self.records) + 1, t_us=t_us, kind=kind, payload=payload)
        self.records.append(rec)
        return rec


def write_log(events, path) -> None:
    """One JSON object per line, UTF-8, newline separators."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in events:
            fh.write(
                json.dumps(
                    {"seq": rec.seq, "t_us": rec.t_us, "kind": rec.kind, "payload": rec.payload},
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def read_log(path) -> list[EventRecord]:
    """Exact inverse of write_log, validating sequence and time order."""
    records: list[EventRecord] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = EventRecord(
                    seq=int(obj["seq"]),
                    t_us=int(obj["t_us"]),
                    kind=str(obj["kind"]),
                    payload=dict(obj["payload"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), line_no) from exc
            if rec.kind not in EVENT_KINDS:
                raise ParseError(f"unknown event kind {rec.kind!r}", line_no)
            expected = len(records) + 1
            if rec.seq != expected:
                raise CorruptLog(f"expected seq {expected} at record {expected}, got {rec.seq}")
            if records and rec.t_us < records[-1].t_us:
                raise CorruptLog(f"timestamp went backwards at seq {rec.seq}")
            records.append(rec)
    return records


def trials_from_records(records: list[EventRecord]) -> tuple[list[Trial], bool, RtPolicy | None]:
    """Rebuild trials from a log; returns (trials, partial, recorded policy)."""
    trials: dict[int, Trial] = {}
    policy: RtPolicy | None = None
    complete = False
    for rec in records:
        p = rec.payload
        if rec.kind == protocol.EVENT_TRIAL_START:
            idx = p["index"]
            trials[idx] = Trial(
                index=idx,
                block=Block(p["block"]),
                visual_material=Material(p["visual"]),
                tactile_material=Material(p["tactile"]) if p.get("tactile") else None,
            )
        elif rec.kind == protocol.EVENT_TRIAL_RESULT:
            trial = trials.get(p["index"])
            if trial is None:
                raise CorruptLog(f"result for unknown trial {p['index']} at seq {rec.seq}")
            trial.rt_ms = p["rt_ms"]
            trial.correct = p["correct"]
            trial.response_material = Material(p["response"])
            trial.stimulus_onset_us = p.get("onset_us")
        elif rec.kind == protocol.EVENT_SESSION_END:
            complete = True
            if "rt_policy" in p:
                policy = RtPolicy(p["rt_policy"])
    ordered = [trials[i] for i in sorted(trials)]
    return ordered, not complete, policy


def analyze(path, rt_policy: RtPolicy | None = None) -> SessionSummary:
    """Recompute the session summary from a log file.

    Uses the policy recorded at session end when present, else the
    argument, else CORRECT_ONLY.  A log with no SessionEnd record yields a
    summary flagged partial.
    """
    records = read_log(path)
    trials, partial, recorded_policy = trials_from_records(records)
    policy = recorded_policy or rt_policy or RtPolicy.CORRECT_ONLY
    return protocol.summarize(trials, policy, partial=partial)


def recorded_summary(records: list[EventRecord]) -> SessionSummary | None:
    """The summary the engine wrote at session end, if the log has one."""
    for rec in reversed(records):
        if rec.kind == protocol.EVENT_SESSION_END:
            return summary_from_payload(rec.payload["summary"])
    return None


# -- WAV export ---------------------------------------------------------


def _encode_s16(x: float) -> int:
    clamped = max(-1.0, min(1.0, x))
    scaled = clamped * 32767.0
    # round half away from zero, symmetric about 0
    return int(math.floor(scaled + 0.5)) if scaled >= 0 else int(math.ceil(scaled - 0.5))


def write_wav(buffer: WaveformBuffer, path) -> None:
    """Mono 16-bit little-endian PCM at the buffer's sample rate."""
    if len(buffer) == 0:
        raise ValueError("refusing to write an empty waveform")
    rate = int(round(buffer.sample_rate))
    data = b"".join(struct.pack("<h", _encode_s16(float(x))) for x in buffer.samples)
    path = Path(path)
    try:
        with path.open("wb") as fh:
            fh.write(b"RIFF")
            fh.write(struct.pack("<I", 36 + len(data)))
            fh.write(b"WAVE")
            fh.write(b"fmt ")
            fh.write(struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16))
            fh.write(b"data")
            fh.write(struct.pack("<I", len(data)))
            fh.write(data)
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


# -- material parameter files --------------------------------------------


def save_material_params(params: dict[Material, MaterialParams], path, note: str | None = None) -> None:
    doc = {
        "schema": MATERIALS_SCHEMA_VERSION,
        "materials": {
            m.value: {"A": p.amplitude_coeff, "B": p.decay_rate, "f": p.frequency}
            for m, p in params.items()
        },
    }
    if note:
        doc["note"] = note
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_material_params(path) -> dict[Material, MaterialParams]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != MATERIALS_SCHEMA_VERSION:
        raise ValueError(f"unsupported materials schema {doc.get('schema')!r} in {path}")
    out: dict[Material, MaterialParams] = {}
    for name, fields in doc["materials"].items():
        material = Material(name)
        out[material] = MaterialParams(
            material=material,
            amplitude_coeff=float(fields["A"]),
            decay_rate=float(fields["B"]),
            frequency=float(fields["f"]),
        )
    return out
