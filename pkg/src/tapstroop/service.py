"""Session host speaking a JSON message protocol to one client.

Each frame is one WireMessage.  The server drives the session: after the
client's `hello` it sends `config`, runs a short ping/pong clock
calibration, then loops trial_start -> tap -> stimulus -> response ->
trial_result through the blocks and finishes with `session_summary`.

Reaction times are computed purely from the client's monotonic
timestamps (response minus stimulus-displayed), so network jitter cannot
leak into them.  The calibrated clock offset is used only to align log
timestamps across machines.

SessionHost is transport-agnostic and synchronous; the FastAPI app in
create_app adapts it to a WebSocket plus two HTTP endpoints
(GET /healthz, GET /session/{id}/log).
"""

from __future__ import annotations

import json
import secrets
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse

from .device import ContactEvent
from .protocol import (
    DuplicateResponse,
    EarlyResponse,
    IgnoredContact,
    SessionConfig,
    SessionEngine,
    summary_to_payload,
)
from .signal import Material, MaterialParams

PROTOCOL_VERSION = 1
DEFAULT_CALIBRATION_PINGS = 5
DEFAULT_KEY_MAP = {"r": Material.RUBBER.value, "a": Material.ALUMINUM.value}

CLIENT_TYPES = ("hello", "pong", "tap", "response")
SERVER_TYPES = (
    "config",
    "ping",
    "trial_start",
    "stimulus",
    "trial_result",
    "block_end",
    "session_summary",
    "protocol_error",
)


class CalibrationFailed(RuntimeError):
    pass


class ProtocolViolation(RuntimeError):
    """Out-of-order or malformed client traffic; closes the connection."""

    def __init__(self, name: str, detail: str = ""):
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name


@dataclass(frozen=True)
class WireMessage:
    type: str
    session_id: str
    seq: int
    body: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"type": self.type, "session_id": self.session_id, "seq": self.seq, "body": self.body},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> "WireMessage":
        try:
            obj = json.loads(text)
            return cls(
                type=str(obj["type"]),
                session_id=str(obj.get("session_id", "")),
                seq=int(obj["seq"]),
                body=dict(obj.get("body") or {}),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ProtocolViolation("MalformedMessage", str(exc)) from exc


def _monotonic_us() -> int:
    return time.monotonic_ns() // 1000


def estimate_clock_offset(samples) -> float:
    """Median of (server midpoint - client stamp) over ping exchanges.

    Symmetric link delay cancels exactly; an asymmetric split biases the
    estimate by half the difference, which is why reaction times never go
    through this value.
    """
    offsets = [(send_us + recv_us) / 2.0 - client_us for send_us, recv_us, client_us in samples]
    return statistics.median(offsets)


def calibrate_clock(transport, k: int, clock_us: Callable[[], int] = _monotonic_us) -> float:
    """Run k ping/pong exchanges over a blocking transport; returns offset.

    `transport` needs send(WireMessage) and recv() -> WireMessage.
    """
    if k < 3:
        raise ValueError(f"need at least 3 pings, got {k}")
    samples = []
    for i in range(k):
        send_us = clock_us()
        transport.send(WireMessage("ping", "", i + 1, {"k": i, "server_send_us": send_us}))
        reply = transport.recv()
        recv_us = clock_us()
        if reply is None or reply.type != "pong" or "client_time_us" not in reply.body:
            raise CalibrationFailed(f"exchange {i + 1}/{k} not completed")
        samples.append((send_us, recv_us, reply.body["client_time_us"]))
    return estimate_clock_offset(samples)


class SessionHost:
    """One session's server-side state machine.

    Feed client frames to on_message(); it returns the frames to send
    back.  Event records are stamped with the server clock; client-side
    times live inside payloads.
    """

    def __init__(
        self,
        config: SessionConfig,
        material_params: Mapping[Material, MaterialParams],
        session_id: str | None = None,
        logs_dir=None,
        clock_us: Callable[[], int] = _monotonic_us,
        calibration_pings: int = DEFAULT_CALIBRATION_PINGS,
        key_map: dict | None = None,
    ):
        from .storage import Recorder  # storage imports protocol; keep service on top

        self.config = config
        self.material_params = dict(material_params)
        self.session_id = session_id or secrets.token_hex(8)
        self.logs_dir = Path(logs_dir) if logs_dir else None
        self.clock_us = clock_us
        self.calibration_pings = calibration_pings
        self.key_map = key_map or dict(DEFAULT_KEY_MAP)

        self.recorder = Recorder()
        self.engine = SessionEngine(config, material_params, on_event=self._record_event)
        self.state = "await_hello"
        self.clock_offset_us: float | None = None
        self.log_path: Path | None = None

        self._server_seq = 0
        self._last_client_seq = 0
        self._ping_samples: list[tuple[int, int, int]] = []
        self._pending_ping: tuple[int, int] | None = None  # (seq, send_us)
        self._tap_count = 0

    # -- helpers ---------------------------------------------------------

    def _record_event(self, kind: str, t_us: int, payload: dict) -> None:
        # server-clock stamps keep the log monotone even with a skewed client
        self.recorder.record(kind, self.clock_us(), payload)

    def _make(self, type_: str, body: dict) -> WireMessage:
        self._server_seq += 1
        return WireMessage(type_, self.session_id, self._server_seq, body)

    @property
    def done(self) -> bool:
        return self.state in ("complete", "failed")

    # -- message plumbing --------------------------------------------------

    def handle_text(self, text: str) -> list[WireMessage]:
        try:
            msg = WireMessage.from_json(text)
        except ProtocolViolation as exc:
            return [self._fail(exc.name, str(exc))]
        return self.on_message(msg)

    def on_message(self, msg: WireMessage) -> list[WireMessage]:
        if self.done:
            return []
        try:
            self._check_envelope(msg)
            return self._dispatch(msg)
        except ProtocolViolation as exc:
            return [self._fail(exc.name, str(exc))]
        except (EarlyResponse, DuplicateResponse, IgnoredContact) as exc:
            return [self._fail(type(exc).__name__, str(exc))]
        except ValueError as exc:
            return [self._fail("InvalidTimestamp", str(exc))]

    def _check_envelope(self, msg: WireMessage) -> None:
        if msg.type not in CLIENT_TYPES:
            raise ProtocolViolation("UnknownType", msg.type)
        if msg.seq != self._last_client_seq + 1:
            raise ProtocolViolation(
                "OutOfOrder", f"expected client seq {self._last_client_seq + 1}, got {msg.seq}"
            )
        self._last_client_seq = msg.seq
        if msg.type != "hello" and msg.session_id != self.session_id:
            raise ProtocolViolation("WrongSession", msg.session_id)

    def _dispatch(self, msg: WireMessage) -> list[WireMessage]:
        if msg.type == "hello":
            if self.state != "await_hello":
                raise ProtocolViolation("OutOfOrder", "hello after start")
            return self._on_hello(msg)
        if msg.type == "pong":
            if self.state != "calibrating":
                raise ProtocolViolation("OutOfOrder", "pong outside calibration")
            return self._on_pong(msg)
        if msg.type == "tap":
            if self.state != "await_tap":
                raise ProtocolViolation("IgnoredContact", f"tap while {self.state}")
            return self._on_tap(msg)
        if msg.type == "response":
            if self.state not in ("await_tap", "await_response"):
                raise ProtocolViolation("OutOfOrder", f"response while {self.state}")
            return self._on_response(msg)
        raise ProtocolViolation("UnknownType", msg.type)

    # -- handlers ---------------------------------------------------------

    def _on_hello(self, msg: WireMessage) -> list[WireMessage]:
        config_body = {
            "protocol": PROTOCOL_VERSION,
            "ack_seq": msg.seq,
            "trials_per_condition": self.config.trials_per_condition,
            "block_order": self.config.block_order.value,
            "rt_policy": self.config.rt_policy.value,
            "velocity_limit": self.config.velocity_limit,
            "materials": {
                m.value: {"A": p.amplitude_coeff, "B": p.decay_rate, "f": p.frequency}
                for m, p in self.material_params.items()
            },
            "keys": self.key_map,
            "calibration_pings": self.calibration_pings,
        }
        out = [self._make("config", config_body)]
        self.state = "calibrating"
        out.append(self._next_ping())
        return out

    def _next_ping(self) -> WireMessage:
        send_us = self.clock_us()
        msg = self._make(
            "ping", {"k": len(self._ping_samples), "server_send_us": send_us}
        )
        self._pending_ping = (msg.seq, send_us)
        return msg

    def _on_pong(self, msg: WireMessage) -> list[WireMessage]:
        if self._pending_ping is None or msg.body.get("ack_seq") != self._pending_ping[0]:
            raise ProtocolViolation("OutOfOrder", "pong does not match outstanding ping")
        if "client_time_us" not in msg.body:
            raise ProtocolViolation("MalformedMessage", "pong missing client_time_us")
        recv_us = self.clock_us()
        self._ping_samples.append((self._pending_ping[1], recv_us, msg.body["client_time_us"]))
        self._pending_ping = None
        if len(self._ping_samples) < self.calibration_pings:
            return [self._next_ping()]
        self.clock_offset_us = estimate_clock_offset(self._ping_samples)
        return self._start_trial()

    def _start_trial(self) -> list[WireMessage]:
        trial = self.engine.start_next_trial(self.clock_us())
        self.state = "await_tap"
        block_trials = [t for t in self.engine.schedule if t.block is trial.block]
        return [
            self._make(
                "trial_start",
                {
                    "index": trial.index,
                    "block": trial.block.value,
                    "trial_in_block": block_trials.index(trial) + 1,
                    "trials_in_block": len(block_trials),
                },
            )
        ]

    def _on_tap(self, msg: WireMessage) -> list[WireMessage]:
        body = msg.body
        if "velocity" not in body or "client_time_us" not in body:
            raise ProtocolViolation("MalformedMessage", "tap needs velocity and client_time_us")
        velocity = float(body["velocity"])
        if velocity < 0:
            raise ProtocolViolation("MalformedMessage", f"negative velocity {velocity}")
        event = ContactEvent(
            timestamp_us=int(body["client_time_us"]), velocity=velocity, tick_index=self._tap_count
        )
        self._tap_count += 1
        assignment = self.engine.on_contact(event)
        self.state = "await_response"
        trial = self.engine.current_trial
        tactile = None
        if assignment.tactile_params is not None:
            p = assignment.tactile_params
            tactile = {
                "material": p.material.value,
                "A": p.amplitude_coeff,
                "B": p.decay_rate,
                "f": p.frequency,
                "velocity": assignment.tactile_velocity,
            }
        return [
            self._make(
                "stimulus",
                {
                    "ack_seq": msg.seq,
                    "index": trial.index,
                    "visual": assignment.visual_texture.value,
                    "tactile": tactile,
                },
            )
        ]

    def _on_response(self, msg: WireMessage) -> list[WireMessage]:
        body = msg.body
        for key in ("material", "client_time_us", "stimulus_displayed_us"):
            if key not in body:
                raise ProtocolViolation("MalformedMessage", f"response missing {key}")
        try:
            material = Material(body["material"])
        except ValueError as exc:
            raise ProtocolViolation("MalformedMessage", f"unknown material {body['material']!r}") from exc
        trial = self.engine.on_response(
            material,
            int(body["client_time_us"]),
            trial_index=body.get("index"),
            displayed_us=int(body["stimulus_displayed_us"]),
        )
        out = [
            self._make(
                "trial_result",
                {"ack_seq": msg.seq, "index": trial.index, "correct": trial.correct, "rt_ms": trial.rt_ms},
            )
        ]
        if self.engine.complete:
            out.append(self._make("block_end", {"block": trial.block.value}))
            out.append(self._make("session_summary", summary_to_payload(self.engine.summary())))
            self.state = "complete"
            self._finalize_log()
        else:
            nxt = self.engine.current_trial
            if nxt.block is not trial.block:
                out.append(self._make("block_end", {"block": trial.block.value}))
            out.extend(self._start_trial())
        return out

    # -- teardown ----------------------------------------------------------

    def _fail(self, name: str, detail: str) -> WireMessage:
        self.state = "failed"
        self._finalize_log()
        return self._make("protocol_error", {"error": name, "detail": detail})

    def on_disconnect(self) -> None:
        if not self.done:
            self.state = "failed"
            self._finalize_log()

    def _finalize_log(self) -> None:
        if self.logs_dir is None or self.log_path is not None:
            return
        from .storage import write_log

        self.logs_dir.mkdir(parents=True, exist_ok=True)
        path = self.logs_dir / f"{self.session_id}.jsonl"
        write_log(self.recorder.records, path)
        self.log_path = path


def create_app(
    material_params: Mapping[Material, MaterialParams] | None = None,
    logs_dir=None,
    token: str | None = None,
    base_config: SessionConfig | None = None,
    frontend_dir=None,
):
    """FastAPI app hosting one session per WebSocket connection."""
    from .signal import DEFAULT_MATERIALS

    params = dict(material_params or DEFAULT_MATERIALS)
    template = base_config or SessionConfig(seed=0)
    app = FastAPI(title="tapstroop")
    app.state.token = token
    app.state.sessions: dict[str, SessionHost] = {}
    app.state.session_counter = 0

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/session/{session_id}/log")
    def session_log(session_id: str):
        host = app.state.sessions.get(session_id)
        if host is None or host.log_path is None:
            return JSONResponse({"error": "unknown or unfinished session"}, status_code=404)
        return FileResponse(host.log_path, media_type="application/jsonl")

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        if app.state.token and websocket.query_params.get("token") != app.state.token:
            await websocket.close(code=4403)
            return
        await websocket.accept()
        app.state.session_counter += 1
        config = replace(template, seed=template.seed + app.state.session_counter)
        logs = Path(logs_dir) if logs_dir else None
        host = SessionHost(config, params, logs_dir=logs)
        app.state.sessions[host.session_id] = host
        try:
            while not host.done:
                text = await websocket.receive_text()
                for reply in host.handle_text(text):
                    await websocket.send_text(reply.to_json())
            await websocket.close()
        except WebSocketDisconnect:
            host.on_disconnect()

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
