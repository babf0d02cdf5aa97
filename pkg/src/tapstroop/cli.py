"""Operator command line: synth, simulate, serve, analyze.

Exit codes: 0 success, 1 domain error (bad log, insufficient data),
2 usage error.  Errors go to stderr with `error:` / `usage:` prefixes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .protocol import InsufficientData, SessionConfig, summarize
from .responder import ResponderModel, run_simulated_session
from .signal import DEFAULT_MATERIALS, Material, SynthesisConfig, render_transient
from .storage import (
    CorruptLog,
    ParseError,
    Recorder,
    analyze,
    load_material_params,
    write_log,
    write_wav,
)

PARAMS_ENV_VAR = "TAPSTROOP_PARAMS"


def _usage_error(message: str) -> int:
    print(f"usage: {message}", file=sys.stderr)
    return 2


def _error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_params(path_arg):
    path = path_arg or os.environ.get(PARAMS_ENV_VAR)
    if path is None:
        return dict(DEFAULT_MATERIALS)
    return load_material_params(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tapstroop",
        description="Visuo-tactile Stroop tapping demo tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="render one contact transient to a WAV file")
    p_synth.add_argument("--material", required=True, help="material name (rubber|aluminum)")
    p_synth.add_argument("--velocity", type=float, required=True, help="impact velocity in m/s")
    p_synth.add_argument("--params", help=f"materials JSON file (default ${PARAMS_ENV_VAR} or built-in placeholders)")
    p_synth.add_argument("--rate", type=float, default=10000.0, help="sample rate in Hz (default 10000)")
    p_synth.add_argument("-o", "--output", required=True, help="output WAV path")

    p_sim = sub.add_parser("simulate", help="run seeded simulated sessions and report the mean delta")
    p_sim.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p_sim.add_argument("--sessions", type=int, default=1, help="number of sessions (default 1)")
    p_sim.add_argument("--model", help="responder model JSON file")
    p_sim.add_argument("-o", "--output", help="directory for per-session JSONL logs")
    p_sim.add_argument("--format", choices=("text", "json"), default="text", help="report format")

    p_serve = sub.add_parser("serve", help="host the browser-facing session service")
    p_serve.add_argument("--addr", default="127.0.0.1:8000", help="host:port to bind (default 127.0.0.1:8000)")
    p_serve.add_argument("--params", help=f"materials JSON file (default ${PARAMS_ENV_VAR} or built-in placeholders)")
    p_serve.add_argument("--logs", default="logs", help="directory for session logs (default ./logs)")
    p_serve.add_argument("--token", help="session token (default: generated and printed)")
    p_serve.add_argument("--seed", type=int, default=0, help="base seed for per-connection schedules")
    p_serve.add_argument("--ui", help="static frontend directory to mount at /")

    p_an = sub.add_parser("analyze", help="recompute a session summary from a JSONL log")
    p_an.add_argument("log", help="JSONL session log")
    p_an.add_argument("--format", choices=("text", "json"), default="text", help="output format")

    return parser


def _cmd_synth(args) -> int:
    if args.velocity < 0:
        return _usage_error(f"--velocity must be >= 0, got {args.velocity}")
    if args.rate <= 0:
        return _usage_error(f"--rate must be > 0, got {args.rate}")
    try:
        material = Material(args.material.lower())
    except ValueError:
        return _usage_error(f"unknown material {args.material!r} (expected rubber|aluminum)")
    try:
        params = _load_params(args.params)
    except (OSError, ValueError) as exc:
        return _error(f"loading materials: {exc}")
    config = SynthesisConfig(sample_rate=args.rate)
    try:
        buffer = render_transient(params[material], args.velocity, config)
    except ValueError as exc:
        return _error(str(exc))
    if len(buffer) == 0:
        return _error("zero-velocity impact renders an empty transient; nothing to write")
    try:
        write_wav(buffer, args.output)
    except OSError as exc:
        return _error(str(exc))
    print(f"wrote {args.output}: {len(buffer)} samples at {int(buffer.sample_rate)} Hz")
    return 0


def _load_model(path) -> ResponderModel:
    if path is None:
        return ResponderModel()
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return ResponderModel(**doc)


def _cmd_simulate(args) -> int:
    if args.sessions < 1:
        return _usage_error(f"--sessions must be >= 1, got {args.sessions}")
    if args.seed < 0:
        return _usage_error(f"--seed must be >= 0, got {args.seed}")
    try:
        model = _load_model(args.model)
    except (OSError, ValueError, TypeError) as exc:
        return _error(f"loading model: {exc}")

    out_dir = Path(args.output) if args.output else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    template = SessionConfig(seed=0)
    seed_rng = np.random.default_rng(args.seed)
    deltas = []
    try:
        for i in range(args.sessions):
            session_seed, responder_seed = (int(s) for s in seed_rng.integers(0, 2**63, size=2))
            cfg = replace(template, seed=session_seed)
            mdl = replace(model, seed=responder_seed)
            recorder = Recorder()
            trials = run_simulated_session(cfg, mdl, on_event=recorder.record)
            summary = summarize(trials, cfg.rt_policy)
            deltas.append(summary.stroop_delta_ms)
            if out_dir is not None:
                write_log(recorder.records, out_dir / f"session_{i + 1:04d}.jsonl")
    except InsufficientData as exc:
        return _error(str(exc))

    mean_delta = math.fsum(deltas) / len(deltas)
    if args.format == "json":
        print(json.dumps({"sessions": len(deltas), "mean_stroop_delta_ms": mean_delta}))
    else:
        print(f"sessions: {len(deltas)}")
        print(f"mean stroop delta: {mean_delta:.3f} ms")
    return 0


def _cmd_serve(args) -> int:
    import secrets

    import uvicorn

    from .service import create_app

    try:
        host, port_text = args.addr.rsplit(":", 1)
        port = int(port_text)
    except ValueError:
        return _usage_error(f"--addr must be host:port, got {args.addr!r}")
    try:
        params = _load_params(args.params)
    except (OSError, ValueError) as exc:
        return _error(f"loading materials: {exc}")
    token = args.token or secrets.token_urlsafe(12)
    app = create_app(
        material_params=params,
        logs_dir=args.logs,
        token=token,
        base_config=SessionConfig(seed=args.seed),
        frontend_dir=args.ui,
    )
    print(f"session token: {token}")
    print(f"connect: ws://{args.addr}/ws?token={token}")
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def _cmd_analyze(args) -> int:
    try:
        summary = analyze(args.log)
    except FileNotFoundError:
        return _error(f"no such log: {args.log}")
    except (ParseError, CorruptLog, InsufficientData) as exc:
        return _error(str(exc))
    if args.format == "json":
        print(json.dumps(asdict(summary)))
    else:
        flag = " (partial log)" if summary.partial else ""
        print(f"congruent:   mean rt {summary.mean_rt_congruent_ms:.3f} ms, "
              f"accuracy {summary.accuracy_congruent:.2f}, n={summary.n_used_congruent}{flag}")
        print(f"incongruent: mean rt {summary.mean_rt_incongruent_ms:.3f} ms, "
              f"accuracy {summary.accuracy_incongruent:.2f}, n={summary.n_used_incongruent}")
        print(f"stroop delta: {summary.stroop_delta_ms:.3f} ms")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed its usage message
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "synth": _cmd_synth,
        "simulate": _cmd_simulate,
        "serve": _cmd_serve,
        "analyze": _cmd_analyze,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
