"""Visuo-tactile Stroop tapping demo, software-complete.

Synthesizes contact vibration transients, simulates the 10 kHz stylus
firmware, runs the Stroop session protocol with a simulated or live
participant, and measures the congruency reaction-time effect.
"""

from .device import ContactEvent, StylusGeometry, StylusSimulator, Trajectory
from .protocol import (
    Block,
    BlockOrder,
    RtPolicy,
    SessionConfig,
    SessionEngine,
    SessionSummary,
    Trial,
    build_schedule,
    summarize,
)
from .responder import ResponderModel, run_simulated_session, run_session_batch
from .signal import (
    DEFAULT_MATERIALS,
    Material,
    MaterialParams,
    SynthesisConfig,
    WaveformBuffer,
    gen_masking_noise,
    quantize_dac,
    render_transient,
    synth_sample,
)
from .storage import Recorder, analyze, read_log, write_log, write_wav

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockOrder",
    "ContactEvent",
    "DEFAULT_MATERIALS",
    "Material",
    "MaterialParams",
    "Recorder",
    "ResponderModel",
    "RtPolicy",
    "SessionConfig",
    "SessionEngine",
    "SessionSummary",
    "StylusGeometry",
    "StylusSimulator",
    "SynthesisConfig",
    "Trajectory",
    "Trial",
    "WaveformBuffer",
    "analyze",
    "build_schedule",
    "gen_masking_noise",
    "quantize_dac",
    "read_log",
    "render_transient",
    "run_session_batch",
    "run_simulated_session",
    "summarize",
    "synth_sample",
    "write_log",
    "write_wav",
]
