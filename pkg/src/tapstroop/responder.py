"""Synthetic participant with a tunable congruency effect.

Reaction times are lognormal with a configurable mean shift on
incongruent trials; response errors are independent coin flips per
condition.  This is deliberately the simplest model that lets the whole
pipeline be validated end to end without a human: the mean incongruent
minus congruent difference of the generator is exactly stroop_delta_ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .device import StylusGeometry, StylusSimulator, Trajectory
from .protocol import Block, SessionConfig, SessionEngine, SessionSummary, Trial, summarize
from .signal import DEFAULT_MATERIALS, Material, MaterialParams


@dataclass(frozen=True)
class ResponderModel:
    base_rt_ms: float = 500.0  # mean congruent reaction time
    rt_sigma_ms: float = 50.0  # per-trial standard deviation, ms scale
    stroop_delta_ms: float = 60.0  # additive incongruent penalty
    p_error_congruent: float = 0.02
    p_error_incongruent: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.base_rt_ms <= 0:
            raise ValueError(f"base_rt_ms must be > 0, got {self.base_rt_ms}")
        if self.rt_sigma_ms < 0:
            raise ValueError(f"rt_sigma_ms must be >= 0, got {self.rt_sigma_ms}")
        if self.stroop_delta_ms < 0:
            raise ValueError(f"stroop_delta_ms must be >= 0, got {self.stroop_delta_ms}")
        for name in ("p_error_congruent", "p_error_incongruent"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")


def _lognormal_params(mean: float, sd: float) -> tuple[float, float]:
    """(mu, sigma) of a lognormal with the given arithmetic mean and sd."""
    if sd == 0:
        return math.log(mean), 0.0
    sigma2 = math.log(1.0 + (sd / mean) ** 2)
    mu = math.log(mean) - sigma2 / 2.0
    return mu, math.sqrt(sigma2)


class Responder:
    """Stateful sampler over one seeded stream."""

    def __init__(self, model: ResponderModel):
        self.model = model
        self.rng = np.random.default_rng(model.seed)

    def sample_response(self, block: Block, visual: Material) -> tuple[Material, float]:
        """Draw (key pressed, reaction time ms) for one trial.

        Practice trials behave like congruent ones: no conflicting tactile
        stimulus is present.
        """
        m = self.model
        mean = m.base_rt_ms
        p_error = m.p_error_congruent
        if block is Block.INCONGRUENT:
            mean += m.stroop_delta_ms
            p_error = m.p_error_incongruent
        mu, sigma = _lognormal_params(mean, m.rt_sigma_ms)
        rt_ms = float(self.rng.lognormal(mu, sigma))
        key = visual.other if self.rng.random() < p_error else visual
        return key, rt_ms


def sample_response(model: ResponderModel, block: Block, visual: Material) -> tuple[Material, float]:
    """One-shot convenience wrapper around Responder."""
    return Responder(model).sample_response(block, visual)


def _tap_trajectory(velocity: float, geometry: StylusGeometry, lead_us: float = 2_000.0) -> Trajectory:
    """Constant-rate approach crossing the contact angle after `lead_us`.

    The lead leaves the velocity estimator a full window of constant-rate
    history before the crossing.
    """
    omega = velocity / geometry.arm_length
    start = geometry.contact_angle - omega * lead_us / 1e6
    overshoot_us = 500.0
    end_t = lead_us + overshoot_us
    end = geometry.contact_angle + omega * overshoot_us / 1e6
    return Trajectory.from_points([(0.0, start), (end_t, end)])


def run_simulated_session(
    config: SessionConfig,
    model: ResponderModel,
    tap_velocity_range: tuple[float, float] = (0.3, 0.9),
    material_params: dict[Material, MaterialParams] | None = None,
    on_event=None,
) -> list[Trial]:
    """Drive the firmware simulator and session engine for a whole session.

    Scripted taps at velocities drawn uniformly from tap_velocity_range
    produce the contacts; the responder model produces keys and reaction
    times.  Events stream through `on_event`; the finished trials are
    returned (engine.summary() equivalent via protocol.summarize).
    """
    lo, hi = tap_velocity_range
    if not 0 < lo <= hi:
        raise ValueError(f"bad tap velocity range {tap_velocity_range}")
    params = material_params or DEFAULT_MATERIALS
    engine = SessionEngine(config, params, on_event=on_event)
    tap_rng = np.random.default_rng([config.seed, 0x7A9])
    geometry = StylusGeometry()
    sim = StylusSimulator(geometry)
    rest_angle = geometry.contact_angle - 0.05  # well below the re-arm band
    responder = Responder(model)

    t_next_us = 10_000
    while not engine.complete:
        sim.park(rest_angle, t_next_us)
        trial = engine.start_next_trial(sim.time_us)
        velocity = float(tap_rng.uniform(lo, hi))
        events = sim.run_trajectory(_tap_trajectory(velocity, geometry))
        if len(events) != 1:
            raise RuntimeError(f"scripted tap produced {len(events)} events, expected 1")
        engine.on_contact(events[0])
        key, rt_ms = responder.sample_response(trial.block, trial.visual_material)
        response_us = events[0].timestamp_us + max(1, round(rt_ms * 1000))
        engine.on_response(key, response_us, trial_index=trial.index)
        # next trial comfortably past the response and the refractory period
        t_next_us = response_us + 100_000
    return engine.trials


def run_session_batch(
    n_sessions: int,
    base_seed: int,
    model: ResponderModel,
    config: SessionConfig | None = None,
) -> list[SessionSummary]:
    """Run independent sessions with per-session derived seeds."""
    template = config or SessionConfig(seed=0)
    seed_rng = np.random.default_rng(base_seed)
    summaries = []
    for _ in range(n_sessions):
        session_seed, responder_seed = (int(s) for s in seed_rng.integers(0, 2**63, size=2))
        cfg = replace(template, seed=session_seed)
        mdl = replace(model, seed=responder_seed)
        trials = run_simulated_session(cfg, mdl)
        summaries.append(summarize(trials, cfg.rt_policy))
    return summaries
