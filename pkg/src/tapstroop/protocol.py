"""Stroop session state machine.

Builds the block-structured trial schedule, assigns stimuli on contact,
scores keypad responses, and reduces a finished session to per-condition
mean reaction times plus their congruency delta.

The engine accepts exactly the event sequence (contact -> response) per
trial; any other ordering raises and leaves trial state untouched, so the
caller can log and carry on.  All events are applied by a single driver
loop; snapshots handed out are plain values.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping

from .device import ContactEvent
from .signal import Material, MaterialParams


class Block(str, Enum):
    PRACTICE = "practice"
    CONGRUENT = "congruent"
    INCONGRUENT = "incongruent"


class BlockOrder(str, Enum):
    PRACTICE_CONGRUENT_INCONGRUENT = "practice_congruent_incongruent"
    PRACTICE_INCONGRUENT_CONGRUENT = "practice_incongruent_congruent"

    @property
    def blocks(self) -> tuple[Block, Block, Block]:
        if self is BlockOrder.PRACTICE_CONGRUENT_INCONGRUENT:
            return (Block.PRACTICE, Block.CONGRUENT, Block.INCONGRUENT)
        return (Block.PRACTICE, Block.INCONGRUENT, Block.CONGRUENT)


class RtPolicy(str, Enum):
    CORRECT_ONLY = "correct_only"
    ALL_RESPONSES = "all_responses"


class InvalidConfig(ValueError):
    pass


class IgnoredContact(RuntimeError):
    """Contact while no trial is armed, or a second contact before response."""


class EarlyResponse(RuntimeError):
    """Response arrived before the trial's contact."""


class DuplicateResponse(RuntimeError):
    """Second response to an already finalized trial."""


class InsufficientData(RuntimeError):
    """A condition has no includable trials under the reaction-time policy."""


@dataclass(frozen=True)
class SessionConfig:
    seed: int
    trials_per_condition: int = 6
    materials: tuple[Material, Material] = (Material.RUBBER, Material.ALUMINUM)
    velocity_limit: float = 1.0  # m/s, taps above this render at the limit
    block_order: BlockOrder = BlockOrder.PRACTICE_CONGRUENT_INCONGRUENT
    rt_policy: RtPolicy = RtPolicy.CORRECT_ONLY

    def __post_init__(self):
        if self.trials_per_condition < 2 or self.trials_per_condition % 2 != 0:
            raise InvalidConfig(
                f"trials_per_condition must be even and >= 2, got {self.trials_per_condition}"
            )
        if len(set(self.materials)) != 2:
            raise InvalidConfig("materials must be two distinct entries")
        if self.velocity_limit <= 0:
            raise InvalidConfig(f"velocity_limit must be > 0, got {self.velocity_limit}")


@dataclass
class Trial:
    index: int
    block: Block
    visual_material: Material
    tactile_material: Material | None  # None in practice (vibrator not driven)
    contact: ContactEvent | None = None
    stimulus_onset_us: int | None = None
    response_material: Material | None = None
    response_timestamp_us: int | None = None
    rt_ms: float | None = None
    correct: bool | None = None


@dataclass(frozen=True)
class StimulusAssignment:
    """What to present at contact: the texture, and the transient if any."""

    visual_texture: Material
    tactile_params: MaterialParams | None
    tactile_velocity: float | None


@dataclass(frozen=True)
class SessionSummary:
    mean_rt_congruent_ms: float
    mean_rt_incongruent_ms: float
    stroop_delta_ms: float  # incongruent - congruent
    accuracy_congruent: float
    accuracy_incongruent: float
    n_used_congruent: int
    n_used_incongruent: int
    partial: bool = False


def build_schedule(config: SessionConfig) -> list[Trial]:
    """Deterministic, seed-shuffled trial list for one session.

    Each block presents every material visually trials_per_condition/2
    times in shuffled order.  Congruent trials pair the same tactile
    material, incongruent the other, practice none.
    """
    rng = random.Random(config.seed)
    half = config.trials_per_condition // 2
    trials: list[Trial] = []
    for block in config.block_order.blocks:
        visuals = [config.materials[0]] * half + [config.materials[1]] * half
        rng.shuffle(visuals)
        for visual in visuals:
            if block is Block.PRACTICE:
                tactile = None
            elif block is Block.CONGRUENT:
                tactile = visual
            else:
                tactile = visual.other
            trials.append(Trial(index=len(trials), block=block, visual_material=visual, tactile_material=tactile))
    return trials


def _condition_stats(trials: list[Trial], block: Block, rt_policy: RtPolicy):
    responded = [t for t in trials if t.block is block and t.rt_ms is not None]
    if rt_policy is RtPolicy.CORRECT_ONLY:
        included = [t for t in responded if t.correct]
    else:
        included = responded
    if not included:
        raise InsufficientData(f"no includable {block.value} trials under {rt_policy.value}")
    # fsum: exactly rounded, so the mean is invariant to trial order
    mean_rt = math.fsum(t.rt_ms for t in included) / len(included)
    accuracy = sum(1 for t in responded if t.correct) / len(responded)
    return mean_rt, accuracy, len(included)


def summarize(trials: list[Trial], rt_policy: RtPolicy = RtPolicy.CORRECT_ONLY, partial: bool = False) -> SessionSummary:
    """Per-condition mean reaction times and the congruency delta.

    Practice trials never count.  Under CORRECT_ONLY, incorrect trials are
    excluded from the RT means but still lower accuracy.
    """
    mean_c, acc_c, n_c = _condition_stats(trials, Block.CONGRUENT, rt_policy)
    mean_i, acc_i, n_i = _condition_stats(trials, Block.INCONGRUENT, rt_policy)
    return SessionSummary(
        mean_rt_congruent_ms=mean_c,
        mean_rt_incongruent_ms=mean_i,
        stroop_delta_ms=mean_i - mean_c,
        accuracy_congruent=acc_c,
        accuracy_incongruent=acc_i,
        n_used_congruent=n_c,
        n_used_incongruent=n_i,
        partial=partial,
    )


# Event kinds emitted through the engine's callback; the storage layer
# writes them out verbatim.
EVENT_TRIAL_START = "TrialStart"
EVENT_CONTACT = "Contact"
EVENT_STIMULUS = "Stimulus"
EVENT_RESPONSE = "Response"
EVENT_TRIAL_RESULT = "TrialResult"
EVENT_BLOCK_END = "BlockEnd"
EVENT_SESSION_END = "SessionEnd"

EventCallback = Callable[[str, int, dict], None]


class SessionEngine:
    """Drives one session over a prebuilt schedule.

    Lifecycle per trial: start_next_trial() arms it, on_contact() assigns
    the stimulus, on_response() scores and finalizes.  Emits one event per
    transition through the optional callback (kind, t_us, payload).
    """

    def __init__(
        self,
        config: SessionConfig,
        material_params: Mapping[Material, MaterialParams],
        on_event: EventCallback | None = None,
    ):
        for material in config.materials:
            if material not in material_params:
                raise InvalidConfig(f"no parameters for material {material.value}")
        self.config = config
        self.material_params = dict(material_params)
        self.schedule = build_schedule(config)
        self._on_event = on_event
        self._cursor = 0  # index of the trial currently in play
        self._armed = False
        self._ended = False

    # -- introspection -------------------------------------------------

    @property
    def current_trial(self) -> Trial | None:
        if self._cursor < len(self.schedule):
            return self.schedule[self._cursor]
        return None

    @property
    def complete(self) -> bool:
        return self._cursor >= len(self.schedule)

    @property
    def trials(self) -> list[Trial]:
        return list(self.schedule)

    def _emit(self, kind: str, t_us: int, payload: dict) -> None:
        if self._on_event is not None:
            self._on_event(kind, t_us, payload)

    # -- state transitions ----------------------------------------------

    def start_next_trial(self, t_us: int) -> Trial:
        if self.complete:
            raise RuntimeError("session already complete")
        if self._armed:
            raise RuntimeError("previous trial still in play")
        trial = self.schedule[self._cursor]
        self._armed = True
        self._emit(
            EVENT_TRIAL_START,
            t_us,
            {
                "index": trial.index,
                "block": trial.block.value,
                "visual": trial.visual_material.value,
                "tactile": trial.tactile_material.value if trial.tactile_material else None,
            },
        )
        return trial

    def on_contact(self, event: ContactEvent) -> StimulusAssignment:
        """Record the impact and return what to present.

        Practice trials get no tactile component; otherwise the trial's
        tactile material renders at the impact velocity clamped to the
        session limit.
        """
        trial = self.current_trial
        if trial is None or not self._armed:
            raise IgnoredContact("contact with no trial armed")
        if trial.contact is not None:
            raise IgnoredContact(f"second contact in trial {trial.index} before response")
        trial.contact = event
        trial.stimulus_onset_us = event.timestamp_us
        if trial.tactile_material is None:
            params, velocity = None, None
        else:
            params = self.material_params[trial.tactile_material]
            velocity = min(event.velocity, self.config.velocity_limit)
        self._emit(
            EVENT_CONTACT,
            event.timestamp_us,
            {"tick_index": event.tick_index, "velocity": event.velocity, "timestamp_us": event.timestamp_us},
        )
        self._emit(
            EVENT_STIMULUS,
            event.timestamp_us,
            {
                "index": trial.index,
                "visual": trial.visual_material.value,
                "tactile": trial.tactile_material.value if trial.tactile_material else None,
                "velocity": velocity,
            },
        )
        return StimulusAssignment(trial.visual_material, params, velocity)

    def on_response(
        self,
        key_material: Material,
        timestamp_us: int,
        trial_index: int | None = None,
        displayed_us: int | None = None,
    ) -> Trial:
        """Score the keypad response and finalize the trial.

        `displayed_us` overrides the stimulus onset with the client-side
        display timestamp so both ends of the reaction time come from the
        same clock.  `trial_index` lets remote callers flag duplicates.
        """
        trial = self.current_trial
        if trial_index is not None and trial_index < self._cursor:
            raise DuplicateResponse(f"trial {trial_index} already finalized")
        if trial is None:
            raise DuplicateResponse("session complete; response discarded")
        if trial.contact is None:
            raise EarlyResponse(f"response before contact in trial {trial.index}")
        if trial.response_material is not None:
            raise DuplicateResponse(f"trial {trial.index} already has a response")
        onset = trial.stimulus_onset_us if displayed_us is None else displayed_us
        if timestamp_us <= onset:
            raise ValueError(
                f"response at {timestamp_us} us does not follow stimulus onset {onset} us"
            )
        trial.stimulus_onset_us = onset
        trial.response_material = key_material
        trial.response_timestamp_us = timestamp_us
        trial.rt_ms = (timestamp_us - onset) / 1000.0
        trial.correct = key_material is trial.visual_material
        self._emit(
            EVENT_RESPONSE,
            timestamp_us,
            {"index": trial.index, "material": key_material.value, "timestamp_us": timestamp_us},
        )
        self._emit(
            EVENT_TRIAL_RESULT,
            timestamp_us,
            {
                "index": trial.index,
                "block": trial.block.value,
                "visual": trial.visual_material.value,
                "tactile": trial.tactile_material.value if trial.tactile_material else None,
                "response": key_material.value,
                "rt_ms": trial.rt_ms,
                "correct": trial.correct,
                "onset_us": onset,
            },
        )
        self._advance(timestamp_us, trial)
        return trial

    def _advance(self, t_us: int, finished: Trial) -> None:
        self._armed = False
        self._cursor += 1
        nxt = self.current_trial
        if nxt is None or nxt.block is not finished.block:
            self._emit(EVENT_BLOCK_END, t_us, {"block": finished.block.value})
        if nxt is None and not self._ended:
            self._ended = True
            summary = summarize(self.schedule, self.config.rt_policy)
            self._emit(
                EVENT_SESSION_END,
                t_us,
                {"rt_policy": self.config.rt_policy.value, "summary": summary_to_payload(summary)},
            )

    def summary(self) -> SessionSummary:
        if not self.complete:
            raise RuntimeError("session not complete")
        return summarize(self.schedule, self.config.rt_policy)


def summary_to_payload(summary: SessionSummary) -> dict:
    return {
        "mean_rt_congruent_ms": summary.mean_rt_congruent_ms,
        "mean_rt_incongruent_ms": summary.mean_rt_incongruent_ms,
        "stroop_delta_ms": summary.stroop_delta_ms,
        "accuracy_congruent": summary.accuracy_congruent,
        "accuracy_incongruent": summary.accuracy_incongruent,
        "n_used_congruent": summary.n_used_congruent,
        "n_used_incongruent": summary.n_used_incongruent,
    }


def summary_from_payload(payload: dict, partial: bool = False) -> SessionSummary:
    return SessionSummary(
        mean_rt_congruent_ms=payload["mean_rt_congruent_ms"],
        mean_rt_incongruent_ms=payload["mean_rt_incongruent_ms"],
        stroop_delta_ms=payload["stroop_delta_ms"],
        accuracy_congruent=payload["accuracy_congruent"],
        accuracy_incongruent=payload["accuracy_incongruent"],
        n_used_congruent=payload["n_used_congruent"],
        n_used_incongruent=payload["n_used_incongruent"],
        partial=partial,
    )
