"""Fixed-timestep stylus firmware simulation.

A 10 kHz loop samples a quadrature encoder driven by an angle trajectory,
detects the stylus tip crossing the cube face, and stamps each contact
with a velocity estimated from the recent count history.  The physical
encoder is 2000 P/R; x4 decoding gives 8000 counts per revolution.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PULSES_PER_REV = 2000
COUNTS_PER_REV = 4 * PULSES_PER_REV  # x4 quadrature decode

# AB phase states in forward rotation order (Gray sequence).
AB_SEQUENCE = (0b00, 0b01, 0b11, 0b10)
_AB_INDEX = {state: i for i, state in enumerate(AB_SEQUENCE)}


class InvalidTransition(ValueError):
    """Two-bit phase jump: the sampler missed at least one edge."""


class InsufficientHistory(ValueError):
    """Not enough count samples to estimate a velocity."""


def decode_quadrature(prev_ab: int, next_ab: int) -> int:
    """Decode one sampled AB phase transition to a count delta.

    Forward step along the Gray sequence -> +1, backward -> -1, unchanged
    -> 0.  An opposite-phase jump (e.g. 00 -> 11) is ambiguous and raises
    InvalidTransition.
    """
    try:
        prev_i = _AB_INDEX[prev_ab]
        next_i = _AB_INDEX[next_ab]
    except KeyError as exc:
        raise ValueError(f"not a 2-bit quadrature state: {exc}") from exc
    step = (next_i - prev_i) % 4
    if step == 0:
        return 0
    if step == 1:
        return 1
    if step == 3:
        return -1
    raise InvalidTransition(f"{prev_ab:02b} -> {next_ab:02b} skips a state")


@dataclass(frozen=True)
class StylusGeometry:
    """Pivot-to-tip arm length and the tip angle at which the cube face sits."""

    arm_length: float = 0.10  # m
    contact_angle: float = 0.0  # rad, crossing upward = approach

    def __post_init__(self):
        if self.arm_length <= 0:
            raise ValueError(f"arm_length must be > 0, got {self.arm_length}")


@dataclass(frozen=True)
class ContactEvent:
    """One stylus-cube impact with its estimated tip velocity."""

    timestamp_us: int
    velocity: float  # m/s, linear tip speed
    tick_index: int

    def __post_init__(self):
        if self.velocity < 0:
            raise ValueError(f"velocity must be >= 0, got {self.velocity}")


def estimate_velocity(
    counts,
    geometry: StylusGeometry,
    sample_rate: float,
    counts_per_rev: int = COUNTS_PER_REV,
) -> float:
    """Linear tip speed from a window of per-tick encoder counts.

    Angular rate is the endpoint count difference over the window's elapsed
    time (len-1 tick intervals); tip speed is that times arm length.  Never
    negative.
    """
    if len(counts) < 2:
        raise InsufficientHistory(f"need >= 2 count samples, got {len(counts)}")
    delta = counts[-1] - counts[0]
    elapsed = (len(counts) - 1) / sample_rate
    omega = abs(delta) / counts_per_rev * 2.0 * math.pi / elapsed
    return omega * geometry.arm_length


class QuadratureEncoder:
    """Encoder disc plus x4 decoder, driven by an absolute angle.

    Each sample advances the AB phase one elementary transition at a time
    through the decode table, so the count always tracks the disc exactly.
    When the angle moved two or more counts within one sample period a pure
    10 kHz AB sampler would have seen an ambiguous jump; that is recorded
    in missed_samples as a diagnostic, not a fault.
    """

    def __init__(self, counts_per_rev: int = COUNTS_PER_REV, initial_angle: float = 0.0):
        self.counts_per_rev = counts_per_rev
        self.count_angle = 2.0 * math.pi / counts_per_rev
        self.count = self._angle_to_count(initial_angle)
        self.missed_samples = 0

    def _angle_to_count(self, angle: float) -> int:
        return math.floor(angle / self.count_angle)

    @property
    def phase(self) -> int:
        return AB_SEQUENCE[self.count % 4]

    def sample(self, angle: float) -> int:
        """Advance to the disc position for `angle`; returns the new count."""
        target = self._angle_to_count(angle)
        if abs(target - self.count) >= 2:
            self.missed_samples += 1
        step = 1 if target > self.count else -1
        while self.count != target:
            prev = AB_SEQUENCE[self.count % 4]
            nxt = AB_SEQUENCE[(self.count + step) % 4]
            self.count += decode_quadrature(prev, nxt)
        return self.count


@dataclass
class Trajectory:
    """Piecewise-linear angle trajectory, rows of (t_us, angle_rad).

    Values beyond the first/last row hold at the end angles.
    """

    times_us: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        self.times_us = np.asarray(self.times_us, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if len(self.times_us) != len(self.angles):
            raise ValueError("times and angles must have equal length")
        if len(self.times_us) == 0:
            raise ValueError("trajectory needs at least one row")
        if np.any(np.diff(self.times_us) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @classmethod
    def from_points(cls, points) -> "Trajectory":
        times, angles = zip(*points)
        return cls(np.array(times, dtype=np.float64), np.array(angles, dtype=np.float64))

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        times, angles = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for row_no, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                if row[0].strip().lower() == "t_us":  # optional header
                    continue
                if len(row) < 2:
                    raise ValueError(f"{path}:{row_no}: expected t_us,angle_rad")
                times.append(float(row[0]))
                angles.append(float(row[1]))
        return cls(np.array(times), np.array(angles))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_us", "angle_rad"])
            for t, a in zip(self.times_us, self.angles):
                writer.writerow([f"{t:.1f}", repr(float(a))])

    @property
    def duration_us(self) -> float:
        return float(self.times_us[-1])

    def angle_at(self, t_us: float) -> float:
        return float(np.interp(t_us, self.times_us, self.angles))


class StylusSimulator:
    """Steps the firmware loop over an angle trajectory and emits contacts.

    Contact fires at the first tick where the encoder-measured angle
    crosses the contact angle from below (the approach direction).  After
    a contact the detector re-arms only once the tip retreats past a
    2-count hysteresis band, and never fires again within the refractory
    period.
    """

    def __init__(
        self,
        geometry: StylusGeometry | None = None,
        sample_rate: float = 10_000.0,
        window_ticks: int = 10,
        refractory_us: int = 50_000,
        hysteresis_counts: int = 2,
        counts_per_rev: int = COUNTS_PER_REV,
        initial_angle: float | None = None,
    ):
        self.geometry = geometry or StylusGeometry()
        self.sample_rate = sample_rate
        self.tick_us = round(1_000_000 / sample_rate)
        self.window_ticks = window_ticks
        self.refractory_us = refractory_us
        self.hysteresis_counts = hysteresis_counts
        start_angle = self.geometry.contact_angle - 1.0 if initial_angle is None else initial_angle
        self.encoder = QuadratureEncoder(counts_per_rev, start_angle)
        self.threshold_count = math.ceil(
            self.geometry.contact_angle / self.encoder.count_angle
        )
        # window spans window_ticks tick intervals -> window_ticks+1 samples
        self.window: deque[int] = deque(maxlen=window_ticks + 1)
        self.window.append(self.encoder.count)
        self.tick = -1
        self.armed = True
        self.last_event_us: int | None = None
        self.events: list[ContactEvent] = []

    @property
    def time_us(self) -> int:
        return self.tick * self.tick_us

    def step(self, angle: float) -> ContactEvent | None:
        """Advance one 100 us tick with the tip at `angle`."""
        self.tick += 1
        t_us = self.time_us
        prev_count = self.encoder.count
        count = self.encoder.sample(angle)
        self.window.append(count)

        if not self.armed and count <= self.threshold_count - self.hysteresis_counts:
            self.armed = True

        crossed = prev_count < self.threshold_count <= count
        if crossed and self.armed:
            in_refractory = (
                self.last_event_us is not None
                and t_us - self.last_event_us < self.refractory_us
            )
            if not in_refractory:
                velocity = (
                    estimate_velocity(self.window, self.geometry, self.sample_rate, self.encoder.counts_per_rev)
                    if len(self.window) >= 2
                    else 0.0
                )
                event = ContactEvent(timestamp_us=t_us, velocity=velocity, tick_index=self.tick)
                self.events.append(event)
                self.last_event_us = t_us
                self.armed = False
                return event
        return None

    def run_trajectory(self, trajectory: Trajectory) -> list[ContactEvent]:
        """Step through every tick the trajectory covers; returns new events.

        Trajectory time is local (row 0 plays at the next tick).
        """
        start = len(self.events)
        n_ticks = int(trajectory.duration_us // self.tick_us) + 1
        for k in range(n_ticks):
            self.step(trajectory.angle_at(k * self.tick_us))
        return self.events[start:]

    def park(self, angle: float, until_us: int) -> None:
        """Fast-forward the clock with the tip held still at `angle`.

        Only legal while parked clear of the hysteresis band: no event can
        occur, so skipping ticks is equivalent to stepping them.
        """
        count = self.encoder.sample(angle)
        if count > self.threshold_count - self.hysteresis_counts:
            raise ValueError("park angle must sit below the re-arm band")
        if until_us <= self.time_us:
            raise ValueError("park target must be in the future")
        self.tick = until_us // self.tick_us
        self.window.clear()
        for _ in range(self.window.maxlen):
            self.window.append(count)
        self.armed = True
