"""Contact vibration synthesis, DAC quantization, and masking noise.

The transient rendered at stylus impact is a velocity-scaled decaying
sinusoid

    y(t) = A * v * exp(-B * t) * sin(2 * pi * f * t)

with a per-material coefficient triple (A, B, f).  The coefficient sets in
DEFAULT_MATERIALS are uncalibrated placeholders; real deployments load
measured values from a materials file (see tapstroop.storage).

Everything here is a pure function of its arguments and safe to call from
any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DAC_BITS = 12
DAC_MAX_CODE = (1 << DAC_BITS) - 1  # 4095
NATIVE_SAMPLE_RATE = 10_000.0  # Hz, same rate as the firmware loop


class Material(str, Enum):
    RUBBER = "rubber"
    ALUMINUM = "aluminum"

    @property
    def other(self) -> "Material":
        return Material.ALUMINUM if self is Material.RUBBER else Material.RUBBER


@dataclass(frozen=True)
class MaterialParams:
    """Coefficient triple controlling one material's contact transient."""

    material: Material
    amplitude_coeff: float  # A, output units per (m/s)
    decay_rate: float  # B, 1/s
    frequency: float  # f, Hz

    def __post_init__(self):
        if self.amplitude_coeff < 0:
            raise ValueError(f"amplitude_coeff must be >= 0, got {self.amplitude_coeff}")
        if self.decay_rate < 0:
            raise ValueError(f"decay_rate must be >= 0, got {self.decay_rate}")
        if self.frequency <= 0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")


# Placeholder coefficients only (rubber: fast decay, low pitch; aluminum:
# long ring, high pitch).  Not calibrated measurements.
DEFAULT_MATERIALS = {
    Material.RUBBER: MaterialParams(Material.RUBBER, amplitude_coeff=1.0, decay_rate=90.0, frequency=110.0),
    Material.ALUMINUM: MaterialParams(Material.ALUMINUM, amplitude_coeff=1.0, decay_rate=35.0, frequency=700.0),
}


@dataclass(frozen=True)
class SynthesisConfig:
    """Rendering knobs: grid rate, stopping rule, and saturation bound."""

    sample_rate: float = NATIVE_SAMPLE_RATE
    envelope_cutoff: float = 0.01  # stop once the envelope falls to this fraction
    max_duration: float = 1.0  # s, hard cap on transient length
    output_clamp: float = 1.0  # saturation bound, models the amplifier limit

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        if not 0.0 < self.envelope_cutoff < 1.0:
            raise ValueError(f"envelope_cutoff must be in (0, 1), got {self.envelope_cutoff}")
        if self.max_duration <= 0:
            raise ValueError(f"max_duration must be > 0, got {self.max_duration}")
        if self.output_clamp <= 0:
            raise ValueError(f"output_clamp must be > 0, got {self.output_clamp}")


@dataclass
class WaveformBuffer:
    """A mono waveform on a uniform sample grid, amplitudes in [-1, 1]."""

    sample_rate: float
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WaveformBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)


def synth_sample(params: MaterialParams, velocity: float, t: float) -> float:
    """Evaluate the contact transient at time t for one impact velocity.

    Returns A * v * exp(-B*t) * sin(2*pi*f*t), unclamped.
    """
    if velocity < 0:
        raise ValueError(f"velocity must be >= 0, got {velocity}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return (
        params.amplitude_coeff
        * velocity
        * math.exp(-params.decay_rate * t)
        * math.sin(2.0 * math.pi * params.frequency * t)
    )


def transient_sample_count(params: MaterialParams, config: SynthesisConfig) -> int:
    """Number of samples a rendered transient occupies.

    The transient runs until its envelope decays to envelope_cutoff of the
    initial value, T = ln(1/cutoff) / B, capped at max_duration.  B = 0
    never decays and renders to the cap.
    """
    cap = math.ceil(config.max_duration * config.sample_rate)
    if params.decay_rate == 0:
        return cap
    decay_time = math.log(1.0 / config.envelope_cutoff) / params.decay_rate
    return min(math.ceil(decay_time * config.sample_rate), cap)


def render_transient(
    params: MaterialParams, velocity: float, config: SynthesisConfig | None = None
) -> WaveformBuffer:
    """Render the full contact transient for one impact onto a sample grid.

    A zero-velocity impact carries no energy and yields an empty buffer.
    Samples are clamped to +/- output_clamp (amplifier saturation, not an
    error).
    """
    if config is None:
        config = SynthesisConfig()
    if velocity < 0:
        raise ValueError(f"velocity must be >= 0, got {velocity}")
    if params.frequency >= config.sample_rate / 2.0:
        raise ValueError(
            f"frequency {params.frequency} Hz violates Nyquist at {config.sample_rate} Hz"
        )
    if velocity == 0:
        return WaveformBuffer(config.sample_rate, np.zeros(0))

    n = transient_sample_count(params, config)
    # Per-sample evaluation keeps this bit-identical with synth_sample.
    samples = np.array(
        [synth_sample(params, velocity, k / config.sample_rate) for k in range(n)]
    )
    clamp = config.output_clamp
    np.clip(samples, -clamp, clamp, out=samples)
    return WaveformBuffer(config.sample_rate, samples)


def quantize_dac(x: float) -> int:
    """Map a normalized amplitude in [-1, 1] to a 12-bit DAC code.

    code = round((x+1)/2 * 4095), ties rounded half away from zero so
    golden files stay bit-stable (0.0 -> 2048).
    """
    if math.isnan(x) or x < -1.0 or x > 1.0:
        raise ValueError(f"amplitude out of [-1, 1]: {x}")
    scaled = (x + 1.0) / 2.0 * DAC_MAX_CODE
    # scaled >= 0, so half-away-from-zero is floor(y + 0.5)
    return int(math.floor(scaled + 0.5))


def dequantize_dac(code: int) -> float:
    """Inverse mapping of quantize_dac onto the code's center amplitude."""
    if not 0 <= code <= DAC_MAX_CODE:
        raise ValueError(f"code out of 0..{DAC_MAX_CODE}: {code}")
    return 2.0 * code / DAC_MAX_CODE - 1.0


def gen_masking_noise(
    seed: int, n: int, amplitude: float, sample_rate: float = NATIVE_SAMPLE_RATE
) -> WaveformBuffer:
    """Seeded white noise, n samples i.i.d. uniform on [-amplitude, amplitude].

    Used to mask the audible click of real contacts; deterministic per seed.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0.0 <= amplitude <= 1.0:
        raise ValueError(f"amplitude must be in [0, 1], got {amplitude}")
    rng = np.random.default_rng(seed)
    samples = rng.uniform(-amplitude, amplitude, size=n)
    return WaveformBuffer(sample_rate, samples)
