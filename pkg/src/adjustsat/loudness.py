"""Integrated-loudness measurement and gain handling.

Implements the ITU-R BS.1770-4 integrated meter used to level every item
and version: K-weighting prefilter, 400 ms blocks with 75% overlap, the
-70 LUFS absolute gate and the -10 LU relative gate.  The K-weighting
biquads are recomputed from the standard's analog prototypes so stimuli
at 44.1 kHz (or any rate >= 8 kHz) measure correctly, not only 48 kHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

BLOCK_S = 0.400
STRIDE_S = 0.100
ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = -10.0

# Channel weights in L, R, C, Ls, Rs order; surrounds get +1.5 dB.
_CHANNEL_WEIGHTS = (1.0, 1.0, 1.0, 1.41, 1.41)

_LAYOUTS = {1: "mono", 2: "stereo", 5: "5.0"}


class TooShort(Exception):
    """Clip shorter than one 400 ms measurement block."""


class UnsupportedLayout(Exception):
    """More channels than the weighted channel set covers."""


class Unmeasurable(Exception):
    """Gain requested relative to a below-gate reading."""


@dataclass(frozen=True)
class AudioClip:
    """Multichannel PCM block: samples shaped (channels, n), full scale +-1.0."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ValueError("samples must be 1-D or (channels, n)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if self.sample_rate < 8000:
            raise ValueError(f"sample_rate {self.sample_rate} below 8000 Hz")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def channel_layout(self) -> str:
        return _LAYOUTS.get(self.n_channels, f"{self.n_channels}ch")


@dataclass(frozen=True)
class LoudnessReading:
    """Gated integrated loudness; lufs is None when no block passed the gates."""

    lufs: float | None
    gated_block_count: int

    def __post_init__(self):
        if (self.lufs is None) != (self.gated_block_count == 0):
            raise ValueError("below-gate reading must have zero gated blocks")

    @property
    def below_gate(self) -> bool:
        return self.lufs is None


@lru_cache(maxsize=None)
def k_weighting_coefficients(sample_rate: int):
    """K-weighting as two biquads (shelf then high-pass) for an arbitrary rate.

    The shelf and high-pass are rebuilt from the analog prototype
    (f0/Q/gain) behind the 48 kHz tables, via the bilinear transform with
    frequency pre-warping.
    """
    # Stage 1: high shelf, ~+4 dB boost above ~1.68 kHz.
    f0 = 1681.9744509555319
    gain_db = 3.99984385397
    q = 0.7071752369554196
    k = math.tan(math.pi * f0 / sample_rate)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh ** 0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf_b = np.array([
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
    ])
    shelf_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])

    # Stage 2: high-pass at ~38 Hz.
    f0 = 38.13547087602444
    q = 0.5003270373238773
    k = math.tan(math.pi * f0 / sample_rate)
    a0 = 1.0 + k / q + k * k
    hp_b = np.array([1.0, -2.0, 1.0])
    hp_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])
    return (shelf_b, shelf_a), (hp_b, hp_a)


def _k_weight(clip: AudioClip) -> np.ndarray:
    (b1, a1), (b2, a2) = k_weighting_coefficients(clip.sample_rate)
    y = lfilter(b1, a1, clip.samples, axis=1)
    return lfilter(b2, a2, y, axis=1)


def _block_mean_squares(x: np.ndarray, sample_rate: int) -> np.ndarray:
    """Mean square per channel over 400 ms blocks at 100 ms stride, shape (C, J)."""
    block = int(round(BLOCK_S * sample_rate))
    stride = int(round(STRIDE_S * sample_rate))
    n = x.shape[1]
    if n < block:
        raise TooShort(f"{n / sample_rate * 1000:.0f} ms < one {BLOCK_S * 1000:.0f} ms block")
    n_blocks = (n - block) // stride + 1  # final partial block discarded
    csum = np.cumsum(x * x, axis=1)
    csum = np.concatenate([np.zeros((x.shape[0], 1)), csum], axis=1)
    starts = np.arange(n_blocks) * stride
    return (csum[:, starts + block] - csum[:, starts]) / block


def integrated_loudness(clip: AudioClip) -> LoudnessReading:
    """Gated integrated loudness in LUFS; deterministic for identical input."""
    if clip.n_channels > len(_CHANNEL_WEIGHTS):
        raise UnsupportedLayout(f"{clip.n_channels} channels exceed the weighted set")
    weights = np.array(_CHANNEL_WEIGHTS[: clip.n_channels])

    z = _block_mean_squares(_k_weight(clip), clip.sample_rate)
    power = weights @ z  # (J,) weighted sums per block
    with np.errstate(divide="ignore"):
        block_loudness = -0.691 + 10.0 * np.log10(power)

    above_absolute = block_loudness > ABSOLUTE_GATE_LUFS
    if not np.any(above_absolute):
        return LoudnessReading(lufs=None, gated_block_count=0)

    mean_power = np.mean(power[above_absolute])
    relative_gate = -0.691 + 10.0 * np.log10(mean_power) + RELATIVE_GATE_LU
    gated = above_absolute & (block_loudness > relative_gate)
    if not np.any(gated):
        return LoudnessReading(lufs=None, gated_block_count=0)

    value = -0.691 + 10.0 * np.log10(np.mean(power[gated]))
    return LoudnessReading(lufs=float(value), gated_block_count=int(np.count_nonzero(gated)))


def gain_to_target(reading: LoudnessReading, target_lufs: float) -> float:
    """Gain in dB that moves a measured clip onto the target loudness."""
    if reading.below_gate:
        raise Unmeasurable("cannot compute gain relative to a below-gate reading")
    return target_lufs - reading.lufs


def apply_gain(clip: AudioClip, gain_db: float) -> AudioClip:
    """Scale every sample by 10^(gain/20).  Never clips or limits; headroom is
    the caller's concern."""
    if not math.isfinite(gain_db):
        raise ValueError("gain must be finite")
    if gain_db == 0.0:
        return clip
    return AudioClip(sample_rate=clip.sample_rate, samples=clip.samples * 10.0 ** (gain_db / 20.0))


def normalize_to_target(clip: AudioClip, target_lufs: float, *, tolerance_lu: float = 0.05,
                        max_passes: int = 3) -> tuple[AudioClip, float]:
    """Gain-normalize so the re-measured loudness lands on the target.

    One pass is almost always exact; gating can shift selection slightly, so
    re-trim until the residual is inside the tolerance.  Returns the
    normalized clip and its measured loudness.
    """
    current = clip
    reading = integrated_loudness(current)
    for _ in range(max_passes):
        if reading.below_gate:
            raise Unmeasurable("clip is below gate; no normalization target reachable")
        err = target_lufs - reading.lufs
        if abs(err) <= tolerance_lu:
            return current, reading.lufs
        current = apply_gain(current, err)
        reading = integrated_loudness(current)
    if reading.below_gate:
        raise Unmeasurable("clip is below gate; no normalization target reachable")
    return current, reading.lufs
