"""Stimulus preparation: LU-stepped version sets from foreground/background
stems, and the leakage model that stands in for dialogue separation.

Offset semantics follow the adjustment convention: a positive offset
amplifies the background (loudness difference shrinks), a negative offset
attenuates it (loudness difference grows).  The achieved loudness
difference of a version is therefore ``default_ld - offset``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .loudness import (
    AudioClip,
    Unmeasurable,
    apply_gain,
    integrated_loudness,
    normalize_to_target,
)

DEFAULT_TARGET_LUFS = -23.0

DE_METHODS = ("OO", "DS")
PROD_TYPES = ("AR", "WDR")
CONTENT_TAGS = ("fVO", "mVO", "music", "noise")


class MalformedSpec(Exception):
    """Grid spec string does not parse or a segment cannot expand."""


class NonMonotonic(Exception):
    """Grid segments overlap or ascend."""


class MissingDefault(Exception):
    """Grid expansion does not contain the 0 LU default offset."""


class UnmeasurableStem(Exception):
    """A stem measured below gate; no loudness difference exists."""


class UnmeasurableMix(Exception):
    """A rendered mix measured below gate."""


def _round_lu(value: float) -> float:
    v = round(value, 6)
    return 0.0 if v == 0 else v


@dataclass(frozen=True)
class LdGrid:
    """Expanded background-offset grid: strictly descending, includes 0."""

    segments: tuple[tuple[float, float, float], ...]
    offsets: tuple[float, ...]

    def __post_init__(self):
        offs = self.offsets
        if any(b >= a for a, b in zip(offs, offs[1:])):
            raise NonMonotonic(f"offsets not strictly descending: {offs}")
        if 0.0 not in offs:
            raise MissingDefault("grid expansion does not contain the 0 LU default")

    @property
    def span_lu(self) -> float:
        return self.offsets[0] - self.offsets[-1]

    @property
    def zero_index(self) -> int:
        return self.offsets.index(0.0)

    def spec_string(self) -> str:
        """Format back to the 'from:step:to' scheme; parsing it again gives
        identical offsets."""
        return ";".join(
            f"{_fmt_signed(a)}:{_fmt_plain(s)}:{_fmt_signed(b)}" for a, s, b in self.segments
        )


def _fmt_plain(v: float) -> str:
    return f"{v:g}"


def _fmt_signed(v: float) -> str:
    return f"+{v:g}" if v > 0 else f"{v:g}"


_SEGMENT_RE = re.compile(r"^\s*([+-]?\d+(?:\.\d+)?)\s*:\s*(\d+(?:\.\d+)?)\s*:\s*([+-]?\d+(?:\.\d+)?)\s*$")


def parse_grid(spec: str) -> LdGrid:
    """Parse semicolon-separated 'from:step:to' segments into the full offset
    list, inclusive of both endpoints of each segment."""
    parts = [p for p in spec.split(";") if p.strip()]
    if not parts:
        raise MalformedSpec("empty grid spec")
    segments: list[tuple[float, float, float]] = []
    offsets: list[float] = []
    for part in parts:
        m = _SEGMENT_RE.match(part)
        if not m:
            raise MalformedSpec(f"segment {part!r} is not 'from:step:to'")
        start, step, stop = (float(m.group(i)) for i in (1, 2, 3))
        if step <= 0:
            raise MalformedSpec(f"step must be positive in {part!r}")
        if start <= stop:
            raise MalformedSpec(f"'from' must exceed 'to' in {part!r}")
        n_steps = round((start - stop) / step)
        if abs(start - n_steps * step - stop) > 1e-6:
            raise MalformedSpec(f"step {step:g} does not land on {stop:g} in {part!r}")
        segments.append((start, step, stop))
        offsets.extend(_round_lu(start - k * step) for k in range(n_steps + 1))
    return LdGrid(segments=tuple(segments), offsets=tuple(offsets))


@dataclass(frozen=True)
class LeakageModel:
    """Static broadband leakage between estimated components, in dB <= 0."""

    leakage_db: float

    def __post_init__(self):
        if not self.leakage_db <= 0:
            raise ValueError(f"leakage must be <= 0 dB, got {self.leakage_db}")

    @property
    def amplitude_ratio(self) -> float:
        return 10.0 ** (self.leakage_db / 20.0)


@dataclass(frozen=True)
class DsOrigin:
    """Ground truth behind a pair of simulated separation estimates."""

    clean: "StemPair"
    leakage_db: float


@dataclass(frozen=True)
class StemPair:
    """Speech stem plus everything-else stem, equal length and rate.

    A shorter stem is zero-padded at the tail on construction.  Pairs
    produced by :func:`simulate_ds` carry their origin so downstream
    analysis can recover the true component decomposition.
    """

    fg: AudioClip
    bg: AudioClip
    source: DsOrigin | None = None

    def __post_init__(self):
        if self.fg.sample_rate != self.bg.sample_rate:
            raise ValueError("stems must share one sample rate")
        if self.fg.n_channels != self.bg.n_channels:
            raise ValueError("stems must share one channel layout")
        n = max(self.fg.n_samples, self.bg.n_samples)
        for name in ("fg", "bg"):
            clip = getattr(self, name)
            if clip.n_samples < n:
                padded = np.zeros((clip.n_channels, n))
                padded[:, : clip.n_samples] = clip.samples
                object.__setattr__(self, name, AudioClip(clip.sample_rate, padded))


@dataclass(frozen=True)
class ItemSpec:
    """One test item: stems, offset grid, default loudness difference.

    ``stems`` may be None for metadata-only references, e.g. when driving a
    session against versions that are already rendered to disk.
    """

    id: str
    label: str
    de_method: str
    prod_type: str
    content_tags: frozenset[str]
    stems: StemPair | None
    grid: LdGrid
    default_ld: float
    target_loudness: float = DEFAULT_TARGET_LUFS
    leakage_db: float | None = None

    def __post_init__(self):
        if self.de_method not in DE_METHODS:
            raise ValueError(f"de_method must be one of {DE_METHODS}")
        if self.prod_type not in PROD_TYPES:
            raise ValueError(f"prod_type must be one of {PROD_TYPES}")
        unknown = self.content_tags - set(CONTENT_TAGS)
        if unknown:
            raise ValueError(f"unknown content tags {sorted(unknown)}")
        if self.de_method == "DS" and self.leakage_db is None:
            raise ValueError("DS items require a leakage figure")


def make_item_spec(
    *,
    id: str,
    label: str,
    de_method: str,
    prod_type: str,
    content_tags=(),
    stems: StemPair,
    grid: LdGrid,
    default_ld: float | None = None,
    target_loudness: float = DEFAULT_TARGET_LUFS,
    leakage_db: float | None = None,
) -> ItemSpec:
    """Build an ItemSpec, computing or validating the default loudness
    difference against the ingested stems (0.5 LU tolerance)."""
    measured = compute_ld(stems)
    if default_ld is None:
        default_ld = measured
    elif abs(default_ld - measured) > 0.5:
        raise ValueError(
            f"item {id}: declared default LD {default_ld:.2f} LU is "
            f"{abs(default_ld - measured):.2f} LU away from the measured {measured:.2f} LU"
        )
    return ItemSpec(
        id=id,
        label=label,
        de_method=de_method,
        prod_type=prod_type,
        content_tags=frozenset(content_tags),
        stems=stems,
        grid=grid,
        default_ld=default_ld,
        target_loudness=target_loudness,
        leakage_db=leakage_db,
    )


@dataclass(frozen=True)
class Version:
    audio: AudioClip
    measured_loudness: float
    nominal_ld: float


@dataclass(frozen=True)
class VersionSet:
    """All rendered versions of one item, keyed by grid offset."""

    item_id: str
    versions: dict[float, Version]

    def offsets(self) -> list[float]:
        return list(self.versions.keys())


def offset_tag(offset_lu: float) -> str:
    """Canonical signed one-decimal tag for an offset, used in version file
    names and wire messages: 0.0 -> '+0.0', -12 -> '-12.0'."""
    return f"{offset_lu + 0.0:+.1f}"


def compute_ld(stems: StemPair) -> float:
    """Loudness difference: integrated loudness of speech minus background."""
    fg = integrated_loudness(stems.fg)
    bg = integrated_loudness(stems.bg)
    if fg.below_gate or bg.below_gate:
        which = "fg" if fg.below_gate else "bg"
        raise UnmeasurableStem(f"{which} stem is below gate")
    return fg.lufs - bg.lufs


def render_version(stems: StemPair, offset_lu: float, target_lufs: float) -> tuple[AudioClip, float]:
    """Mix speech with the offset-gained background, then normalize the mix
    onto the target loudness.  Returns the mix and its measured loudness."""
    gain = 10.0 ** (offset_lu / 20.0)
    mix = AudioClip(stems.fg.sample_rate, stems.fg.samples + gain * stems.bg.samples)
    try:
        return normalize_to_target(mix, target_lufs)
    except Unmeasurable as exc:
        raise UnmeasurableMix(f"mix at offset {offset_lu:+g} LU is below gate") from exc


def render_version_set(item: ItemSpec) -> VersionSet:
    """Render one version per grid offset, all leveled onto the item target.

    DS items are expected to arrive with their stems already passed through
    :func:`simulate_ds`.
    """
    if item.stems is None:
        raise ValueError(f"item {item.id} is a metadata-only reference, nothing to render")
    versions: dict[float, Version] = {}
    for offset in item.grid.offsets:
        try:
            audio, measured = render_version(item.stems, offset, item.target_loudness)
        except UnmeasurableMix as exc:
            raise UnmeasurableMix(f"item {item.id}: {exc}") from exc
        versions[offset] = Version(
            audio=audio,
            measured_loudness=measured,
            nominal_ld=_round_lu(item.default_ld - offset),
        )
    return VersionSet(item_id=item.id, versions=versions)


def simulate_ds(stems: StemPair, model: LeakageModel | None) -> StemPair:
    """Stand-in for dialogue separation: each estimate keeps a broadband
    remnant of the other component at the model's leakage ratio.

    ``model=None`` disables leakage and returns the stems unchanged.
    """
    if model is None:
        return stems
    g = model.amplitude_ratio
    fg_est = AudioClip(stems.fg.sample_rate, stems.fg.samples + g * stems.bg.samples)
    bg_est = AudioClip(stems.bg.sample_rate, stems.bg.samples + g * stems.fg.samples)
    return StemPair(fg=fg_est, bg=bg_est, source=DsOrigin(clean=stems, leakage_db=model.leakage_db))


def measured_version_ld(stems: StemPair, offset_lu: float) -> float:
    """Loudness difference achieved by the version at the given offset,
    metered on the component stems with the render gains applied.  The
    normalization gain hits both components equally, so it cancels here."""
    return compute_ld(StemPair(stems.fg, apply_gain(stems.bg, offset_lu)))


def max_achievable_ld(stems_est: StemPair, grid: LdGrid) -> float:
    """Loudness-difference ceiling: the measured LD of the version at the
    grid's deepest attenuation.

    For separation estimates the rendered mix still carries background
    leaked through the speech estimate, so the speech and background
    content of that version are recovered from the estimates' origin and
    metered per component.  Clean stems reduce to the plain grid bound.
    """
    deepest = grid.offsets[-1]
    if stems_est.source is None:
        return measured_version_ld(stems_est, deepest)
    clean = stems_est.source.clean
    g = 10.0 ** (stems_est.source.leakage_db / 20.0)
    gd = 10.0 ** (deepest / 20.0)
    fg_part = AudioClip(clean.fg.sample_rate, clean.fg.samples * (1.0 + g * gd))
    bg_part = AudioClip(clean.bg.sample_rate, clean.bg.samples * (g + gd))
    return compute_ld(StemPair(fg_part, bg_part))
