"""Offset grids, loudness-difference computation, rendering, and the
separation leakage model."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adjustsat.loudness import AudioClip, apply_gain, integrated_loudness, normalize_to_target
from adjustsat.stimulus import (
    DEFAULT_TARGET_LUFS,
    DsOrigin,
    LdGrid,
    LeakageModel,
    MalformedSpec,
    MissingDefault,
    NonMonotonic,
    StemPair,
    UnmeasurableMix,
    UnmeasurableStem,
    compute_ld,
    make_item_spec,
    max_achievable_ld,
    measured_version_ld,
    offset_tag,
    parse_grid,
    render_version,
    render_version_set,
    simulate_ds,
)

from conftest import AR_GRID, WDR_GRID, leveled_tone, tone


def expected_offsets(segments: list[tuple[str, str, str]]) -> tuple[float, ...]:
    """Exact-arithmetic expansion of descending from:step:to segments."""
    out: list[float] = []
    for start, step, stop in segments:
        a, s, b = Fraction(start), Fraction(step), Fraction(stop)
        n = int((a - b) / s)
        out.extend(float(a - i * s) for i in range(n + 1))
    return tuple(out)


class TestGridParsing:
    def test_wide_grid_expands_exactly(self):
        grid = parse_grid(WDR_GRID)
        want = expected_offsets([("12", "1", "-15"), ("-16", "2", "-40")])
        assert grid.offsets == want
        assert len(grid.offsets) == 41
        assert grid.span_lu == pytest.approx(52.0)
        assert grid.zero_index == 12
        assert grid.offsets[0] == 12.0
        assert grid.offsets[-1] == -40.0

    def test_fine_grid_expands_exactly(self):
        grid = parse_grid(AR_GRID)
        want = expected_offsets([("9.6", "0.2", "0"), ("-0.8", "0.8", "-20")])
        assert grid.offsets == want
        assert len(grid.offsets) == 74
        assert grid.span_lu == pytest.approx(29.6)
        assert grid.zero_index == 48

    def test_offsets_strictly_descending(self):
        for spec in (WDR_GRID, AR_GRID):
            off = parse_grid(spec).offsets
            assert all(a > b for a, b in zip(off, off[1:]))

    def test_single_segment(self):
        grid = parse_grid("+3:1:-3")
        assert grid.offsets == (3.0, 2.0, 1.0, 0.0, -1.0, -2.0, -3.0)
        assert grid.zero_index == 3

    def test_canonical_string_round_trips(self):
        for spec in (WDR_GRID, AR_GRID, "+3:1:-3"):
            grid = parse_grid(spec)
            again = parse_grid(grid.spec_string())
            assert again.offsets == grid.offsets
            assert again.spec_string() == grid.spec_string()

    def test_degenerate_segment_rejected(self):
        with pytest.raises(MalformedSpec, match="must exceed"):
            parse_grid("0:1:0")

    def test_step_must_divide_span(self):
        with pytest.raises(MalformedSpec):
            parse_grid("+5:0.3:-0.9")

    @pytest.mark.parametrize(
        "text",
        ["", "abc", "1:2", "+1:0:-1", "+1:-1:-3", "1:1:-1:5", "+1:1:nope", ";;"],
    )
    def test_malformed_text(self, text):
        with pytest.raises(MalformedSpec):
            parse_grid(text)

    def test_trailing_semicolons_tolerated(self):
        assert parse_grid("+2:1:-2;;").offsets == parse_grid("+2:1:-2").offsets

    def test_rising_junction_rejected(self):
        with pytest.raises(NonMonotonic):
            parse_grid("+2:1:0;+1:1:-2")

    def test_touching_junction_rejected(self):
        # second segment must start strictly below where the first ended
        with pytest.raises(NonMonotonic):
            parse_grid("+2:1:0;0:1:-2")

    def test_grid_without_zero_rejected(self):
        with pytest.raises(MissingDefault):
            parse_grid("+3:1:1")
        with pytest.raises(MissingDefault):
            parse_grid("-1:1:-3")

    @settings(max_examples=120, deadline=None)
    @given(data=st.data())
    def test_random_lattice_grids_round_trip(self, data):
        # segments on a tenth-LU lattice, chained strictly downward, then
        # shifted so one offset lands exactly on zero
        n_segments = data.draw(st.integers(1, 3))
        top = data.draw(st.integers(-100, 400))  # tenths
        raw: list[tuple[Fraction, Fraction, Fraction]] = []
        cursor = Fraction(top, 10)
        for _ in range(n_segments):
            step = Fraction(data.draw(st.integers(1, 25)), 10)
            count = data.draw(st.integers(1, 12))
            start = cursor
            stop = start - count * step
            raw.append((start, step, stop))
            gap = Fraction(data.draw(st.integers(1, 30)), 10)
            cursor = stop - gap
        all_offsets = [a - i * s for a, s, b in raw for i in range(int((a - b) / s) + 1)]
        shift = data.draw(st.sampled_from(all_offsets))
        text = ";".join(
            f"{float(a - shift):+.1f}:{float(s):.1f}:{float(b - shift):+.1f}" for a, s, b in raw
        )
        grid = parse_grid(text)
        assert grid.offsets == tuple(float(v - shift) for v in all_offsets)
        assert 0.0 in grid.offsets
        assert parse_grid(grid.spec_string()).offsets == grid.offsets


class TestOffsetTag:
    @pytest.mark.parametrize(
        "value,tag",
        [(0.0, "+0.0"), (-0.0, "+0.0"), (12.0, "+12.0"), (-40.0, "-40.0"),
         (9.6, "+9.6"), (-0.8, "-0.8"), (1.5, "+1.5")],
    )
    def test_tags(self, value, tag):
        assert offset_tag(value) == tag

    def test_unique_across_both_grids(self):
        for spec in (WDR_GRID, AR_GRID):
            offsets = parse_grid(spec).offsets
            assert len({offset_tag(v) for v in offsets}) == len(offsets)


class TestStemPair:
    def test_rate_mismatch_rejected(self):
        with pytest.raises(ValueError):
            StemPair(tone(997, sr=48000), tone(331, sr=44100))

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            StemPair(tone(997, channels=1), tone(331, channels=2))

    def test_shorter_stem_tail_padded(self):
        fg = tone(997, dur_s=1.2)
        bg = tone(331, dur_s=0.8)
        pair = StemPair(fg, bg)
        assert pair.bg.n_samples == fg.n_samples
        pad = pair.bg.samples[0, bg.n_samples:]
        assert np.all(pad == 0.0)
        assert np.array_equal(pair.bg.samples[0, : bg.n_samples], bg.samples[0])

    def test_equal_lengths_untouched(self):
        fg, bg = tone(997), tone(331)
        pair = StemPair(fg, bg)
        assert pair.fg is fg
        assert pair.bg is bg


class TestComputeLd:
    def test_is_reading_difference(self):
        fg, bg = tone(997, amp=0.2), tone(331, amp=0.05)
        ld = compute_ld(StemPair(fg, bg))
        assert ld == pytest.approx(
            integrated_loudness(fg).lufs - integrated_loudness(bg).lufs, abs=1e-12
        )

    def test_leveled_tones_give_round_difference(self):
        fg = leveled_tone(997, -23.0)
        bg = leveled_tone(330, -33.0)
        assert compute_ld(StemPair(fg, bg)) == pytest.approx(10.0, abs=0.1)

    def test_equal_dbfs_tones_show_weighting_tilt(self):
        # same electrical level, different frequencies: the weighting curve
        # reads the 330 Hz stem ~0.75 LU low, so LD exceeds the naive 10.0
        def sine_dbfs(freq, rms_dbfs, rate=48000):
            t = np.arange(2 * rate) / rate
            amp = math.sqrt(2.0) * 10 ** (rms_dbfs / 20.0)
            return AudioClip(rate, amp * np.sin(2 * math.pi * freq * t))

        ld = compute_ld(StemPair(sine_dbfs(997, -23.0), sine_dbfs(330, -33.0)))
        assert ld == pytest.approx(10.7535, abs=0.01)

    def test_silent_stem_unmeasurable(self):
        silence = AudioClip(16000, np.zeros((1, 19200)))
        with pytest.raises(UnmeasurableStem, match="bg"):
            compute_ld(StemPair(tone(997), silence))
        with pytest.raises(UnmeasurableStem, match="fg"):
            compute_ld(StemPair(silence, tone(331)))


class TestRendering:
    def setup_method(self):
        self.stems = StemPair(leveled_tone(997, -23.0), leveled_tone(331, -26.0))
        self.default_ld = compute_ld(self.stems)

    def test_version_lands_on_target(self):
        for offset in (12.0, 0.0, -40.0):
            audio, measured = render_version(self.stems, offset, -23.0)
            assert measured == pytest.approx(-23.0, abs=0.05)
            assert integrated_loudness(audio).lufs == pytest.approx(measured, abs=1e-9)

    def test_offset_moves_ld_one_for_one(self):
        grid = parse_grid(WDR_GRID)
        for offset in (grid.offsets[0], 6.0, 0.0, -15.0, grid.offsets[-1]):
            got = measured_version_ld(self.stems, offset)
            assert got == pytest.approx(self.default_ld - offset, abs=1e-6)

    def test_float_mix_keeps_headroom(self):
        # deep bg boost may push peaks past full scale; nothing may clip
        loud = StemPair(leveled_tone(997, -10.0), leveled_tone(331, -10.0))
        audio, _ = render_version(loud, 12.0, -5.0)
        assert np.max(np.abs(audio.samples)) > 1.0
        assert integrated_loudness(audio).lufs == pytest.approx(-5.0, abs=0.05)

    def test_version_set_covers_grid(self):
        grid = parse_grid("+2:1:-4")
        item = make_item_spec(
            id="x", label="X", de_method="OO", prod_type="WDR",
            stems=self.stems, grid=grid,
        )
        vs = render_version_set(item)
        assert vs.item_id == "x"
        assert tuple(vs.versions) == grid.offsets
        for offset, version in vs.versions.items():
            assert version.measured_loudness == pytest.approx(-23.0, abs=0.05)
            assert version.nominal_ld == pytest.approx(item.default_ld - offset)

    def test_metadata_only_item_refuses_render(self):
        grid = parse_grid("+1:1:-1")
        from adjustsat.stimulus import ItemSpec

        ghost = ItemSpec(
            id="g", label="G", de_method="OO", prod_type="WDR",
            content_tags=frozenset(), stems=None, grid=grid,
            default_ld=5.0, target_loudness=-23.0, leakage_db=None,
        )
        with pytest.raises(ValueError, match="metadata-only"):
            render_version_set(ghost)

    def test_silent_mix_raises_with_offset_named(self):
        # stems cancel exactly at offset 0: fg + bg == 0
        fg = tone(997, amp=0.1)
        bg = AudioClip(fg.sample_rate, -fg.samples)
        with pytest.raises(UnmeasurableMix, match=r"\+0"):
            render_version(StemPair(fg, bg), 0.0, -23.0)


class TestItemSpec:
    def test_declared_default_validated(self):
        stems = StemPair(leveled_tone(997, -23.0), leveled_tone(331, -28.0))
        item = make_item_spec(
            id="a", label="A", de_method="OO", prod_type="WDR",
            stems=stems, grid=parse_grid("+1:1:-1"), default_ld=5.0,
        )
        assert item.default_ld == 5.0
        with pytest.raises(ValueError, match="away from the measured"):
            make_item_spec(
                id="a", label="A", de_method="OO", prod_type="WDR",
                stems=stems, grid=parse_grid("+1:1:-1"), default_ld=9.0,
            )

    def test_default_computed_when_omitted(self):
        stems = StemPair(leveled_tone(997, -23.0), leveled_tone(331, -28.0))
        item = make_item_spec(
            id="a", label="A", de_method="OO", prod_type="AR", stems=stems,
            grid=parse_grid("+1:1:-1"),
        )
        assert item.default_ld == pytest.approx(5.0, abs=0.1)


class TestSimulateDs:
    def setup_method(self):
        self.clean = StemPair(leveled_tone(997, -23.0), leveled_tone(331, -26.0))

    def test_none_model_is_identity(self):
        assert simulate_ds(self.clean, None) is self.clean

    def test_estimates_are_exact_linear_mixtures(self):
        model = LeakageModel(leakage_db=-20.0)
        est = simulate_ds(self.clean, model)
        g = model.amplitude_ratio
        assert g == pytest.approx(0.1)
        assert np.array_equal(est.fg.samples, self.clean.fg.samples + g * self.clean.bg.samples)
        assert np.array_equal(est.bg.samples, self.clean.bg.samples + g * self.clean.fg.samples)
        assert est.source == DsOrigin(clean=self.clean, leakage_db=-20.0)

    def test_zero_db_leakage_collapses_estimates(self):
        est = simulate_ds(self.clean, LeakageModel(leakage_db=0.0))
        assert np.allclose(est.fg.samples, est.bg.samples)

    def test_positive_leakage_rejected(self):
        with pytest.raises(ValueError):
            LeakageModel(leakage_db=1.0)

    def test_silent_background_leaks_scaled_speech(self):
        silent = AudioClip(self.clean.bg.sample_rate, np.zeros_like(self.clean.bg.samples))
        est = simulate_ds(StemPair(self.clean.fg, silent), LeakageModel(leakage_db=-20.0))
        assert np.array_equal(est.fg.samples, self.clean.fg.samples)
        assert np.array_equal(est.bg.samples, 0.1 * self.clean.fg.samples)
        # the leaked floor sits exactly leakage_db below the speech stem
        assert compute_ld(est) == pytest.approx(20.0, abs=1e-9)


class TestCeiling:
    def setup_method(self):
        self.clean = StemPair(leveled_tone(997, -23.0), leveled_tone(331, -26.0))
        self.default_ld = compute_ld(self.clean)

    def test_clean_ceiling_is_grid_bound(self):
        grid = parse_grid(WDR_GRID)
        got = max_achievable_ld(self.clean, grid)
        assert got == pytest.approx(self.default_ld + 40.0, abs=1e-6)

    def test_ds_ceiling_matches_leakage_algebra(self):
        grid = parse_grid(WDR_GRID)
        est = simulate_ds(self.clean, LeakageModel(leakage_db=-20.0))
        got = max_achievable_ld(est, grid)
        g, gd = 0.1, 10.0 ** (-40.0 / 20.0)
        want = self.default_ld + 20.0 * math.log10((1.0 + g * gd) / (g + gd))
        assert got == pytest.approx(want, abs=1e-6)
        assert want - self.default_ld == pytest.approx(19.1812, abs=0.001)

    def test_fine_grid_ds_ceiling(self):
        grid = parse_grid(AR_GRID)
        est = simulate_ds(self.clean, LeakageModel(leakage_db=-20.0))
        got = max_achievable_ld(est, grid)
        g, gd = 0.1, 10.0 ** (-20.0 / 20.0)
        want = self.default_ld + 20.0 * math.log10((1.0 + g * gd) / (g + gd))
        assert got == pytest.approx(want, abs=1e-6)
        assert want - self.default_ld == pytest.approx(14.0658, abs=0.001)

    def test_ds_ceiling_strictly_below_clean(self):
        grid = parse_grid(WDR_GRID)
        est = simulate_ds(self.clean, LeakageModel(leakage_db=-20.0))
        assert max_achievable_ld(est, grid) < max_achievable_ld(self.clean, grid)

    def test_lighter_leakage_raises_ceiling(self):
        grid = parse_grid(WDR_GRID)
        ceilings = [
            max_achievable_ld(simulate_ds(self.clean, LeakageModel(leakage_db=db)), grid)
            for db in (-10.0, -20.0, -40.0, -80.0)
        ]
        assert ceilings == sorted(ceilings)
        # once leakage sits far below the deepest grid gain the ceiling
        # converges on the clean bound
        assert max_achievable_ld(self.clean, grid) - ceilings[-1] < 0.2


class TestTargetConstant:
    def test_default_target(self):
        assert DEFAULT_TARGET_LUFS == -23.0
