"""Shared fixtures: synthetic tone stems, playlists, and an end-to-end
manifest with the full published item order.

Tones are leveled by measure-and-trim, not by amplitude: the K-weighted
meter reads low frequencies a little differently than their dBFS level
(a 331 Hz tone at -23 dBFS amplitude measures about -23.7 LUFS), so every
fixture that cares about LUFS goes through normalize_to_target.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from adjustsat.loudness import AudioClip, normalize_to_target
from adjustsat.session import Playlist
from adjustsat.stimulus import ItemSpec, StemPair, parse_grid
from adjustsat.wavio import write_wav

WDR_GRID = "+12:1:-15;-16:2:-40"
AR_GRID = "+9.6:0.2:0;-0.8:0.8:-20"

# published defaults per source item, in LU
DEFAULT_LDS = {
    "WDR1": 11.0,
    "WDR2": 8.2,
    "WDR3": 12.1,
    "WDR4": 13.0,
    "WDR5": 11.7,
    "AR1": 4.0,
    "AR2": 1.0,
    "AR3": 6.0,
}

# scored playlist order: (item number, source label, enhancement method)
SCORED_ITEM_ORDER = [
    (1, "WDR3", "OO"),
    (2, "AR2", "OO"),
    (3, "WDR1", "DS"),
    (4, "WDR4", "OO"),
    (5, "AR3", "OO"),
    (6, "AR2", "DS"),
    (7, "WDR2", "DS"),
    (8, "WDR3", "DS"),
    (9, "WDR5", "OO"),
    (10, "AR1", "DS"),
    (11, "WDR4", "DS"),
    (12, "WDR5", "DS"),
    (13, "WDR2", "OO"),
    (14, "AR1", "OO"),
    (15, "WDR1", "OO"),
    (16, "AR3", "DS"),
]

CONTENT_TAGS = {
    "training": ("mVO", "noise"),
    "WDR1": ("fVO", "music"),
    "WDR2": ("mVO", "noise"),
    "WDR3": ("fVO", "noise"),
    "WDR4": ("mVO", "music"),
    "WDR5": ("fVO", "music"),
    "AR1": ("mVO", "music"),
    "AR2": ("fVO", "music"),
    "AR3": ("mVO", "noise"),
}


def tone(freq_hz: float, dur_s: float = 1.2, sr: int = 16000, amp: float = 0.125,
         channels: int = 1) -> AudioClip:
    t = np.arange(int(round(dur_s * sr))) / sr
    x = amp * np.sin(2 * np.pi * freq_hz * t)
    if channels > 1:
        x = np.tile(x, (channels, 1))
    return AudioClip(sr, x)


def leveled_tone(freq_hz: float, lufs: float, dur_s: float = 1.2, sr: int = 16000,
                 channels: int = 1) -> AudioClip:
    clip, _ = normalize_to_target(tone(freq_hz, dur_s, sr, 0.125, channels), lufs)
    return clip


def make_tone_stems(fg_lufs: float = -23.0, bg_lufs: float = -26.0, dur_s: float = 1.2,
                    sr: int = 16000) -> StemPair:
    """Spectrally disjoint stems: speech band at 997 Hz, background at 331 Hz."""
    return StemPair(
        fg=leveled_tone(997.0, fg_lufs, dur_s, sr),
        bg=leveled_tone(331.0, bg_lufs, dur_s, sr),
    )


@pytest.fixture(scope="session")
def tone_stems() -> StemPair:
    return make_tone_stems()


def make_item(item_id: str = "it", label: str = "L", de_method: str = "OO",
              prod_type: str = "WDR", grid_spec: str = "+2:1:-4", default_ld: float = 5.0,
              stems: StemPair | None = None, leakage_db: float | None = None) -> ItemSpec:
    if de_method == "DS" and leakage_db is None:
        leakage_db = -20.0
    return ItemSpec(
        id=item_id,
        label=label,
        de_method=de_method,
        prod_type=prod_type,
        content_tags=frozenset({"mVO"}),
        stems=stems,
        grid=parse_grid(grid_spec),
        default_ld=default_ld,
        leakage_db=leakage_db,
    )


def make_playlist(n_scored: int = 2, grid_spec: str = "+2:1:-4") -> Playlist:
    entries = [make_item("training", "TR", grid_spec=grid_spec)]
    for k in range(1, n_scored + 1):
        entries.append(make_item(f"item{k}", f"L{k}", grid_spec=grid_spec, default_ld=5.0 + k))
    return Playlist(entries=tuple(entries))


def write_e2e_manifest(root: Path, *, sr: int = 8000, dur_s: float = 0.6) -> Path:
    """Small but structurally complete manifest: the training item plus the
    sixteen scored items in published order, tone stems leveled so each
    source reproduces its published default LD."""
    stems_dir = root / "stems"
    stems_dir.mkdir(parents=True)
    sources = {"training": 11.0, **DEFAULT_LDS}
    for label, ld in sources.items():
        fg = leveled_tone(997.0, -23.0, dur_s, sr)
        bg = leveled_tone(331.0, -23.0 - ld, dur_s, sr)
        write_wav(stems_dir / f"{label.lower()}_fg.wav", fg, bits=32)
        write_wav(stems_dir / f"{label.lower()}_bg.wav", bg, bits=32)

    def item(entry_id, label, method):
        return {
            "id": entry_id,
            "label": label,
            "de_method": method,
            "prod_type": "AR" if label.startswith("AR") else "WDR",
            "content_tags": list(CONTENT_TAGS[label]),
            "fg": f"stems/{label.lower()}_fg.wav",
            "bg": f"stems/{label.lower()}_bg.wav",
            "grid": AR_GRID if label.startswith("AR") else WDR_GRID,
            "default_ld": sources[label],
        }

    items = [item("training", "training", "OO")]
    playlist = ["training"]
    for _, label, method in SCORED_ITEM_ORDER:
        entry_id = f"{label.lower()}-{method.lower()}"
        items.append(item(entry_id, label, method))
        playlist.append(entry_id)

    manifest = {
        "target_lufs": -23.0,
        "output_dir": "cache",
        "leakage_db": -20.0,
        "items": items,
        "playlist": playlist,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


@pytest.fixture(scope="session")
def e2e_workspace(tmp_path_factory) -> Path:
    """Manifest + rendered cache, shared by the service and pipeline tests."""
    from click.testing import CliRunner

    from adjustsat.harness.cli import main

    root = tmp_path_factory.mktemp("e2e")
    manifest_path = write_e2e_manifest(root)
    runner = CliRunner()
    res = runner.invoke(main, ["prepare", "--manifest", str(manifest_path)])
    assert res.exit_code == 0, res.output
    return root


# -- acceptance ledger --------------------------------------------------------
#
# Tests marked @pytest.mark.criterion("name") report one PASS/FAIL line each
# in a terminal section at the end of the run, so the release gate stays
# visible even though pytest captures stdout of passing tests.

ACCEPTANCE_RESULTS: list[tuple[str, str, float]] = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): release criterion checked by this test"
    )


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when == "call":
        report.criterion = marker.args[0]
    return report


def pytest_runtest_logreport(report):
    name = getattr(report, "criterion", None)
    if name is not None:
        outcome = "PASS" if report.passed else "FAIL"
        ACCEPTANCE_RESULTS.append((name, outcome, report.duration))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[acceptance] {name}: {outcome} ({duration:.3f}s)")
