"""Item manifest: JSON description of stems, grids, and playlist order.

Schema (paths resolve relative to the manifest file):

    {
      "target_lufs": -23.0,
      "output_dir": "cache",
      "leakage_db": -20.0,
      "items": [
        {"id": "wdr3-oo", "label": "WDR3", "de_method": "OO",
         "prod_type": "WDR", "content_tags": ["fVO", "music"],
         "fg": "stems/wdr3_fg.wav", "bg": "stems/wdr3_bg.wav",
         "grid": "+12:1:-15;-16:2:-40", "default_ld": 12.1}
      ],
      "playlist": ["training", "wdr3-oo", "..."]
    }

``default_ld`` may be omitted (it is then measured from the stems), and a
per-item ``leakage_db`` overrides the manifest-wide default for DS items.
The first playlist entry is the training item.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..stimulus import (
    CONTENT_TAGS,
    DEFAULT_TARGET_LUFS,
    DE_METHODS,
    PROD_TYPES,
    ItemSpec,
    LdGrid,
    LeakageModel,
    MalformedSpec,
    MissingDefault,
    NonMonotonic,
    StemPair,
    compute_ld,
    parse_grid,
    simulate_ds,
)
from ..wavio import UnreadableFile, read_wav

DEFAULT_LEAKAGE_DB = -20.0


class ManifestError(Exception):
    pass


@dataclass(frozen=True)
class ManifestItem:
    id: str
    label: str
    de_method: str
    prod_type: str
    content_tags: tuple[str, ...]
    fg_path: Path
    bg_path: Path
    grid_spec: str
    grid: LdGrid
    default_ld: float | None
    leakage_db: float | None


@dataclass(frozen=True)
class Manifest:
    path: Path
    target_lufs: float
    output_dir: Path
    items: tuple[ManifestItem, ...]
    playlist: tuple[str, ...]

    def item(self, item_id: str) -> ManifestItem:
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(item_id)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ManifestError(message)


def load_manifest(path) -> Manifest:
    path = Path(path).resolve()
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    _require(isinstance(data, dict), "manifest root must be an object")

    base = path.parent
    target = float(data.get("target_lufs", DEFAULT_TARGET_LUFS))
    out_dir = base / data.get("output_dir", "cache")
    shared_leakage = data.get("leakage_db", DEFAULT_LEAKAGE_DB)

    raw_items = data.get("items")
    _require(isinstance(raw_items, list) and raw_items, "manifest declares no items")
    items = []
    seen = set()
    for raw in raw_items:
        item_id = raw.get("id")
        _require(bool(item_id), "every item needs an id")
        _require(item_id not in seen, f"duplicate item id {item_id!r}")
        seen.add(item_id)
        method = raw.get("de_method")
        _require(method in DE_METHODS, f"item {item_id}: de_method must be one of {DE_METHODS}")
        prod = raw.get("prod_type")
        _require(prod in PROD_TYPES, f"item {item_id}: prod_type must be one of {PROD_TYPES}")
        tags = tuple(raw.get("content_tags", ()))
        bad = set(tags) - set(CONTENT_TAGS)
        _require(not bad, f"item {item_id}: unknown content tags {sorted(bad)}")
        for key in ("fg", "bg", "grid"):
            _require(key in raw, f"item {item_id}: missing field {key!r}")
        try:
            grid = parse_grid(raw["grid"])
        except (MalformedSpec, NonMonotonic, MissingDefault) as exc:
            raise ManifestError(f"item {item_id}: bad grid: {exc}") from exc
        leakage = raw.get("leakage_db", shared_leakage if method == "DS" else None)
        _require(
            method != "DS" or leakage is not None,
            f"item {item_id}: DS items need leakage_db",
        )
        default_ld = raw.get("default_ld")
        items.append(
            ManifestItem(
                id=item_id,
                label=raw.get("label", item_id),
                de_method=method,
                prod_type=prod,
                content_tags=tags,
                fg_path=base / raw["fg"],
                bg_path=base / raw["bg"],
                grid_spec=raw["grid"],
                grid=grid,
                default_ld=None if default_ld is None else float(default_ld),
                leakage_db=None if leakage is None else float(leakage),
            )
        )

    playlist = tuple(data.get("playlist", ()))
    _require(bool(playlist), "manifest declares no playlist")
    for entry_id in playlist:
        _require(entry_id in seen, f"playlist references undeclared item {entry_id!r}")
    return Manifest(
        path=path,
        target_lufs=target,
        output_dir=out_dir,
        items=tuple(items),
        playlist=playlist,
    )


def realize_item(entry: ManifestItem, target_lufs: float) -> ItemSpec:
    """Load stems and build the full ItemSpec.  The declared default LD is
    checked against the clean stems (0.5 LU tolerance); DS items then get
    their stems replaced by leakage-model estimates while keeping the clean
    default LD, which is the true LD of the unmodified mix."""
    try:
        clean = StemPair(read_wav(entry.fg_path), read_wav(entry.bg_path))
    except (UnreadableFile, ValueError) as exc:
        raise ManifestError(f"item {entry.id}: {exc}") from exc
    measured = compute_ld(clean)
    default_ld = entry.default_ld
    if default_ld is None:
        default_ld = measured
    elif abs(default_ld - measured) > 0.5:
        raise ManifestError(
            f"item {entry.id}: declared default LD {default_ld:.2f} LU is "
            f"{abs(default_ld - measured):.2f} LU away from the measured {measured:.2f} LU"
        )
    stems = clean
    if entry.de_method == "DS":
        stems = simulate_ds(clean, LeakageModel(entry.leakage_db))
    return ItemSpec(
        id=entry.id,
        label=entry.label,
        de_method=entry.de_method,
        prod_type=entry.prod_type,
        content_tags=frozenset(entry.content_tags),
        stems=stems,
        grid=entry.grid,
        default_ld=default_ld,
        target_loudness=target_lufs,
        leakage_db=entry.leakage_db,
    )
