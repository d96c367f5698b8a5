"""Disk layout: the version cache written by prepare and the results
store written by the session service.

Cache:  <output_dir>/<item_id>/v<+offset.d>.wav  plus  <output_dir>/index.json
Results: <root>/results.csv (append-only), <root>/items.json,
         <root>/logs/<pid>-<stamp>.jsonl, plus caller-provided
         audiograms.csv / questionnaires.csv alongside.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

from ..analysis import RESULTS_HEADER, read_results_csv
from ..session import (
    Playlist,
    SessionEvent,
    TrialResult,
    decode_log,
    encode_event,
    log_header,
)
from ..stimulus import ItemSpec, offset_tag, parse_grid

RESULTS_DIR_ENV = "ADJUSTSAT_RESULTS_DIR"
INDEX_NAME = "index.json"


class CacheMissing(Exception):
    pass


class NoResults(Exception):
    pass


def default_results_dir() -> Path:
    return Path(os.environ.get(RESULTS_DIR_ENV, "results"))


def version_filename(offset_lu: float) -> str:
    return f"v{offset_tag(offset_lu)}.wav"


# --- version cache ----------------------------------------------------------

def stem_signature(path: Path) -> list:
    st = path.stat()
    return [st.st_size, st.st_mtime_ns]


def item_signature(entry, target_lufs: float) -> dict:
    """Inputs that force a re-render when they change."""
    return {
        "grid": entry.grid_spec,
        "target_lufs": target_lufs,
        "leakage_db": entry.leakage_db,
        "declared_default_ld": entry.default_ld,
        "fg": stem_signature(entry.fg_path),
        "bg": stem_signature(entry.bg_path),
    }


def load_index(cache_dir: Path) -> dict:
    index_path = Path(cache_dir) / INDEX_NAME
    if not index_path.exists():
        return {"target_lufs": None, "items": {}}
    return json.loads(index_path.read_text())


def save_index(cache_dir: Path, index: dict) -> None:
    index_path = Path(cache_dir) / INDEX_NAME
    tmp = index_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(index, sort_keys=True, indent=2) + "\n")
    tmp.replace(index_path)


def cache_entry_current(cache_dir: Path, index: dict, item_id: str, signature: dict) -> bool:
    entry = index.get("items", {}).get(item_id)
    if entry is None or entry.get("signature") != signature:
        return False
    item_dir = Path(cache_dir) / item_id
    return all((item_dir / v["file"]).exists() for v in entry["versions"].values())


def require_cache(cache_dir: Path) -> dict:
    cache_dir = Path(cache_dir)
    if not (cache_dir / INDEX_NAME).exists():
        raise CacheMissing(f"no version cache at {cache_dir}; run prepare first")
    index = load_index(cache_dir)
    if not index.get("items"):
        raise CacheMissing(f"version cache at {cache_dir} is empty; run prepare first")
    return index


def items_from_index(index: dict) -> dict[str, ItemSpec]:
    """Metadata-only ItemSpecs for session control: grids and default LDs
    come from the index, audio stays on disk."""
    out = {}
    for item_id, entry in index.get("items", {}).items():
        out[item_id] = ItemSpec(
            id=item_id,
            label=entry["label"],
            de_method=entry["de_method"],
            prod_type=entry["prod_type"],
            content_tags=frozenset(entry.get("content_tags", ())),
            stems=None,
            grid=parse_grid(entry["grid"]),
            default_ld=entry["default_ld"],
            target_loudness=index.get("target_lufs", -23.0),
            leakage_db=entry.get("leakage_db"),
        )
    return out


def cached_offsets(index: dict) -> dict[str, list[float]]:
    return {
        item_id: [float(tag) for tag in entry["versions"]]
        for item_id, entry in index.get("items", {}).items()
    }


# --- results store ----------------------------------------------------------

class ResultsStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.results_path = self.root / "results.csv"
        self.items_path = self.root / "items.json"
        self.audiograms_path = self.root / "audiograms.csv"
        self.questionnaires_path = self.root / "questionnaires.csv"
        self.logs_dir = self.root / "logs"

    def open_log(self, pid: str, playlist: Playlist) -> Path:
        self.logs_dir.mkdir(exist_ok=True)
        stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
        path = self.logs_dir / f"{pid}-{stamp}.jsonl"
        n = 1
        while path.exists():
            path = self.logs_dir / f"{pid}-{stamp}-{n}.jsonl"
            n += 1
        path.write_text(log_header(pid, playlist) + "\n")
        return path

    def append_event(self, log_path: Path, event: SessionEvent) -> None:
        # one fsync-free append per event; line granularity is the crash unit
        with open(log_path, "a") as fp:
            fp.write(encode_event(event) + "\n")

    def read_log(self, log_path) -> tuple[dict, list[SessionEvent]]:
        with open(log_path) as fp:
            return decode_log(fp)

    def append_results(self, results: list[TrialResult]) -> None:
        from ..analysis import result_csv_row

        new_file = not self.results_path.exists()
        with open(self.results_path, "a", newline="") as fp:
            if new_file:
                fp.write(RESULTS_HEADER + "\n")
            for r in results:
                fp.write(result_csv_row(r) + "\n")

    def read_results(self) -> list[TrialResult]:
        if not self.results_path.exists():
            raise NoResults(f"no results.csv in {self.root}")
        results = read_results_csv(self.results_path)
        if not results:
            raise NoResults(f"{self.results_path} has no rows")
        return results

    def merge_item_metadata(self, index: dict) -> None:
        """Keep per-item default and maximum LDs next to the results so the
        analysis step can draw its reference lines."""
        existing = {}
        if self.items_path.exists():
            existing = json.loads(self.items_path.read_text())
        for item_id, entry in index.get("items", {}).items():
            existing[item_id] = {
                "label": entry["label"],
                "de_method": entry["de_method"],
                "prod_type": entry["prod_type"],
                "default_ld": entry["default_ld"],
                "max_ld": entry.get("max_ld"),
            }
        self.items_path.write_text(json.dumps(existing, sort_keys=True, indent=2) + "\n")

    def read_item_metadata(self) -> dict:
        if not self.items_path.exists():
            return {}
        return json.loads(self.items_path.read_text())
