"""CLI, manifest handling, version cache, results store, and the session
service.  The service module is imported lazily (FastAPI dependency)."""

from .manifest import Manifest, ManifestError, ManifestItem, load_manifest, realize_item
from .store import (
    CacheMissing,
    NoResults,
    ResultsStore,
    cached_offsets,
    default_results_dir,
    items_from_index,
    load_index,
    require_cache,
    version_filename,
)

__all__ = [
    "Manifest",
    "ManifestError",
    "ManifestItem",
    "load_manifest",
    "realize_item",
    "CacheMissing",
    "NoResults",
    "ResultsStore",
    "cached_offsets",
    "default_results_dir",
    "items_from_index",
    "load_index",
    "require_cache",
    "version_filename",
]
