"""Session service: one WebSocket endpoint driving the state machine, plus
HTTP delivery of the pre-rendered version audio.

Protocol.  Client sends ``{"type": "hello", "pid": ...}`` once, then
``{"type": "event", "event": {...}}`` per gesture.  Server answers every
applied event with ``{"type": "view", "view": ...}`` and, whenever the
audible version changed, ``{"type": "audio", "item_id", "offset", "url"}``
first.  Rejected events produce ``{"type": "error", ...}`` and no state
change.

Exactly one session is active at a time.  A dropped connection pauses the
session; the same participant may reconnect and resume within a grace
period, after which the session is finalized as incomplete.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from ..session import (
    DONE,
    PAUSE_TOGGLE,
    IllegalTransition,
    MissingVersions,
    Playlist,
    SessionEvent,
    SessionState,
    VolumeChangeLocked,
    audible_version,
    current_trial_view,
    finalize,
    handle_event,
    start_session,
)
from .store import (
    CacheMissing,
    ResultsStore,
    cached_offsets,
    items_from_index,
    require_cache,
    version_filename,
)

_VERSION_FILE_RE = re.compile(r"v[+-]\d+\.\d\.wav\Z")


@dataclass
class ActiveSession:
    pid: str
    state: SessionState
    log_path: Path
    connected: bool = True
    disconnected_at: float | None = None
    auto_paused: bool = False


def create_app(
    cache_dir,
    playlist_ids,
    store: ResultsStore,
    *,
    grace_s: float = 60.0,
    locale: str = "en",
    clock=time.monotonic,
    static_dir=None,
) -> FastAPI:
    cache_dir = Path(cache_dir)
    index = require_cache(cache_dir)
    items = items_from_index(index)
    missing = [i for i in playlist_ids if i not in items]
    if missing:
        raise CacheMissing(f"playlist items not in cache: {missing}")
    playlist = Playlist(entries=tuple(items[i] for i in playlist_ids))
    offsets = cached_offsets(index)

    app = FastAPI()
    app.state.active = None
    app.state.store = store
    app.state.playlist = playlist

    def audio_message(state: SessionState) -> dict | None:
        ref = audible_version(state)
        if ref is None:
            return None
        item_id, offset = ref
        return {
            "type": "audio",
            "item_id": item_id,
            "offset": offset,
            "url": f"/audio/{item_id}/{version_filename(offset)}",
        }

    def write_out(active: ActiveSession, complete: bool) -> None:
        if complete:
            results = finalize(active.state)
        else:
            results = [t for t in active.state.trials if not t.training]
        if results:
            store.append_results(results)
        store.merge_item_metadata(index)

    def log_and_apply(active: ActiveSession, event: SessionEvent) -> None:
        # transition first: an event the machine rejects never reaches the log
        active.state = handle_event(active.state, event)
        store.append_event(active.log_path, event)

    @app.get("/")
    def root():
        return PlainTextResponse("adjustsat session service\n")

    @app.get("/audio/{item_id}/{filename}")
    def audio(item_id: str, filename: str):
        # only cached item ids resolve, so "item_id" can never climb out of
        # the cache directory
        if item_id not in items or not _VERSION_FILE_RE.match(filename):
            return PlainTextResponse("bad path\n", status_code=404)
        path = cache_dir / item_id / filename
        if not path.is_file():
            return PlainTextResponse("no such version\n", status_code=404)
        return FileResponse(path, media_type="audio/wav")

    @app.websocket("/ws")
    async def ws_session(ws: WebSocket):
        await ws.accept()
        try:
            hello = await ws.receive_json()
        except WebSocketDisconnect:
            return
        if not isinstance(hello, dict) or hello.get("type") != "hello" or not hello.get("pid"):
            await ws.send_json(
                {"type": "error", "error": "BadHello", "detail": "expected {type: hello, pid}"}
            )
            await ws.close()
            return
        pid = str(hello["pid"])

        active: ActiveSession | None = app.state.active
        if active is not None and not active.connected:
            if clock() - active.disconnected_at > grace_s:
                write_out(active, complete=False)
                app.state.active = active = None
        if active is not None and (active.connected or active.pid != pid):
            await ws.send_json(
                {"type": "busy", "detail": f"a session for {active.pid} is active"}
            )
            await ws.close()
            return

        if active is None:
            try:
                state = start_session(pid, playlist, offsets)
            except (MissingVersions, ValueError) as exc:
                await ws.send_json(
                    {"type": "error", "error": type(exc).__name__, "detail": str(exc)}
                )
                await ws.close()
                return
            active = ActiveSession(pid=pid, state=state, log_path=store.open_log(pid, playlist))
            app.state.active = active
        else:
            active.connected = True
            active.disconnected_at = None
            if active.auto_paused:
                log_and_apply(active, SessionEvent(active.state.last_event_ms, PAUSE_TOGGLE))
                active.auto_paused = False

        msg = audio_message(active.state)
        if msg is not None:
            await ws.send_json(msg)
        await ws.send_json({"type": "view", "view": current_trial_view(active.state, locale)})

        try:
            while True:
                raw = await ws.receive_json()
                if not isinstance(raw, dict) or raw.get("type") != "event":
                    await ws.send_json(
                        {"type": "error", "error": "BadMessage", "detail": "expected {type: event, event}"}
                    )
                    continue
                try:
                    event = SessionEvent.from_json(raw["event"])
                except (KeyError, TypeError, ValueError) as exc:
                    await ws.send_json(
                        {"type": "error", "error": "BadEvent", "detail": str(exc)}
                    )
                    continue
                before = active.state
                try:
                    log_and_apply(active, event)
                except (VolumeChangeLocked, IllegalTransition) as exc:
                    await ws.send_json(
                        {"type": "error", "error": type(exc).__name__, "detail": str(exc)}
                    )
                    continue
                if audible_version(active.state) != audible_version(before):
                    msg = audio_message(active.state)
                    if msg is not None:
                        await ws.send_json(msg)
                await ws.send_json(
                    {"type": "view", "view": current_trial_view(active.state, locale)}
                )
                if active.state.phase == DONE and app.state.active is active:
                    write_out(active, complete=True)
                    app.state.active = None
        except WebSocketDisconnect:
            if app.state.active is active and active.connected:
                active.connected = False
                active.disconnected_at = clock()
                if not active.state.paused:
                    log_and_apply(active, SessionEvent(active.state.last_event_ms, PAUSE_TOGGLE))
                    active.auto_paused = True

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/app", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
