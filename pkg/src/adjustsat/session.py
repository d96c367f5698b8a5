"""Event-sourced session machine for the adjustment/satisfaction procedure.

A session walks a fixed playlist: a training item first, then the scored
items.  Each item passes through an adjustment stage (knob moves the
background offset, keys 1/2 compare default against personalized) and an
assessment stage (knob moves a 0-30 satisfaction scale).  Pushing the knob
confirms a stage.  Every transition is a pure function of (state, event),
so a recorded event log replays to bit-identical results.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Protocol

from .stimulus import ItemSpec, offset_tag

TRAINING = "Training"
ADJUST = "Adjust"
ASSESS = "Assess"
DONE = "Done"

VOLUME_SET = "VolumeSet"
KNOB_DELTA = "KnobDelta"
PRESS_KNOB = "PressKnob"
SELECT_VERSION = "SelectVersion"
PAUSE_TOGGLE = "PauseToggle"

SATISFACTION_MIN = 0
SATISFACTION_MAX = 30
SATISFACTION_NEUTRAL = 15

# Anchored at 0, 5, ..., 30; integer values round to the nearest anchor.
SATISFACTION_LABELS = {
    "en": (
        "Much worse",
        "Worse",
        "Slightly worse",
        "The same as",
        "Slightly better",
        "Better",
        "Much better",
    ),
    "de": (
        "viel schlechter als",
        "schlechter als",
        "etwas schlechter als",
        "genauso wie",
        "etwas besser als",
        "besser als",
        "viel besser als",
    ),
}

DONE_MESSAGE = {"en": "Thank you!", "de": "Vielen Dank!"}


class EmptyPlaylist(Exception):
    pass


class MissingVersions(Exception):
    pass


class VolumeChangeLocked(Exception):
    pass


class IllegalTransition(Exception):
    pass


class SessionIncomplete(Exception):
    pass


class IncompleteLog(Exception):
    pass


def satisfaction_label(value: int, locale: str = "en") -> str:
    if not SATISFACTION_MIN <= value <= SATISFACTION_MAX:
        raise ValueError(f"satisfaction {value} outside [0, 30]")
    # integer values never fall exactly between two anchors
    return SATISFACTION_LABELS[locale][round(value / 5)]


@dataclass(frozen=True)
class Playlist:
    """Fixed item order, identical for every participant.  Entry 0 is the
    training item; its trial is recorded but excluded from results."""

    entries: tuple[ItemSpec, ...]

    def __post_init__(self):
        if not self.entries:
            raise EmptyPlaylist("playlist has no entries")

    @property
    def n_scored(self) -> int:
        return len(self.entries) - 1

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for item in self.entries:
            h.update(
                f"{item.id}|{item.label}|{item.de_method}|{item.grid.spec_string()}|"
                f"{item.default_ld:.6f}\n".encode()
            )
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class SessionEvent:
    """One participant gesture.  ``t_ms`` is milliseconds since session
    start; kinds carry at most one value (level, detents, or A/B)."""

    t_ms: float
    kind: str
    value: float | str | None = None

    def to_json(self) -> dict:
        d = {"t_ms": self.t_ms, "kind": self.kind}
        if self.value is not None:
            d["value"] = self.value
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "SessionEvent":
        return cls(t_ms=float(d["t_ms"]), kind=str(d["kind"]), value=d.get("value"))


@dataclass(frozen=True)
class TrialResult:
    pid: str
    item_number: int
    item_id: str
    item_label: str
    de_method: str
    prod_type: str
    chosen_offset: float
    chosen_ld: float
    satisfaction_value: int
    satisfaction_label: str
    valid: bool

    @property
    def training(self) -> bool:
        return self.item_number == 0


@dataclass(frozen=True)
class SessionState:
    pid: str
    playlist: Playlist
    phase: str
    item_index: int
    offset_index: int
    ab_selection: str
    satisfaction: int
    playhead_ms: float
    paused: bool
    volume: float | None
    volume_locked: bool
    last_event_ms: float
    trials: tuple[TrialResult, ...]

    @property
    def item(self) -> ItemSpec:
        return self.playlist.entries[self.item_index]

    @property
    def current_offset(self) -> float:
        return self.item.grid.offsets[self.offset_index]

    @property
    def audible_offset(self) -> float:
        # A plays the default version, B the one under the knob
        return 0.0 if self.ab_selection == "A" else self.current_offset


def start_session(
    pid: str,
    playlist: Playlist,
    versions: Mapping[str, Iterable[float]] | None = None,
) -> SessionState:
    """Open a session at the training item with the default version audible.

    ``versions`` maps item id to the offsets available in the render cache;
    when given, every grid offset of every entry must be present.
    """
    if not pid:
        raise ValueError("participant id must be non-empty")
    if versions is not None:
        for item in playlist.entries:
            have = set(versions.get(item.id, ()))
            missing = [o for o in item.grid.offsets if o not in have]
            if missing:
                raise MissingVersions(
                    f"item {item.id}: {len(missing)} of {len(item.grid.offsets)} "
                    f"versions missing (first: {offset_tag(missing[0])})"
                )
    first = playlist.entries[0]
    return SessionState(
        pid=pid,
        playlist=playlist,
        phase=TRAINING,
        item_index=0,
        offset_index=first.grid.zero_index,
        ab_selection="A",
        satisfaction=SATISFACTION_NEUTRAL,
        playhead_ms=0.0,
        paused=False,
        volume=None,
        volume_locked=False,
        last_event_ms=0.0,
        trials=(),
    )


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, v))


def _record_trial(state: SessionState) -> TrialResult:
    item = state.item
    offset = state.current_offset
    return TrialResult(
        pid=state.pid,
        item_number=state.item_index,
        item_id=item.id,
        item_label=item.label,
        de_method=item.de_method,
        prod_type=item.prod_type,
        chosen_offset=offset,
        chosen_ld=round(item.default_ld - offset, 6),
        satisfaction_value=state.satisfaction,
        satisfaction_label=satisfaction_label(state.satisfaction),
        valid=state.satisfaction >= SATISFACTION_NEUTRAL,
    )


def handle_event(state: SessionState, event: SessionEvent) -> SessionState:
    """Apply one event.  Unknown-phase combinations fall through unchanged
    (recorded, no transition); contract violations raise."""
    if state.phase == DONE:
        raise IllegalTransition("session already complete")
    dt = event.t_ms - state.last_event_ms
    if dt < 0:
        raise IllegalTransition(
            f"event at {event.t_ms} ms precedes {state.last_event_ms} ms"
        )
    state = replace(
        state,
        playhead_ms=state.playhead_ms if state.paused else state.playhead_ms + dt,
        last_event_ms=event.t_ms,
    )

    if event.kind == VOLUME_SET:
        if state.volume_locked:
            raise VolumeChangeLocked("volume may be set once, before any knob input")
        return replace(state, volume=float(event.value), volume_locked=True)

    if event.kind == KNOB_DELTA:
        detents = int(round(float(event.value)))
        if state.phase in (TRAINING, ADJUST):
            # positive detents push the background up the grid (toward +12)
            idx = _clamp(state.offset_index - detents, 0, len(state.item.grid.offsets) - 1)
            return replace(state, offset_index=idx, ab_selection="B", volume_locked=True)
        if state.phase == ASSESS:
            sat = _clamp(state.satisfaction + detents, SATISFACTION_MIN, SATISFACTION_MAX)
            return replace(state, satisfaction=sat, volume_locked=True)
        return state

    if event.kind == SELECT_VERSION:
        if event.value not in ("A", "B"):
            raise IllegalTransition(f"version selector must be A or B, got {event.value!r}")
        return replace(state, ab_selection=event.value)

    if event.kind == PAUSE_TOGGLE:
        return replace(state, paused=not state.paused)

    if event.kind == PRESS_KNOB:
        if state.phase in (TRAINING, ADJUST):
            return replace(state, phase=ASSESS, satisfaction=SATISFACTION_NEUTRAL)
        trial = _record_trial(state)
        nxt = state.item_index + 1
        if nxt >= len(state.playlist.entries):
            return replace(state, phase=DONE, trials=state.trials + (trial,))
        return replace(
            state,
            phase=ADJUST,
            item_index=nxt,
            offset_index=state.playlist.entries[nxt].grid.zero_index,
            ab_selection="A",
            satisfaction=SATISFACTION_NEUTRAL,
            playhead_ms=0.0,
            trials=state.trials + (trial,),
        )

    raise IllegalTransition(f"unknown event kind {event.kind!r}")


def current_trial_view(state: SessionState, locale: str = "en") -> dict:
    """Render model for the participant screen.  Carries no LU values."""
    if state.phase == DONE:
        return {
            "phase": DONE,
            "item_counter": f"{state.playlist.n_scored} / {state.playlist.n_scored}",
            "active_version": None,
            "satisfaction_value": None,
            "satisfaction_label": None,
            "paused": False,
            "message": DONE_MESSAGE[locale],
        }
    counter = (
        TRAINING
        if state.item_index == 0
        else f"{state.item_index} / {state.playlist.n_scored}"
    )
    in_assess = state.phase == ASSESS
    return {
        "phase": state.phase,
        "item_counter": counter,
        "active_version": state.ab_selection,
        "satisfaction_value": state.satisfaction if in_assess else None,
        "satisfaction_label": satisfaction_label(state.satisfaction, locale) if in_assess else None,
        "paused": state.paused,
        "message": None,
    }


def finalize(state: SessionState) -> list[TrialResult]:
    if state.phase != DONE:
        raise SessionIncomplete(f"session is in {state.phase}, not {DONE}")
    return [t for t in state.trials if not t.training]


def replay_state(
    events: Iterable[SessionEvent],
    pid: str,
    playlist: Playlist,
    versions: Mapping[str, Iterable[float]] | None = None,
) -> SessionState:
    """Drive a fresh session through the log; stops wherever the log stops.
    The crash-recovery path: a truncated log yields the exact live state."""
    state = start_session(pid, playlist, versions)
    for event in events:
        state = handle_event(state, event)
    return state


def replay(
    events: Iterable[SessionEvent],
    pid: str,
    playlist: Playlist,
    versions: Mapping[str, Iterable[float]] | None = None,
) -> list[TrialResult]:
    state = replay_state(events, pid, playlist, versions)
    if state.phase != DONE:
        raise IncompleteLog(f"log ends in {state.phase} at item {state.item_index}")
    return finalize(state)


# --- event log encoding -----------------------------------------------------

def log_header(pid: str, playlist: Playlist) -> str:
    from . import __version__

    return json.dumps(
        {"pid": pid, "playlist_hash": playlist.content_hash(), "version": __version__},
        sort_keys=True,
    )


def encode_event(event: SessionEvent) -> str:
    return json.dumps(event.to_json(), sort_keys=True)


def decode_log(lines: Iterable[str]) -> tuple[dict, list[SessionEvent]]:
    """Parse a log: JSON header line, then one JSON event per line."""
    it = iter(line for line in lines if line.strip())
    try:
        header = json.loads(next(it))
    except StopIteration:
        raise IncompleteLog("log is empty") from None
    if not isinstance(header, dict) or "pid" not in header:
        raise IllegalTransition("log header is malformed")
    return header, [SessionEvent.from_json(json.loads(line)) for line in it]


# --- audio sink contract ----------------------------------------------------

def audible_version(state: SessionState) -> tuple[str, float] | None:
    """(item id, offset) of what should be playing, or None when Done."""
    if state.phase == DONE:
        return None
    return state.item.id, state.audible_offset


class AudioSink(Protocol):
    def play(self, version_id: str, from_ms: float) -> None: ...

    def pause(self) -> None: ...

    def resume(self) -> None: ...

    def position(self) -> float: ...


class HeadlessSink:
    """Sink against a simulated clock, for tests and scripted sessions.
    Call advance() to move time; position() follows while playing."""

    def __init__(self):
        self.clock_ms = 0.0
        self.version_id: str | None = None
        self.paused = False
        self._anchor_clock = 0.0
        self._anchor_pos = 0.0
        self.calls: list[tuple] = []

    def advance(self, dt_ms: float) -> None:
        self.clock_ms += dt_ms

    def play(self, version_id: str, from_ms: float) -> None:
        self.calls.append(("play", version_id, from_ms))
        self.version_id = version_id
        self._anchor_clock = self.clock_ms
        self._anchor_pos = from_ms

    def pause(self) -> None:
        self.calls.append(("pause",))
        self._anchor_pos = self.position()
        self._anchor_clock = self.clock_ms
        self.paused = True

    def resume(self) -> None:
        self.calls.append(("resume",))
        self._anchor_clock = self.clock_ms
        self.paused = False

    def position(self) -> float:
        if self.paused or self.version_id is None:
            return self._anchor_pos
        return self._anchor_pos + (self.clock_ms - self._anchor_clock)


def publish_to_sink(state: SessionState, sink: AudioSink, previous: SessionState | None = None) -> None:
    """Push the audible consequence of a transition to a sink: version
    switches keep the playhead, pause toggles map to pause/resume."""
    now = audible_version(state)
    before = audible_version(previous) if previous is not None else None
    if now is None:
        if before is not None:
            sink.pause()
        return
    item_id, offset = now
    if before != now:
        sink.play(f"{item_id}/v{offset_tag(offset)}", state.playhead_ms)
    if previous is None or previous.paused != state.paused:
        if state.paused:
            sink.pause()
        else:
            sink.resume()
