// Gesture-to-event mapping. Every supported input produces exactly one
// session event; nothing here touches session state, the server decides
// what each event means.

import { SessionEventJson } from './protocol';

export type Gesture =
  | { kind: 'wheel'; deltaY: number }
  | { kind: 'knob-turn'; detents: number } // hardware dial or drag
  | { kind: 'knob-press' }
  | { kind: 'version-click'; version: 'A' | 'B' }
  | { kind: 'key'; key: string };

export function gestureToEvent(g: Gesture, tMs: number): SessionEventJson | null {
  switch (g.kind) {
    case 'wheel':
      // one notch per wheel event; up = clockwise = louder speech
      if (g.deltaY === 0) return null;
      return { t_ms: tMs, kind: 'KnobDelta', value: g.deltaY < 0 ? 1 : -1 };
    case 'knob-turn':
      if (g.detents === 0) return null;
      return { t_ms: tMs, kind: 'KnobDelta', value: g.detents };
    case 'knob-press':
      return { t_ms: tMs, kind: 'PressKnob' };
    case 'version-click':
      return { t_ms: tMs, kind: 'SelectVersion', value: g.version };
    case 'key':
      switch (g.key) {
        case '1':
          return { t_ms: tMs, kind: 'SelectVersion', value: 'A' };
        case '2':
          return { t_ms: tMs, kind: 'SelectVersion', value: 'B' };
        case ' ':
          return { t_ms: tMs, kind: 'PauseToggle' };
        case 'ArrowUp':
        case 'ArrowRight':
          return { t_ms: tMs, kind: 'KnobDelta', value: 1 };
        case 'ArrowDown':
        case 'ArrowLeft':
          return { t_ms: tMs, kind: 'KnobDelta', value: -1 };
        case 'Enter':
          return { t_ms: tMs, kind: 'PressKnob' };
        default:
          return null;
      }
  }
}

export type InputSink = (event: SessionEventJson) => void;

// Wires listeners with delegation so re-rendering the screen never detaches
// them: the knob is whatever element carries data-knob, version buttons
// carry data-version. Returns a teardown function.
export function attachInput(
  root: HTMLElement,
  sink: InputSink,
  now: () => number = () => performance.now(),
): () => void {
  const emit = (g: Gesture, domEvent?: Event) => {
    const event = gestureToEvent(g, now());
    if (event) {
      domEvent?.preventDefault();
      sink(event);
    }
  };

  const onWheel = (e: WheelEvent) => {
    if ((e.target as Element | null)?.closest('[data-knob]')) {
      emit({ kind: 'wheel', deltaY: e.deltaY }, e);
    }
  };
  const onClick = (e: MouseEvent) => {
    const target = e.target as Element | null;
    const versionButton = target?.closest('[data-version]');
    if (versionButton) {
      emit(
        { kind: 'version-click', version: versionButton.getAttribute('data-version') as 'A' | 'B' },
        e,
      );
      return;
    }
    if (target?.closest('[data-knob]')) emit({ kind: 'knob-press' });
  };
  const onKey = (e: KeyboardEvent) => {
    // Enter confirms only while the knob has focus; 1/2/space/arrows are global
    if (e.key === 'Enter' && !(e.target as Element | null)?.closest?.('[data-knob]')) return;
    emit({ kind: 'key', key: e.key }, e);
  };

  root.addEventListener('wheel', onWheel);
  root.addEventListener('click', onClick);
  document.addEventListener('keydown', onKey);
  return () => {
    root.removeEventListener('wheel', onWheel);
    root.removeEventListener('click', onClick);
    document.removeEventListener('keydown', onKey);
  };
}
