// Wire types for the session service. The client sends one hello, then one
// message per gesture; the server answers with views and audio pointers and
// owns every piece of session state.

export type Phase = 'Training' | 'Adjust' | 'Assess' | 'Done';

export interface UiView {
  phase: Phase;
  item_counter: string;
  active_version: 'A' | 'B' | null;
  satisfaction_value: number | null;
  satisfaction_label: string | null;
  paused: boolean;
  message: string | null;
}

export type EventKind =
  | 'KnobDelta'
  | 'PressKnob'
  | 'SelectVersion'
  | 'PauseToggle'
  | 'VolumeSet';

export interface SessionEventJson {
  t_ms: number;
  kind: EventKind;
  value?: number | string;
}

export interface AudioPointer {
  type: 'audio';
  item_id: string;
  offset: number;
  url: string;
}

export type ServerMessage =
  | { type: 'view'; view: UiView }
  | AudioPointer
  | { type: 'error'; error: string; detail: string }
  | { type: 'busy'; detail: string };

export function parseServerMessage(raw: string): ServerMessage | null {
  try {
    const msg = JSON.parse(raw);
    if (msg && typeof msg.type === 'string') return msg as ServerMessage;
  } catch {
    // the server only ever sends JSON; anything else is dropped
  }
  return null;
}
