// Socket client: one hello, then gestures up and server messages folded into
// callbacks. After a drop it reconnects with the same participant id so the
// server resumes the paused session inside its grace window.

import {
  AudioPointer,
  ServerMessage,
  SessionEventJson,
  UiView,
  parseServerMessage,
} from './protocol';

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export interface SessionCallbacks {
  onView(view: UiView): void;
  onAudio(pointer: AudioPointer): void;
  onConnection(connected: boolean): void;
  // busy or a fatal protocol error: the session cannot proceed
  onRefused?(reason: string, detail: string): void;
  // recoverable per-event rejection; the session continues
  onServerError?(error: string, detail: string): void;
}

// Errors after which retrying the same hello can never succeed.
const FATAL_ERRORS = new Set(['BadHello', 'MissingVersions', 'EmptyPlaylist']);

export class SessionSocket {
  private factory: (url: string) => WebSocketLike;
  private ws: WebSocketLike | null = null;
  private connected = false;
  private stopped = false;

  constructor(
    private url: string,
    private pid: string,
    private callbacks: SessionCallbacks,
    factory?: (url: string) => WebSocketLike,
    private retryMs = 1000,
  ) {
    this.factory = factory ?? ((u) => new WebSocket(u) as unknown as WebSocketLike);
  }

  connect(): void {
    this.stopped = false;
    const ws = this.factory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.connected = true;
      ws.send(JSON.stringify({ type: 'hello', pid: this.pid }));
      this.callbacks.onConnection(true);
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(ev.data);
      if (msg) this.dispatch(msg);
    };
    ws.onclose = () => {
      const wasConnected = this.connected;
      this.connected = false;
      this.ws = null;
      if (wasConnected) this.callbacks.onConnection(false);
      if (!this.stopped) setTimeout(() => this.connect(), this.retryMs);
    };
  }

  private dispatch(msg: ServerMessage): void {
    switch (msg.type) {
      case 'view':
        this.callbacks.onView(msg.view);
        break;
      case 'audio':
        this.callbacks.onAudio(msg);
        break;
      case 'busy':
        this.stopped = true;
        this.callbacks.onRefused?.('busy', msg.detail);
        break;
      case 'error':
        if (FATAL_ERRORS.has(msg.error)) {
          this.stopped = true;
          this.callbacks.onRefused?.(msg.error, msg.detail);
        } else {
          this.callbacks.onServerError?.(msg.error, msg.detail);
        }
        break;
    }
  }

  // Returns false while disconnected: the gesture is dropped and the caller
  // keeps showing the reconnect banner.
  sendEvent(event: SessionEventJson): boolean {
    if (!this.connected || !this.ws) return false;
    this.ws.send(JSON.stringify({ type: 'event', event }));
    return true;
  }

  isConnected(): boolean {
    return this.connected;
  }

  close(): void {
    this.stopped = true;
    this.ws?.close();
  }
}
