// Version playback with gapless switching. All versions of one item share a
// media clock; a switch stops the old source and starts the new one at the
// same media position, so the listener hears a seamless content swap, never
// a restart from zero.

export interface PlayingHandle {
  stop(): void;
}

export interface PlayerBackend {
  nowMs(): number;
  // fetch + decode; repeated calls for the same url reuse the cache
  prefetch(url: string): Promise<void>;
  isBuffered(url: string): boolean;
  // start a buffered url at the given media offset; playback begins within
  // one audio render quantum
  play(url: string, fromMs: number): PlayingHandle;
}

export class VersionPlayer {
  private handle: PlayingHandle | null = null;
  private url: string | null = null; // current selection, last writer wins
  private anchorPosMs = 0; // media position at anchorWallMs
  private anchorWallMs: number;
  private running = false; // media clock advancing
  private muted = false; // selection not buffered yet

  constructor(private backend: PlayerBackend) {
    this.anchorWallMs = backend.nowMs();
  }

  positionMs(): number {
    if (!this.running) return this.anchorPosMs;
    return this.anchorPosMs + (this.backend.nowMs() - this.anchorWallMs);
  }

  // What is audible right now; null while paused-silent or muted.
  audibleUrl(): string | null {
    return this.running && !this.muted ? this.url : null;
  }

  selectedUrl(): string | null {
    return this.url;
  }

  async prefetch(urls: string[]): Promise<void> {
    await Promise.all(urls.map((u) => this.backend.prefetch(u)));
  }

  switchTo(url: string): void {
    if (url === this.url && !this.muted) return;
    this.url = url;
    this.handle?.stop();
    this.handle = null;
    if (!this.running) return; // paused: silent source swap, position kept
    if (!this.backend.isBuffered(url)) {
      // buffer underrun: brief mute, the media clock keeps advancing so the
      // position is preserved when the buffer arrives
      this.muted = true;
      return;
    }
    this.muted = false;
    this.handle = this.backend.play(url, this.positionMs());
  }

  // Re-arm playback once an underrun resolved.
  recover(): void {
    if (this.running && this.muted && this.url && this.backend.isBuffered(this.url)) {
      this.muted = false;
      this.handle = this.backend.play(this.url, this.positionMs());
    }
  }

  pause(): void {
    if (!this.running) return;
    this.anchorPosMs = this.positionMs();
    this.anchorWallMs = this.backend.nowMs();
    this.running = false;
    this.handle?.stop();
    this.handle = null;
  }

  resume(): void {
    if (this.running) return;
    this.anchorWallMs = this.backend.nowMs();
    this.running = true;
    if (this.url == null) return;
    if (this.backend.isBuffered(this.url)) {
      this.muted = false;
      this.handle = this.backend.play(this.url, this.anchorPosMs);
    } else {
      this.muted = true;
    }
  }

  // A new item restarts the timeline from zero.
  resetTo(url: string, paused: boolean): void {
    this.handle?.stop();
    this.handle = null;
    this.url = url;
    this.anchorPosMs = 0;
    this.anchorWallMs = this.backend.nowMs();
    this.running = !paused;
    this.muted = false;
    if (!this.running) return;
    if (this.backend.isBuffered(url)) this.handle = this.backend.play(url, 0);
    else this.muted = true;
  }
}
