// AudioContext-backed PlayerBackend. Decoded buffers are cached per url for
// the lifetime of the page, so once a version has been announced its later
// switches are purely local and the gap stays inside one render quantum.

import { PlayerBackend, PlayingHandle } from './player';

export function webAudioBackend(ctx: AudioContext, fetchFn: typeof fetch = fetch): PlayerBackend {
  const buffers = new Map<string, AudioBuffer>();
  const pending = new Map<string, Promise<void>>();

  return {
    nowMs: () => ctx.currentTime * 1000,

    prefetch(url: string): Promise<void> {
      if (buffers.has(url)) return Promise.resolve();
      let p = pending.get(url);
      if (!p) {
        p = fetchFn(url)
          .then((resp) => {
            if (!resp.ok) throw new Error(`${url}: HTTP ${resp.status}`);
            return resp.arrayBuffer();
          })
          .then((raw) => ctx.decodeAudioData(raw))
          .then((decoded) => {
            buffers.set(url, decoded);
          })
          .finally(() => pending.delete(url));
        pending.set(url, p);
      }
      return p;
    },

    isBuffered: (url: string) => buffers.has(url),

    play(url: string, fromMs: number): PlayingHandle {
      const buffer = buffers.get(url);
      if (!buffer) throw new Error(`${url} is not buffered`);
      const source = ctx.createBufferSource();
      source.buffer = buffer;
      source.loop = true; // items loop while the participant adjusts
      source.connect(ctx.destination);
      const offsetS = (Math.max(0, fromMs) / 1000) % buffer.duration;
      source.start(0, offsetS);
      return {
        stop() {
          try {
            source.stop();
          } catch {
            // already ended
          }
          source.disconnect();
        },
      };
    },
  };
}
