// Browser entry point: glue between socket, player, input and view.
// Session id comes from ?pid=...; locale from ?locale=de|en (German default).

import { attachInput } from './input';
import { Locale, StringsByLocale } from './labels';
import { AudioPointer, UiView } from './protocol';
import { VersionPlayer } from './player';
import { renderPhase } from './view';
import { SessionSocket } from './socket';
import { webAudioBackend } from './webaudio';

function param(name: string, fallback: string): string {
  return new URLSearchParams(location.search).get(name) ?? fallback;
}

export function boot(root: HTMLElement): void {
  const locale: Locale = param('locale', 'de') === 'en' ? 'en' : 'de';
  const pid = param('pid', '');
  const strings = StringsByLocale[locale];

  const banner = document.createElement('div');
  banner.className = 'reconnect-banner';
  banner.textContent = strings.reconnecting;
  banner.hidden = true;
  const stage = document.createElement('div');
  stage.className = 'stage';
  root.append(banner, stage);

  const ctx = new AudioContext();
  const player = new VersionPlayer(webAudioBackend(ctx));
  let lastView: UiView | null = null;
  let currentItem: string | null = null;
  const sessionStart = performance.now();

  async function applyAudio(pointer: AudioPointer): Promise<void> {
    await player.prefetch([pointer.url]);
    if (pointer.item_id !== currentItem) {
      currentItem = pointer.item_id;
      player.resetTo(pointer.url, lastView?.paused ?? false);
    } else {
      player.switchTo(pointer.url);
      player.recover();
    }
  }

  const scheme = location.protocol === 'https:' ? 'wss' : 'ws';
  const socket = new SessionSocket(`${scheme}://${location.host}/ws`, pid, {
    onView(view) {
      lastView = view;
      if (view.phase === 'Done') player.pause();
      else if (view.paused) player.pause();
      else player.resume();
      renderPhase(stage, view, { locale });
    },
    onAudio(pointer) {
      void applyAudio(pointer);
    },
    onConnection(connected) {
      banner.hidden = connected;
    },
    onRefused(reason, detail) {
      stage.textContent = `${reason}: ${detail}`;
    },
  });

  attachInput(stage, (event) => {
    // gestures while disconnected are dropped; the banner already shows
    void ctx.resume(); // user gesture unlocks autoplay the first time
    socket.sendEvent(event);
  }, () => performance.now() - sessionStart);

  socket.connect();
}

const rootEl = document.getElementById('app');
if (rootEl) boot(rootEl);
