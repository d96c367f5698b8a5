// DOM projection of the server view. The screen is rebuilt from scratch on
// every message: it is a pure function of the last view, so reloading the
// page and re-receiving that view reproduces the identical DOM. No local
// state, and never any loudness numbers or offsets.

import { UiView } from './protocol';
import { LADDERS, Locale, StringsByLocale, ladderIndex } from './labels';

export interface ViewOptions {
  locale?: Locale;
}

// Decorative in Adjust (the offset is deliberately hidden from listeners);
// proportional in Assess so the knob mirrors the satisfaction position.
export function knobAngleDeg(view: UiView): number {
  if (view.satisfaction_value == null) return 0;
  return ((view.satisfaction_value - 15) / 15) * 135;
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}

function renderKnob(view: UiView, locale: Locale): HTMLElement {
  const knob = el('div', 'knob');
  knob.setAttribute('data-knob', '');
  knob.setAttribute('role', 'slider');
  knob.setAttribute('aria-label', StringsByLocale[locale].knob);
  knob.tabIndex = 0;
  if (view.satisfaction_value != null) {
    knob.setAttribute('aria-valuemin', '0');
    knob.setAttribute('aria-valuemax', '30');
    knob.setAttribute('aria-valuenow', String(view.satisfaction_value));
    knob.setAttribute('aria-valuetext', view.satisfaction_label ?? '');
  }
  const face = el('div', 'knob-face');
  face.style.transform = `rotate(${knobAngleDeg(view)}deg)`;
  knob.appendChild(face);
  return knob;
}

function renderVersionButtons(view: UiView, locale: Locale): HTMLElement {
  const strings = StringsByLocale[locale];
  const row = el('div', 'versions');
  for (const [version, name, key] of [
    ['A', strings.defaultVersion, '1'],
    ['B', strings.adjustedVersion, '2'],
  ] as const) {
    const button = document.createElement('button');
    button.className = 'version';
    button.setAttribute('data-version', version);
    button.setAttribute('aria-pressed', String(view.active_version === version));
    button.textContent = `${key} · ${name}`;
    row.appendChild(button);
  }
  return row;
}

function renderLadder(view: UiView, locale: Locale): HTMLElement {
  const strings = StringsByLocale[locale];
  const wrap = el('div', 'assessment');

  const frame = el('p', 'assess-frame');
  frame.setAttribute('aria-live', 'polite');
  const [before, after] = strings.assessFrame;
  const current = view.satisfaction_value == null ? '' : (view.satisfaction_label ?? '');
  frame.textContent = `${before} "${current}" ${after}`;
  wrap.appendChild(frame);

  const ladder = document.createElement('ol');
  ladder.className = 'ladder';
  const highlighted = view.satisfaction_value == null ? -1 : ladderIndex(view.satisfaction_value);
  // best on top, matching a knob turned clockwise for better
  for (let rung = 6; rung >= 0; rung--) {
    const li = document.createElement('li');
    li.textContent = LADDERS[locale][rung] ?? '';
    li.setAttribute('data-rung', String(rung));
    if (rung === highlighted) {
      li.className = 'current';
      li.setAttribute('aria-current', 'true');
    }
    ladder.appendChild(li);
  }
  wrap.appendChild(ladder);
  return wrap;
}

export function renderPhase(root: HTMLElement, view: UiView, opts: ViewOptions = {}): void {
  const locale = opts.locale ?? 'de';
  const strings = StringsByLocale[locale];
  root.textContent = '';
  const screen = el('div', `screen phase-${view.phase.toLowerCase()}`);

  const progress = el('div', 'progress');
  progress.textContent = view.item_counter;
  screen.appendChild(progress);

  if (view.phase === 'Done') {
    const done = el('p', 'done-message');
    done.textContent = view.message ?? '';
    screen.appendChild(done);
    root.appendChild(screen);
    return;
  }

  if (view.paused) {
    const badge = el('div', 'paused-badge');
    badge.textContent = strings.paused;
    screen.appendChild(badge);
  }

  screen.appendChild(renderKnob(view, locale));
  if (view.phase === 'Assess') {
    screen.appendChild(renderLadder(view, locale));
  } else {
    screen.appendChild(renderVersionButtons(view, locale));
  }
  root.appendChild(screen);
}
