// Satisfaction ladder anchors, one label per 5 scale points (0..30).
// German is the default locale for participants; English is selectable.

export const LADDERS = {
  de: [
    'viel schlechter als',
    'schlechter als',
    'etwas schlechter als',
    'genauso wie',
    'etwas besser als',
    'besser als',
    'viel besser als',
  ],
  en: [
    'Much worse',
    'Worse',
    'Slightly worse',
    'The same as',
    'Slightly better',
    'Better',
    'Much better',
  ],
} as const;

export type Locale = keyof typeof LADDERS;

export const StringsByLocale = {
  de: {
    paused: 'Pause',
    reconnecting: 'Verbindung wird wiederhergestellt …',
    defaultVersion: 'Standard',
    adjustedVersion: 'Angepasst',
    knob: 'Drehknopf',
    assessFrame: ['Die angepasste Fassung ist', 'die Standardfassung.'],
  },
  en: {
    paused: 'Paused',
    reconnecting: 'Reconnecting …',
    defaultVersion: 'Default',
    adjustedVersion: 'Adjusted',
    knob: 'Rotary knob',
    assessFrame: ['The adjusted version is', 'the default version.'],
  },
} as const;

// Integer scale values never land halfway between anchors, so plain
// rounding picks the same rung everywhere.
export function ladderIndex(value: number): number {
  const idx = Math.round(value / 5);
  return Math.min(6, Math.max(0, idx));
}
