/** Minimal parser for the melodic ABC subset the service emits.
 *
 * Grammar per token: accidental? pitch octave-mark* duration-digit?, with
 * '^'/'_' accidentals, pitches A-G a-g and z (rest), "'" up-marks on
 * lowercase, ',' down-marks on uppercase, durations 1-4.  Bar lines and
 * whitespace separate tokens.  Used for playback scheduling; sheet layout is
 * delegated to abcjs.
 */

export interface NoteEvent {
  /** MIDI number, or null for a rest. */
  midi: number | null;
  /** Length in unit note lengths (1-4). */
  duration: number;
}

const PITCH_BASE: Record<string, number> = {
  C: 60, D: 62, E: 64, F: 65, G: 67, A: 69, B: 71,
};

const TOKEN_RE = /([_^]?)([A-Ga-gz])([',]*)(\d?)/y;

export class AbcParseError extends Error {
  constructor(readonly position: number, message: string) {
    super(message);
  }
}

export function tuneBody(abcText: string): string {
  const lines = abcText.trimEnd().split("\n");
  let keySeen = false;
  const body: string[] = [];
  for (const line of lines) {
    if (!keySeen && /^[A-Za-z]:/.test(line)) {
      if (line.startsWith("K:")) keySeen = true;
      continue;
    }
    body.push(line);
  }
  return body.join("\n");
}

export function parseBody(body: string): NoteEvent[] {
  const events: NoteEvent[] = [];
  let i = 0;
  while (i < body.length) {
    const ch = body[i];
    if (/\s/.test(ch)) {
      i += 1;
      continue;
    }
    if (ch === "|" || ch === ":" || ch === "]") {
      let j = i;
      while (j < body.length && "|:]".includes(body[j])) j += 1;
      const run = body.slice(i, j);
      if (!run.includes("|") && !/^::+$/.test(run)) {
        throw new AbcParseError(i, `stray bar punctuation at ${i}`);
      }
      i = j;
      continue;
    }
    TOKEN_RE.lastIndex = i;
    const m = TOKEN_RE.exec(body);
    if (!m) {
      throw new AbcParseError(i, `unsupported ABC at position ${i}: ${body.slice(i, i + 12)}`);
    }
    const [, accidental, pitch, marks, durDigit] = m;
    const duration = durDigit === "" ? 1 : Number(durDigit);
    if (duration < 1 || duration > 4) {
      throw new AbcParseError(i, `duration ${durDigit} outside 1..4`);
    }
    if (pitch === "z") {
      if (accidental !== "" || marks !== "") {
        throw new AbcParseError(i, "decorated rest");
      }
      events.push({ midi: null, duration });
    } else {
      const upper = pitch === pitch.toUpperCase();
      if (marks.length > 2) throw new AbcParseError(i, "too many octave marks");
      if (marks !== "" && new Set(marks).size > 1) {
        throw new AbcParseError(i, "mixed octave marks");
      }
      if (marks.startsWith("'") && upper) throw new AbcParseError(i, "' on uppercase");
      if (marks.startsWith(",") && !upper) throw new AbcParseError(i, ", on lowercase");
      let midi = PITCH_BASE[pitch.toUpperCase()] + (upper ? 0 : 12);
      if (accidental === "^") midi += 1;
      if (accidental === "_") midi -= 1;
      if (marks.length > 0) {
        midi += 12 * (marks[0] === "'" ? marks.length : -marks.length);
      }
      events.push({ midi, duration });
    }
    i = TOKEN_RE.lastIndex;
  }
  return events;
}

export function parseTune(abcText: string): NoteEvent[] {
  return parseBody(tuneBody(abcText));
}

export function midiToFrequency(midi: number): number {
  return 440 * Math.pow(2, (midi - 69) / 12);
}
