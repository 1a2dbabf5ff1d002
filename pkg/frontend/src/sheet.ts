/** Staff rendering via abcjs, with validation through our own subset parser
 * so malformed melodies surface as an error card instead of a crash. */

import abcjs from "abcjs";
import { AbcParseError, parseTune, NoteEvent } from "./abc";

export interface SheetResult {
  ok: boolean;
  events: NoteEvent[];
  error: string | null;
}

export function renderSheet(target: HTMLElement, abcText: string): SheetResult {
  let events: NoteEvent[];
  try {
    events = parseTune(abcText);
  } catch (err) {
    target.replaceChildren();
    const message = err instanceof AbcParseError ? err.message : String(err);
    return { ok: false, events: [], error: message };
  }
  abcjs.renderAbc(target, abcText, { responsive: "resize", add_classes: true });
  return { ok: true, events, error: null };
}
