/** DOM wiring for the one-melody-at-a-time rating page. */

import { ScoringApi } from "./api";
import { Session } from "./session";
import { renderSheet } from "./sheet";
import { WebAudioPlayer } from "./player";
import { NoteEvent } from "./abc";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function boot(): void {
  const api = new ScoringApi("");
  const session = new Session(api);
  const player = new WebAudioPlayer();

  const sheet = el<HTMLDivElement>("sheet");
  const errorCard = el<HTMLDivElement>("error-card");
  const errorText = el<HTMLParagraphElement>("error-text");
  const banner = el<HTMLDivElement>("banner");
  const slider = el<HTMLInputElement>("score-slider");
  const scoreValue = el<HTMLSpanElement>("score-value");
  const playButton = el<HTMLButtonElement>("play");
  const stopButton = el<HTMLButtonElement>("stop");
  const submitButton = el<HTMLButtonElement>("submit");
  const skipButton = el<HTMLButtonElement>("skip");
  const progress = el<HTMLSpanElement>("progress");
  const doneCard = el<HTMLDivElement>("done-card");
  const rater = el<HTMLDivElement>("rater");

  let currentEvents: NoteEvent[] = [];

  function sync(): void {
    slider.value = String(session.score);
    scoreValue.textContent = String(session.score);
    submitButton.disabled = !session.canSubmit();
    submitButton.title = session.canSubmit()
      ? "" : "play the melody at least once before scoring";
    progress.textContent =
      `${session.submitted} scored, ${session.remaining} to go`;
    banner.hidden = session.lastError === null;
    banner.textContent = session.lastError ?? "";
  }

  function showCurrent(): void {
    player.stop();
    const item = session.current;
    if (item === null) {
      rater.hidden = true;
      doneCard.hidden = false;
      sync();
      return;
    }
    const result = renderSheet(sheet, item.abc_text);
    currentEvents = result.events;
    errorCard.hidden = result.ok;
    errorText.textContent = result.error ?? "";
    playButton.disabled = !result.ok;
    sync();
  }

  playButton.addEventListener("click", () => {
    player.play(currentEvents, () => sync());
    session.markPlayed();
    sync();
  });
  stopButton.addEventListener("click", () => {
    player.stop();
    sync();
  });
  slider.addEventListener("input", () => {
    session.setScore(Number(slider.value));
    sync();
  });
  submitButton.addEventListener("click", () => {
    void session.submit().then(() => showCurrent());
  });
  skipButton.addEventListener("click", () => {
    session.skip();
    showCurrent();
  });

  void session.start().then(showCurrent, (err) => {
    banner.hidden = false;
    banner.textContent = `could not load pending melodies: ${err}`;
  });
}

if (typeof document !== "undefined" && document.getElementById("rater")) {
  boot();
}
