/** Rating-session state machine, kept free of DOM concerns so the flow is
 * directly testable: fetch a queue of pending melodies, require playback
 * before a score can go in, submit, advance.  A failed submission keeps the
 * chosen score and flips into a retry state. */

import { PendingItem, ScoringApi } from "./api";

export const DEFAULT_SCORE = 50;
export const QUEUE_LIMIT = 20;

export type SubmitOutcome = "submitted" | "blocked" | "failed";

export class Session {
  private queue: PendingItem[] = [];
  private index = 0;
  /** Count of successful submissions this session; never decreases. */
  submitted = 0;
  score = DEFAULT_SCORE;
  playedCurrent = false;
  lastError: string | null = null;

  constructor(private readonly api: ScoringApi) {}

  async start(): Promise<void> {
    this.queue = await this.api.fetchPending(QUEUE_LIMIT);
    this.index = 0;
    this.resetItemState();
  }

  get current(): PendingItem | null {
    return this.index < this.queue.length ? this.queue[this.index] : null;
  }

  get remaining(): number {
    return Math.max(0, this.queue.length - this.index);
  }

  /** Clamp into [0, 100]; the widget can never submit outside the range. */
  setScore(value: number): void {
    if (Number.isNaN(value)) return;
    this.score = Math.min(100, Math.max(0, Math.round(value)));
  }

  markPlayed(): void {
    this.playedCurrent = true;
  }

  canSubmit(): boolean {
    return this.current !== null && this.playedCurrent;
  }

  async submit(): Promise<SubmitOutcome> {
    const item = this.current;
    if (item === null || !this.playedCurrent) {
      this.lastError = "listen to the melody before scoring it";
      return "blocked";
    }
    try {
      await this.api.submitScore(item.melody_id, this.score);
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      return "failed"; // keep score and position for retry
    }
    this.submitted += 1;
    this.advance();
    return "submitted";
  }

  /** Skip the current item without scoring (malformed melody escape hatch). */
  skip(): void {
    if (this.current !== null) {
      this.advance();
    }
  }

  private advance(): void {
    this.index += 1;
    this.resetItemState();
  }

  private resetItemState(): void {
    this.score = DEFAULT_SCORE;
    this.playedCurrent = false;
    this.lastError = null;
  }
}
