/** Client-side playback: a small WebAudio synthesizer over parsed note
 * events.  No audio crosses the wire; everything is synthesized from the
 * ABC text the service already sent. */

import { midiToFrequency, NoteEvent } from "./abc";

export interface Player {
  play(events: NoteEvent[], onEnded: () => void): void;
  stop(): void;
  readonly playing: boolean;
}

/** Seconds per unit note length (L:1/8 at a relaxed tempo). */
export const UNIT_SECONDS = 0.22;

export class WebAudioPlayer implements Player {
  private context: AudioContext | null = null;
  private stopTimer: number | null = null;
  private gain: GainNode | null = null;
  playing = false;

  play(events: NoteEvent[], onEnded: () => void): void {
    this.stop();
    const context = (this.context ??= new AudioContext());
    void context.resume();
    const master = context.createGain();
    master.gain.value = 0.25;
    master.connect(context.destination);
    this.gain = master;

    let at = context.currentTime + 0.05;
    for (const event of events) {
      const seconds = event.duration * UNIT_SECONDS;
      if (event.midi !== null) {
        const osc = context.createOscillator();
        osc.type = "triangle";
        osc.frequency.value = midiToFrequency(event.midi);
        const env = context.createGain();
        env.gain.setValueAtTime(0, at);
        env.gain.linearRampToValueAtTime(1, at + 0.015);
        env.gain.setTargetAtTime(0, at + seconds - 0.05, 0.02);
        osc.connect(env).connect(master);
        osc.start(at);
        osc.stop(at + seconds);
      }
      at += seconds;
    }
    this.playing = true;
    const total = at - context.currentTime;
    this.stopTimer = window.setTimeout(() => {
      this.playing = false;
      onEnded();
    }, total * 1000);
  }

  stop(): void {
    if (this.stopTimer !== null) {
      window.clearTimeout(this.stopTimer);
      this.stopTimer = null;
    }
    this.gain?.disconnect();
    this.gain = null;
    this.playing = false;
  }
}
