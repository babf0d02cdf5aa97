/**
 * Browser audio: continuous masking noise and optional transient playback.
 *
 * Masking noise hides the audible click of real key/pointer input, the
 * same role it plays over headphones in the physical rig.  Transient
 * playback is a stand-in for the vibrator and ships disabled: audible
 * transients would reintroduce exactly the cue the noise masks.
 */

import { TactileSpec } from "./protocol.js";

export class AudioOutput {
  private ctx: AudioContext | null = null;
  private masking: AudioBufferSourceNode | null = null;

  private ensureContext(): AudioContext | null {
    if (this.ctx === null && typeof AudioContext !== "undefined") {
      this.ctx = new AudioContext();
    }
    return this.ctx;
  }

  startMasking(amplitude = 0.2): void {
    const ctx = this.ensureContext();
    if (!ctx || this.masking) {
      return;
    }
    const seconds = 2;
    const buffer = ctx.createBuffer(1, ctx.sampleRate * seconds, ctx.sampleRate);
    const data = buffer.getChannelData(0);
    for (let i = 0; i < data.length; i++) {
      data[i] = (Math.random() * 2 - 1) * amplitude;
    }
    const source = ctx.createBufferSource();
    source.buffer = buffer;
    source.loop = true;
    source.connect(ctx.destination);
    source.start();
    this.masking = source;
  }

  stopMasking(): void {
    this.masking?.stop();
    this.masking = null;
  }

  /** Decaying sinusoid A*v*exp(-B*t)*sin(2*pi*f*t), clamped to +/-1. */
  playTransient(spec: TactileSpec, cutoff = 0.01, maxSeconds = 1.0): void {
    const ctx = this.ensureContext();
    if (!ctx) {
      return;
    }
    const seconds = spec.B > 0 ? Math.min(Math.log(1 / cutoff) / spec.B, maxSeconds) : maxSeconds;
    const n = Math.max(1, Math.ceil(seconds * ctx.sampleRate));
    const buffer = ctx.createBuffer(1, n, ctx.sampleRate);
    const data = buffer.getChannelData(0);
    for (let k = 0; k < n; k++) {
      const t = k / ctx.sampleRate;
      const y = spec.A * spec.velocity * Math.exp(-spec.B * t) * Math.sin(2 * Math.PI * spec.f * t);
      data[k] = Math.max(-1, Math.min(1, y));
    }
    const source = ctx.createBufferSource();
    source.buffer = buffer;
    source.connect(ctx.destination);
    source.start();
  }
}
