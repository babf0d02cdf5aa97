/**
 * Client-side session state machine.
 *
 * A projection of the server protocol: trial_start shows the wireframe
 * cube, a tap (space/click) asks the server for the stimulus, the
 * stimulus message swaps in the material texture and records the
 * displayed timestamp, a mapped keypress answers and reverts the cube.
 * The texture is visible only between stimulus onset and the response.
 *
 * All side effects go through injected deps, so the machine runs
 * identically in the browser, under jsdom, and in a headless test.
 */

import {
  ConfigBody,
  MaterialName,
  StimulusBody,
  SummaryBody,
  TactileSpec,
  TrialResultBody,
  TrialStartBody,
  WireMessage,
  decode,
} from "./protocol.js";

export type Phase =
  | "idle"
  | "connecting"
  | "calibrating"
  | "practice"
  | "congruent"
  | "incongruent"
  | "summary"
  | "error";

export type CubeFace = "wireframe" | MaterialName;

export interface ViewState {
  phase: Phase;
  cube: CubeFace;
  status: string;
  feedback: string;
  trialLabel: string;
  summary: SummaryBody | null;
  lastRtMs: number | null;
  earlyPresses: number;
}

export interface SessionDeps {
  nowUs(): number;
  send(msg: WireMessage): void;
  render(view: ViewState): void;
  random(): number; // uniform [0, 1), injectable for determinism
  playTransient?(spec: TactileSpec): void;
  log?(line: string): void;
}

export interface SessionOptions {
  keyMap?: Record<string, MaterialName>;
  velocityRange?: [number, number];
  tapRefractoryUs?: number;
  playTransientAudio?: boolean; // off by default: it would unmask contact sounds
}

export interface TrialTimestamps {
  index: number;
  wireframeUs: number;
  textureUs: number | null;
  respondedUs: number | null;
}

const DEFAULT_KEYS: Record<string, MaterialName> = { r: "rubber", a: "aluminum" };

export class UiSession {
  phase: Phase = "idle";
  cube: CubeFace = "wireframe";
  sessionId = "";
  summary: SummaryBody | null = null;

  earlyPresses = 0;
  strayTaps = 0;
  computedRts: number[] = [];
  serverResults: TrialResultBody[] = [];
  blockEnds: string[] = [];
  timestamps: TrialTimestamps[] = [];

  private deps: SessionDeps;
  private keyMap: Record<string, MaterialName>;
  private keyMapPinned: boolean;
  private velocityRange: [number, number];
  private tapRefractoryUs: number;
  private playAudio: boolean;

  private seq = 0;
  private trialIndex = -1;
  private trialActive = false;
  private tapSent = false;
  private lastTapUs = -Infinity;
  private stimulusShown = false;
  private stimulusDisplayedUs = 0;
  private status = "connecting";
  private feedback = "";
  private trialLabel = "";
  private lastRtMs: number | null = null;

  constructor(deps: SessionDeps, options: SessionOptions = {}) {
    this.deps = deps;
    this.keyMapPinned = options.keyMap !== undefined;
    this.keyMap = options.keyMap ?? { ...DEFAULT_KEYS };
    this.velocityRange = options.velocityRange ?? [0.3, 0.9];
    this.tapRefractoryUs = options.tapRefractoryUs ?? 50_000;
    this.playAudio = options.playTransientAudio ?? false;
  }

  get view(): ViewState {
    return {
      phase: this.phase,
      cube: this.cube,
      status: this.status,
      feedback: this.feedback,
      trialLabel: this.trialLabel,
      summary: this.summary,
      lastRtMs: this.lastRtMs,
      earlyPresses: this.earlyPresses,
    };
  }

  setKeyMap(map: Record<string, MaterialName>): void {
    this.keyMap = { ...map };
    this.keyMapPinned = true;
  }

  private sendMsg(type: string, body: Record<string, unknown>): void {
    this.seq += 1;
    this.deps.send({ type, session_id: this.sessionId, seq: this.seq, body });
  }

  private paint(): void {
    this.deps.render(this.view);
  }

  /** Call once the socket is open. */
  connected(): void {
    this.phase = "connecting";
    this.status = "connected, waiting for configuration";
    this.sendMsg("hello", { client: "web-ui" });
    this.paint();
  }

  onText(text: string): void {
    this.onMessage(decode(text));
  }

  onMessage(msg: WireMessage): void {
    switch (msg.type) {
      case "config":
        return this.onConfig(msg);
      case "ping":
        return this.onPing(msg);
      case "trial_start":
        return this.onTrialStart(msg.body as unknown as TrialStartBody);
      case "stimulus":
        return this.onStimulus(msg.body as unknown as StimulusBody);
      case "trial_result":
        return this.onTrialResult(msg.body as unknown as TrialResultBody);
      case "block_end":
        this.blockEnds.push(String(msg.body.block));
        return;
      case "session_summary":
        return this.onSummary(msg.body as unknown as SummaryBody);
      case "protocol_error":
        this.phase = "error";
        this.status = `protocol error: ${msg.body.error}`;
        this.paint();
        return;
      default:
        this.deps.log?.(`ignoring unknown server message ${msg.type}`);
    }
  }

  private onConfig(msg: WireMessage): void {
    this.sessionId = msg.session_id;
    const body = msg.body as unknown as ConfigBody;
    if (body.keys && !this.keyMapPinned) {
      this.keyMap = { ...body.keys };
    }
    this.phase = "calibrating";
    this.status = "measuring clock offset";
    this.paint();
  }

  private onPing(msg: WireMessage): void {
    this.sendMsg("pong", { ack_seq: msg.seq, client_time_us: this.deps.nowUs() });
  }

  private onTrialStart(body: TrialStartBody): void {
    this.trialIndex = body.index;
    this.trialActive = true;
    this.tapSent = false;
    this.stimulusShown = false;
    this.cube = "wireframe";
    this.phase = body.block as Phase;
    this.trialLabel = `${body.block} ${body.trial_in_block}/${body.trials_in_block}`;
    this.status = "tap the cube (space or click)";
    this.feedback = "";
    this.timestamps.push({
      index: body.index,
      wireframeUs: this.deps.nowUs(),
      textureUs: null,
      respondedUs: null,
    });
    this.paint();
  }

  /** Spacebar press or pointer tap on the cube. */
  tapInput(): void {
    const now = this.deps.nowUs();
    if (!this.trialActive || this.tapSent || this.stimulusShown) {
      this.strayTaps += 1;
      return;
    }
    if (now - this.lastTapUs < this.tapRefractoryUs) {
      this.strayTaps += 1; // double-tap bounce
      return;
    }
    const [lo, hi] = this.velocityRange;
    const velocity = lo + this.deps.random() * (hi - lo);
    this.tapSent = true;
    this.lastTapUs = now;
    this.status = "...";
    this.sendMsg("tap", { velocity, client_time_us: now });
    this.paint();
  }

  private onStimulus(body: StimulusBody): void {
    if (!this.trialActive || body.index !== this.trialIndex) {
      this.deps.log?.(`stimulus for unexpected trial ${body.index}`);
      return;
    }
    // the displayed timestamp and the texture swap happen together
    this.stimulusDisplayedUs = this.deps.nowUs();
    this.stimulusShown = true;
    this.cube = body.visual;
    const ts = this.timestamps[this.timestamps.length - 1];
    ts.textureUs = this.stimulusDisplayedUs;
    this.status = "which material do you SEE?";
    if (this.playAudio && body.tactile && this.deps.playTransient) {
      this.deps.playTransient(body.tactile);
    }
    this.paint();
  }

  /** Keyboard handler; unmapped keys are ignored. */
  keyInput(key: string): void {
    const material = this.keyMap[key.toLowerCase()];
    if (material === undefined) {
      return;
    }
    if (!this.stimulusShown) {
      this.earlyPresses += 1;
      return;
    }
    const now = this.deps.nowUs();
    const rtMs = (now - this.stimulusDisplayedUs) / 1000;
    this.computedRts.push(rtMs);
    this.lastRtMs = rtMs;
    const ts = this.timestamps[this.timestamps.length - 1];
    ts.respondedUs = now;
    // texture is visible only between stimulus onset and the response
    this.stimulusShown = false;
    this.trialActive = false;
    this.cube = "wireframe";
    this.sendMsg("response", {
      index: this.trialIndex,
      material,
      client_time_us: now,
      stimulus_displayed_us: this.stimulusDisplayedUs,
    });
    this.paint();
  }

  private onTrialResult(body: TrialResultBody): void {
    this.serverResults.push(body);
    this.feedback = body.correct
      ? `correct, ${body.rt_ms.toFixed(0)} ms`
      : `wrong, ${body.rt_ms.toFixed(0)} ms`;
    this.paint();
  }

  private onSummary(body: SummaryBody): void {
    this.summary = body;
    this.phase = "summary";
    this.cube = "wireframe";
    this.status =
      `congruent ${body.mean_rt_congruent_ms.toFixed(1)} ms, ` +
      `incongruent ${body.mean_rt_incongruent_ms.toFixed(1)} ms`;
    this.feedback = `reaction-time difference: ${body.stroop_delta_ms.toFixed(1)} ms`;
    this.paint();
  }
}
