/** Wire protocol: one JSON object per WebSocket frame. */

export type MaterialName = "rubber" | "aluminum";

export interface WireMessage {
  type: string;
  session_id: string;
  seq: number;
  body: Record<string, unknown>;
}

export interface ConfigBody {
  protocol: number;
  trials_per_condition: number;
  block_order: string;
  rt_policy: string;
  velocity_limit: number;
  materials: Record<MaterialName, { A: number; B: number; f: number }>;
  keys: Record<string, MaterialName>;
  calibration_pings: number;
}

export interface TrialStartBody {
  index: number;
  block: string;
  trial_in_block: number;
  trials_in_block: number;
}

export interface TactileSpec {
  material: MaterialName;
  A: number;
  B: number;
  f: number;
  velocity: number;
}

export interface StimulusBody {
  index: number;
  visual: MaterialName;
  tactile: TactileSpec | null;
}

export interface TrialResultBody {
  index: number;
  correct: boolean;
  rt_ms: number;
}

export interface SummaryBody {
  mean_rt_congruent_ms: number;
  mean_rt_incongruent_ms: number;
  stroop_delta_ms: number;
  accuracy_congruent: number;
  accuracy_incongruent: number;
  n_used_congruent: number;
  n_used_incongruent: number;
}

export function encode(msg: WireMessage): string {
  return JSON.stringify(msg);
}

export function decode(text: string): WireMessage {
  const obj = JSON.parse(text);
  if (typeof obj.type !== "string" || typeof obj.seq !== "number") {
    throw new Error("malformed frame");
  }
  return {
    type: obj.type,
    session_id: String(obj.session_id ?? ""),
    seq: obj.seq,
    body: obj.body ?? {},
  };
}
