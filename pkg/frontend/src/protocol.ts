// Wire types for the teaching service: one live channel per session plus
// a small HTTP API. Every number shown in the UI originates here.

export type SystemName = "cartpole" | "planar";
export type DemoLabel = "positive" | "negative";
export type FusionMode = "posonly" | "negonly" | "posneg";

export type ServerMsg =
  | {
      type: "state";
      tick: number;
      t: number;
      x: number[];
      u: number[];
      in_success_region: boolean;
      recording: boolean;
      samples: number;
      dropped_frames: number;
    }
  | { type: "rollout_state"; t: number; x: number[]; u: number[]; eps: number; in_success_region: boolean }
  | { type: "recording_started"; tick: number }
  | { type: "recording_stopped"; demo_id: string; samples: number; duration: number }
  | { type: "error"; message: string };

export type ClientMsg =
  | { type: "control"; u: number[]; at_tick?: number }
  | { type: "start_recording"; at_tick?: number }
  | { type: "stop_recording"; label: DemoLabel; at_tick?: number };

export interface SessionInfo {
  id: string;
  system: SystemName;
  tick_rate: number;
  t: number;
  state: number[];
  recording: boolean;
  rollout_active: boolean;
  demos: DemoInfo[];
}

export interface DemoInfo {
  id: string;
  label: DemoLabel;
  source: string;
  duration: number;
  samples: number;
  success_time?: number;
  cleaning_m?: number;
  reach?: boolean;
}

export interface DomainInfo {
  lower: number[];
  lengths: number[];
}

export interface LearnResponse {
  task_id: string;
  mode: FusionMode;
  order: number;
  provenance: { id: string; w: number }[];
  density: number[][];
  domain: DomainInfo;
}

export interface RolloutSummary {
  task_id: string;
  duration: number;
  final_eps: number;
  cancelled: boolean;
  diverged: boolean;
  replans: number;
  success_time?: number;
  first_success?: number | null;
  cleaning_m?: number;
  collided?: boolean;
  reach?: boolean;
}

export function parseServerMsg(raw: string): ServerMsg | null {
  try {
    const msg = JSON.parse(raw);
    if (msg && typeof msg.type === "string") {
      return msg as ServerMsg;
    }
  } catch {
    // fall through: malformed frames are dropped, the channel stays up
  }
  return null;
}

export function encodeClientMsg(msg: ClientMsg): string {
  return JSON.stringify(msg);
}
