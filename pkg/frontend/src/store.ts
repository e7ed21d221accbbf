// Single UI store updated exclusively by server messages. The UI renders
// what the store holds and never computes derived physics numbers itself.

import {
  DemoInfo,
  DomainInfo,
  FusionMode,
  LearnResponse,
  RolloutSummary,
  ServerMsg,
  SessionInfo,
  SystemName,
} from "./protocol.js";

export interface TracePoint {
  x: number;
  y: number;
  success: boolean;
}

export interface ScatterPoint {
  x: number;
  y: number;
  label: "positive" | "negative";
}

export interface UiStore {
  connection: "connecting" | "open" | "closed";
  session: SessionInfo | null;
  system: SystemName | null;
  simTime: number;
  simState: number[];
  inSuccessRegion: boolean;
  recording: boolean;
  sampleCount: number;
  droppedFrames: number;
  demos: DemoInfo[];
  lastError: string;
  taskId: string | null;
  taskMode: FusionMode | null;
  density: number[][] | null;
  densityDomain: DomainInfo | null;
  demoScatter: ScatterPoint[];
  rolloutTrace: TracePoint[];
  rolloutEps: number | null;
  rolloutRunning: boolean;
  summary: RolloutSummary | null;
  successTimeline: { t: number; success: boolean }[];
}

export function createStore(): UiStore {
  return {
    connection: "connecting",
    session: null,
    system: null,
    simTime: 0,
    simState: [],
    inSuccessRegion: false,
    recording: false,
    sampleCount: 0,
    droppedFrames: 0,
    demos: [],
    lastError: "",
    taskId: null,
    taskMode: null,
    density: null,
    densityDomain: null,
    demoScatter: [],
    rolloutTrace: [],
    rolloutEps: null,
    rolloutRunning: false,
    summary: null,
    successTimeline: [],
  };
}

const TRACE_LIMIT = 4000;

export function setSession(store: UiStore, info: SessionInfo): void {
  store.session = info;
  store.system = info.system;
  store.simState = info.state.slice();
  store.demos = info.demos.slice();
}

export function applyServerMsg(store: UiStore, msg: ServerMsg): void {
  switch (msg.type) {
    case "state":
      store.simTime = msg.t;
      store.simState = msg.x;
      store.inSuccessRegion = msg.in_success_region;
      store.recording = msg.recording;
      store.sampleCount = msg.samples;
      store.droppedFrames = msg.dropped_frames;
      break;
    case "rollout_state": {
      store.rolloutRunning = true;
      store.rolloutEps = msg.eps;
      const point = tracePoint(store.system, msg.x, msg.in_success_region);
      store.rolloutTrace.push(point);
      if (store.rolloutTrace.length > TRACE_LIMIT) {
        store.rolloutTrace.shift();
      }
      store.successTimeline.push({ t: msg.t, success: msg.in_success_region });
      break;
    }
    case "recording_started":
      store.recording = true;
      store.sampleCount = 0;
      break;
    case "recording_stopped":
      store.recording = false;
      break;
    case "error":
      store.lastError = msg.message;
      break;
  }
}

function tracePoint(system: SystemName | null, x: number[], success: boolean): TracePoint {
  // cart-pole traces live in the (angle, rate) plane, planar in (x, y)
  return { x: x[0], y: x[1], success };
}

export function setLearned(store: UiStore, resp: LearnResponse): void {
  store.taskId = resp.task_id;
  store.taskMode = resp.mode;
  store.density = resp.density;
  store.densityDomain = resp.domain;
  store.rolloutTrace = [];
  store.successTimeline = [];
  store.summary = null;
}

/** Parse an exported .demos.jsonl into scatter points over the task plane. */
export function scatterFromDemoFile(
  text: string,
  demoIds: string[],
  maxPerDemo = 400,
): ScatterPoint[] {
  const wanted = new Set(demoIds);
  const points: ScatterPoint[] = [];
  const lines = text.split("\n");
  for (const line of lines.slice(1)) {
    if (!line.trim()) continue;
    let record: { id: string; label: "positive" | "negative"; x: number[][] };
    try {
      record = JSON.parse(line);
    } catch {
      continue;
    }
    if (!wanted.has(record.id)) continue;
    const stride = Math.max(1, Math.floor(record.x.length / maxPerDemo));
    for (let i = 0; i < record.x.length; i += stride) {
      points.push({ x: record.x[i][0], y: record.x[i][1], label: record.label });
    }
  }
  return points;
}

export function setSummary(store: UiStore, summary: RolloutSummary): void {
  store.summary = summary;
  store.rolloutRunning = false;
}

export function summaryLines(store: UiStore): string[] {
  // verbatim display: numbers are stringified exactly as received
  const s = store.summary;
  if (!s) {
    return [];
  }
  const lines = [
    `duration: ${s.duration}`,
    `final distance from ergodicity: ${s.final_eps}`,
    `replans: ${s.replans}`,
  ];
  if (s.success_time !== undefined) {
    lines.push(`success time: ${s.success_time}`);
    lines.push(`first success: ${s.first_success === null ? "never" : s.first_success}`);
  }
  if (s.cleaning_m !== undefined) {
    lines.push(`cleaning score: ${s.cleaning_m}`);
    lines.push(`collided: ${s.collided}`);
    lines.push(`reached target: ${s.reach}`);
  }
  if (s.cancelled) {
    lines.push("cancelled: partial result");
  }
  return lines;
}
