// End-to-end scripted session against a live local service: record a 5 s
// demo, label it, learn posonly, render the returned density grid with the
// UI's own rasterizer, run a short rollout, and check the summary display
// holds the service's numbers exactly.

import { spawn, ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { ApiClient, liveChannelUrl } from "../src/api.js";
import { encodeClientMsg, parseServerMsg, ServerMsg } from "../src/protocol.js";
import { gridScale, renderDensity } from "../src/heatmap.js";
import { applyServerMsg, createStore, setLearned, setSession, setSummary, summaryLines } from "../src/store.js";

const PKG_ROOT = new URL("../..", import.meta.url).pathname;

let proc: ChildProcess;
let baseUrl: string;

async function waitForHealth(url: string): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${url}/health`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error(`service at ${url} never became healthy`);
}

beforeAll(async () => {
  proc = spawn("python3", ["-m", "erglearn.cli", "serve", "--port", "0"], {
    cwd: PKG_ROOT,
    stdio: ["ignore", "pipe", "pipe"],
  });
  const port = await new Promise<number>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("service never printed its port")), 20000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      const match = /serving on port (\d+)/.exec(chunk.toString());
      if (match) {
        clearTimeout(timer);
        resolve(Number(match[1]));
      }
    });
  });
  baseUrl = `http://127.0.0.1:${port}`;
  await waitForHealth(baseUrl);
}, 30000);

afterAll(() => {
  proc?.kill();
});

class ScriptedChannel {
  private socket: WebSocket;
  private queue: ServerMsg[] = [];
  private waiters: ((msg: ServerMsg) => void)[] = [];

  constructor(url: string) {
    this.socket = new WebSocket(url);
    this.socket.on("message", (data) => {
      const msg = parseServerMsg(data.toString());
      if (!msg) return;
      const waiter = this.waiters.shift();
      if (waiter) {
        waiter(msg);
      } else {
        this.queue.push(msg);
      }
    });
  }

  ready(): Promise<void> {
    return new Promise((resolve) => this.socket.on("open", () => resolve()));
  }

  send(msg: Parameters<typeof encodeClientMsg>[0]): void {
    this.socket.send(encodeClientMsg(msg));
  }

  next(): Promise<ServerMsg> {
    const queued = this.queue.shift();
    if (queued) return Promise.resolve(queued);
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  async nextOfType<T extends ServerMsg["type"]>(type: T, limit = 600): Promise<Extract<ServerMsg, { type: T }>> {
    for (let i = 0; i < limit; i++) {
      const msg = await this.next();
      if (msg.type === type) {
        return msg as Extract<ServerMsg, { type: T }>;
      }
    }
    throw new Error(`no ${type} message within ${limit} frames`);
  }

  close(): void {
    this.socket.close();
  }
}

describe("scripted teaching session", () => {
  it("records, labels, learns, renders, and rolls out against the live service", async () => {
    const store = createStore();
    const api = new ApiClient(baseUrl);
    const info = await api.createSession("cartpole");
    setSession(store, info);
    expect(info.state[0]).toBeCloseTo(Math.PI, 6);

    const channel = new ScriptedChannel(liveChannelUrl(baseUrl, info.id));
    await channel.ready();

    // record exactly 5 s: ticks 10..260 at 50 Hz, steering left then right
    channel.send({ type: "control", u: [6.0], at_tick: 20 });
    channel.send({ type: "control", u: [-6.0], at_tick: 120 });
    channel.send({ type: "control", u: [0.0], at_tick: 220 });
    channel.send({ type: "start_recording", at_tick: 10 });
    channel.send({ type: "stop_recording", label: "positive", at_tick: 260 });

    const started = await channel.nextOfType("recording_started", 1200);
    expect(started.tick).toBe(10);
    const stopped = await channel.nextOfType("recording_stopped", 1200);
    expect(stopped.samples).toBe(251); // 5 s at 50 Hz plus the starting sample
    expect(stopped.duration).toBeCloseTo(5.0, 9);
    applyServerMsg(store, stopped);

    // the state stream fed the store along the way
    const state = await channel.nextOfType("state");
    applyServerMsg(store, state);
    expect(store.simTime).toBeGreaterThan(0);

    // learn posonly from the recorded demo
    const learned = await api.learn(info.id, [stopped.demo_id], "posonly", 0.5, 0.5, 8);
    setLearned(store, learned);
    expect(learned.density).toHaveLength(64);
    expect(learned.density[0]).toHaveLength(64);

    // render through the UI's own rasterizer: no error, fully opaque buffer
    const buffer = renderDensity(learned.density, gridScale(learned.density));
    expect(buffer.width).toBe(64);
    expect(buffer.height).toBe(64);
    for (let i = 3; i < buffer.pixels.length; i += 4) {
      expect(buffer.pixels[i]).toBe(255);
    }

    // short rollout; summary numbers must land in the display verbatim
    const summaryPromise = api.rollout(info.id, learned.task_id, 0.3, {
      max_iters: 2,
      order: 8,
    }, false);
    const streamed = await channel.nextOfType("rollout_state", 2000);
    expect(streamed.x).toHaveLength(4);
    const summary = await summaryPromise;
    setSummary(store, summary);
    const lines = summaryLines(store);
    expect(lines).toContain(`duration: ${summary.duration}`);
    expect(lines).toContain(`final distance from ergodicity: ${summary.final_eps}`);
    expect(lines).toContain(`success time: ${summary.success_time}`);
    expect(summary.replans).toBe(3);

    channel.close();
  }, 120000);

  it("keeps the channel alive through malformed input", async () => {
    const api = new ApiClient(baseUrl);
    const info = await api.createSession("planar");
    const channel = new ScriptedChannel(liveChannelUrl(baseUrl, info.id));
    await channel.ready();
    channel.send({ type: "control", u: [1.0] } as never);
    const err = await channel.nextOfType("error");
    expect(err.message).toContain("control");
    const state = await channel.nextOfType("state");
    expect(state.x).toHaveLength(4);
    channel.close();
  }, 30000);
});
