// Bootstraps the teaching console: session, live channel, keyboard, panels.

import { ApiClient, liveChannelUrl } from "./api.js";
import { drawSim } from "./draw.js";
import { KeyboardController } from "./keyboard.js";
import { SystemName } from "./protocol.js";
import { applyServerMsg, createStore, setSession } from "./store.js";
import { LiveTransport } from "./transport.js";
import { wirePanels } from "./panels.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8753";
const system = (params.get("system") ?? "cartpole") as SystemName;

const store = createStore();
const api = new ApiClient(baseUrl);

async function boot(): Promise<void> {
  const banner = document.getElementById("connection-banner")!;
  const info = await api.createSession(system);
  setSession(store, info);
  document.getElementById("session-label")!.textContent =
    `${info.id} (${info.system}, ${info.tick_rate} Hz)`;

  const transport = new LiveTransport(liveChannelUrl(baseUrl, info.id), {
    onMessage(msg) {
      applyServerMsg(store, msg);
      if (msg.type === "recording_stopped") {
        panels.refreshDemos();
      }
      if (msg.type === "rollout_state" || msg.type === "error") {
        panels.redraw();
      }
    },
    onStatus(status) {
      store.connection = status;
      banner.textContent = status === "open" ? "" : `connection ${status}...`;
      banner.style.display = status === "open" ? "none" : "block";
    },
  });

  const panels = wirePanels(store, api, transport);
  const keyboard = new KeyboardController(info.system, (msg) => transport.send(msg));
  window.addEventListener("keydown", (ev) => {
    if (keyboard.keyDown(ev.key)) {
      ev.preventDefault();
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (keyboard.keyUp(ev.key)) {
      ev.preventDefault();
    }
  });
  window.addEventListener("blur", () => keyboard.releaseAll());

  const simCanvas = document.getElementById("sim-canvas") as HTMLCanvasElement;
  function frame(): void {
    drawSim(simCanvas, store);
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
  await panels.refreshDemos();
}

boot().catch((err) => {
  const banner = document.getElementById("connection-banner")!;
  banner.textContent = `failed to reach the service at ${baseUrl}: ${err}`;
  banner.style.display = "block";
});
