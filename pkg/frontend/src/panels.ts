// DOM wiring for the demo, learn, and rollout panels.

import { ApiClient } from "./api.js";
import { blitDensity, drawTimeline, drawTrace } from "./draw.js";
import { domainToPixel, gridScale, renderDensity } from "./heatmap.js";
import { DemoLabel, FusionMode } from "./protocol.js";
import { UiStore, scatterFromDemoFile, setLearned, setSummary, summaryLines } from "./store.js";
import { Transport } from "./transport.js";

export interface Panels {
  refreshDemos(): Promise<void>;
  redraw(): void;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

export function wirePanels(store: UiStore, api: ApiClient, transport: Transport): Panels {
  const demoList = el<HTMLUListElement>("demo-list");
  const recordBtn = el<HTMLButtonElement>("record-btn");
  const stopPosBtn = el<HTMLButtonElement>("stop-positive-btn");
  const stopNegBtn = el<HTMLButtonElement>("stop-negative-btn");
  const exportBtn = el<HTMLButtonElement>("export-btn");
  const importInput = el<HTMLInputElement>("import-input");
  const learnBtn = el<HTMLButtonElement>("learn-btn");
  const modeSelect = el<HTMLSelectElement>("mode-select");
  const betaSlider = el<HTMLInputElement>("beta-slider");
  const gammaSlider = el<HTMLInputElement>("gamma-slider");
  const betaLabel = el<HTMLSpanElement>("beta-value");
  const gammaLabel = el<HTMLSpanElement>("gamma-value");
  const densityCanvas = el<HTMLCanvasElement>("density-canvas");
  const runBtn = el<HTMLButtonElement>("run-btn");
  const cancelBtn = el<HTMLButtonElement>("cancel-btn");
  const durationInput = el<HTMLInputElement>("duration-input");
  const presetSelect = el<HTMLSelectElement>("preset-select");
  const summaryCard = el<HTMLDivElement>("summary-card");
  const timelineCanvas = el<HTMLCanvasElement>("timeline-canvas");
  const errorBar = el<HTMLDivElement>("error-bar");

  recordBtn.onclick = () => transport.send({ type: "start_recording" });
  stopPosBtn.onclick = () => stopRecording("positive");
  stopNegBtn.onclick = () => stopRecording("negative");

  function stopRecording(label: DemoLabel): void {
    transport.send({ type: "stop_recording", label });
    setTimeout(() => panels.refreshDemos(), 200);
  }

  exportBtn.onclick = async () => {
    if (!store.session) return;
    const text = await api.exportDemos(store.session.id);
    const blob = new Blob([text], { type: "application/jsonl" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = `${store.session.id}.demos.jsonl`;
    link.click();
    URL.revokeObjectURL(link.href);
  };

  importInput.onchange = async () => {
    const file = importInput.files?.[0];
    if (!file || !store.session) return;
    await api.importDemos(store.session.id, await file.text());
    await panels.refreshDemos();
  };

  betaSlider.oninput = () => (betaLabel.textContent = betaSlider.value);
  gammaSlider.oninput = () => (gammaLabel.textContent = gammaSlider.value);

  learnBtn.onclick = async () => {
    if (!store.session) return;
    const selected = Array.from(
      demoList.querySelectorAll<HTMLInputElement>("input[type=checkbox]:checked"),
    ).map((box) => box.value);
    try {
      const resp = await api.learn(
        store.session.id,
        selected,
        modeSelect.value as FusionMode,
        Number(betaSlider.value),
        Number(gammaSlider.value),
      );
      setLearned(store, resp);
      const fileText = await api.exportDemos(store.session.id);
      store.demoScatter = scatterFromDemoFile(fileText, selected);
      panels.redraw();
    } catch (err) {
      store.lastError = String(err);
      panels.redraw();
    }
  };

  runBtn.onclick = async () => {
    if (!store.session || !store.taskId) return;
    store.rolloutTrace = [];
    store.successTimeline = [];
    store.rolloutRunning = true;
    const preset = presetSelect.value === "fast"
      ? { max_iters: 5 }
      : {};
    try {
      const summary = await api.rollout(
        store.session.id,
        store.taskId,
        Number(durationInput.value),
        preset,
      );
      setSummary(store, summary);
    } catch (err) {
      store.lastError = String(err);
      store.rolloutRunning = false;
    }
    panels.redraw();
  };

  cancelBtn.onclick = async () => {
    if (!store.session) return;
    try {
      await api.cancelRollout(store.session.id);
    } catch (err) {
      store.lastError = String(err);
    }
  };

  const panels: Panels = {
    async refreshDemos() {
      if (!store.session) return;
      const info = await api.sessionInfo(store.session.id);
      store.demos = info.demos;
      demoList.innerHTML = "";
      const negatives = info.demos.filter((d) => d.label === "negative").length;
      for (const demo of info.demos) {
        const item = document.createElement("li");
        item.className = demo.label;
        const box = document.createElement("input");
        box.type = "checkbox";
        box.value = demo.id;
        box.checked = true;
        item.appendChild(box);
        const text = document.createElement("span");
        // per-demo success readout comes straight from the server
        let outcome = "";
        if (demo.success_time !== undefined) {
          outcome = `, success ${demo.success_time}s`;
        } else if (demo.cleaning_m !== undefined) {
          outcome = `, m=${demo.cleaning_m}${demo.reach ? ", reached" : ""}`;
        }
        text.textContent =
          ` ${demo.id} [${demo.label}] ${demo.duration.toFixed(2)}s, ${demo.samples} samples${outcome}`;
        item.appendChild(text);
        const del = document.createElement("button");
        del.textContent = "✕";
        del.title = "delete demonstration";
        del.onclick = async () => {
          if (!store.session) return;
          await api.deleteDemo(store.session.id, demo.id);
          await panels.refreshDemos();
        };
        item.appendChild(del);
        demoList.appendChild(item);
      }
      const negonlyOption = modeSelect.querySelector<HTMLOptionElement>("option[value=negonly]");
      if (negonlyOption) {
        negonlyOption.disabled = negatives === 0;
      }
    },
    redraw() {
      errorBar.textContent = store.lastError;
      errorBar.style.display = store.lastError ? "block" : "none";
      if (store.density && store.densityDomain) {
        const buffer = renderDensity(store.density, gridScale(store.density));
        blitDensity(densityCanvas, buffer);
        overlayDemoScatter();
        if (store.system && store.rolloutTrace.length) {
          drawTrace(densityCanvas, store.rolloutTrace, store.densityDomain, store.system);
        }
      }
      summaryCard.innerHTML = "";
      for (const line of summaryLines(store)) {
        const row = document.createElement("div");
        row.textContent = line;
        summaryCard.appendChild(row);
      }
      if (store.rolloutEps !== null && store.rolloutRunning) {
        const row = document.createElement("div");
        row.textContent = `running distance from ergodicity: ${store.rolloutEps}`;
        summaryCard.appendChild(row);
      }
      drawTimeline(timelineCanvas, store.successTimeline);
    },
  };

  function overlayDemoScatter(): void {
    const ctx = densityCanvas.getContext("2d");
    if (!ctx || !store.densityDomain) return;
    const { lower, lengths } = store.densityDomain;
    for (const point of store.demoScatter) {
      const [px, py] = domainToPixel(
        [point.x, point.y], lower, lengths, densityCanvas.width, densityCanvas.height,
      );
      ctx.fillStyle = point.label === "positive" ? "rgba(0,0,0,0.55)" : "rgba(200,30,30,0.6)";
      ctx.fillRect(px - 1, py - 1, 2, 2);
    }
    ctx.font = "11px sans-serif";
    ctx.fillStyle = "rgba(0,0,0,0.75)";
    ctx.fillText(`task ${store.taskId} (${store.taskMode})`, 6, 14);
  }

  return panels;
}
