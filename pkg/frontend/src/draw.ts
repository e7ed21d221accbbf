// Canvas rendering of the live simulator and the learned-density views.

import { PixelBuffer, domainToPixel } from "./heatmap.js";
import { DomainInfo, SystemName } from "./protocol.js";
import { TracePoint, UiStore } from "./store.js";

const TRACK_HALF_WIDTH = 3.0; // metres of cart travel shown

export function drawSim(canvas: HTMLCanvasElement, store: UiStore): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !store.system || store.simState.length < 4) {
    return;
  }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (store.system === "cartpole") {
    drawCartpole(ctx, canvas, store);
  } else {
    drawPlanar(ctx, canvas, store);
  }
  if (store.recording) {
    ctx.fillStyle = "#c0392b";
    ctx.beginPath();
    ctx.arc(16, 16, 7, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#333";
    ctx.font = "12px sans-serif";
    ctx.fillText(`rec ${store.sampleCount}`, 28, 20);
  }
}

function drawCartpole(ctx: CanvasRenderingContext2D, canvas: HTMLCanvasElement, store: UiStore): void {
  const [theta, , cartPos] = store.simState;
  const w = canvas.width;
  const h = canvas.height;
  const ground = h * 0.7;
  const scale = w / (2 * TRACK_HALF_WIDTH);
  const cx = w / 2 + ((cartPos % TRACK_HALF_WIDTH) + TRACK_HALF_WIDTH) % (2 * TRACK_HALF_WIDTH) * scale - TRACK_HALF_WIDTH * scale;
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(0, ground);
  ctx.lineTo(w, ground);
  ctx.stroke();

  if (store.inSuccessRegion) {
    ctx.fillStyle = "rgba(46, 204, 113, 0.25)";
    ctx.fillRect(0, 0, w, h);
  }

  ctx.fillStyle = "#2c3e50";
  ctx.fillRect(cx - 24, ground - 14, 48, 14);
  const poleLen = h * 0.35;
  // theta = 0 points straight up
  const tipX = cx + poleLen * Math.sin(theta);
  const tipY = ground - 14 - poleLen * Math.cos(theta);
  ctx.strokeStyle = store.inSuccessRegion ? "#27ae60" : "#8e44ad";
  ctx.lineWidth = 5;
  ctx.beginPath();
  ctx.moveTo(cx, ground - 14);
  ctx.lineTo(tipX, tipY);
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#8e44ad";
  ctx.beginPath();
  ctx.arc(tipX, tipY, 7, 0, 2 * Math.PI);
  ctx.fill();
}

function drawPlanar(ctx: CanvasRenderingContext2D, canvas: HTMLCanvasElement, store: UiStore): void {
  const [x, y] = store.simState;
  const w = canvas.width;
  const h = canvas.height;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(0.5, 0.5, w - 1, h - 1);
  // default planar world: unit workspace, obstacle and target discs
  circle(ctx, w * 0.5, h * 0.5, 0.08 * w, "#e74c3c");
  circle(ctx, w * 0.8, h * (1 - 0.75), 0.08 * w, "#3498db");
  circle(ctx, x * w, (1 - y) * h, 6, store.inSuccessRegion ? "#27ae60" : "#2c3e50");
}

function circle(ctx: CanvasRenderingContext2D, cx: number, cy: number, r: number, color: string): void {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.arc(cx, cy, r, 0, 2 * Math.PI);
  ctx.fill();
}

export function blitDensity(canvas: HTMLCanvasElement, buffer: PixelBuffer): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const image = new ImageData(buffer.pixels, buffer.width, buffer.height);
  const offscreen = document.createElement("canvas");
  offscreen.width = buffer.width;
  offscreen.height = buffer.height;
  offscreen.getContext("2d")?.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(offscreen, 0, 0, canvas.width, canvas.height);
}

export function drawTrace(
  canvas: HTMLCanvasElement,
  trace: TracePoint[],
  domain: DomainInfo,
  system: SystemName,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || trace.length === 0) {
    return;
  }
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  trace.forEach((point, idx) => {
    const [px, py] = domainToPixel(
      projectPoint(point, system, domain),
      domain.lower,
      domain.lengths,
      canvas.width,
      canvas.height,
    );
    if (idx === 0) {
      ctx.moveTo(px, py);
    } else {
      ctx.lineTo(px, py);
    }
  });
  ctx.strokeStyle = "rgba(20, 20, 20, 0.85)";
  ctx.stroke();
  const last = trace[trace.length - 1];
  const [lx, ly] = domainToPixel(
    projectPoint(last, system, domain),
    domain.lower,
    domain.lengths,
    canvas.width,
    canvas.height,
  );
  circle(ctx, lx, ly, 4, last.success ? "#27ae60" : "#f39c12");
}

function projectPoint(point: TracePoint, system: SystemName, domain: DomainInfo): [number, number] {
  let px = point.x;
  if (system === "cartpole") {
    // fold the angle into the density plot's box
    const lo = domain.lower[0];
    const len = domain.lengths[0];
    px = lo + ((((point.x - lo) % len) + len) % len);
  }
  return [px, point.y];
}

export function drawTimeline(canvas: HTMLCanvasElement, timeline: { t: number; success: boolean }[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#eee";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (timeline.length === 0) {
    return;
  }
  const tMax = timeline[timeline.length - 1].t || 1;
  ctx.fillStyle = "#27ae60";
  for (const slot of timeline) {
    if (slot.success) {
      const px = (slot.t / tMax) * canvas.width;
      ctx.fillRect(px, 0, Math.max(1, canvas.width / timeline.length), canvas.height);
    }
  }
}
