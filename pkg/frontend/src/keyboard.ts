// Arrow keys map to acceleration commands on key transitions. A control
// message goes out immediately on every change; when all keys are up a
// single zero command is sent and the stream stays quiet.

import { ClientMsg, SystemName } from "./protocol.js";

export const CARTPOLE_ACCEL = 8.0; // m/s^2 per held arrow
export const PLANAR_ACCEL = 1.2;

export type SendFn = (msg: ClientMsg) => void;

export class KeyboardController {
  private held = new Set<string>();

  constructor(
    private system: SystemName,
    private send: SendFn,
  ) {}

  setSystem(system: SystemName): void {
    this.system = system;
    this.held.clear();
  }

  controlVector(): number[] {
    const left = this.held.has("ArrowLeft") ? 1 : 0;
    const right = this.held.has("ArrowRight") ? 1 : 0;
    const up = this.held.has("ArrowUp") ? 1 : 0;
    const down = this.held.has("ArrowDown") ? 1 : 0;
    if (this.system === "cartpole") {
      return [CARTPOLE_ACCEL * (right - left)];
    }
    return [PLANAR_ACCEL * (right - left), PLANAR_ACCEL * (up - down)];
  }

  keyDown(key: string): boolean {
    if (!isArrow(key) || this.held.has(key)) {
      return false;
    }
    this.held.add(key);
    this.send({ type: "control", u: this.controlVector() });
    return true;
  }

  keyUp(key: string): boolean {
    if (!isArrow(key) || !this.held.has(key)) {
      return false;
    }
    this.held.delete(key);
    this.send({ type: "control", u: this.controlVector() });
    return true;
  }

  releaseAll(): void {
    if (this.held.size) {
      this.held.clear();
      this.send({ type: "control", u: this.controlVector() });
    }
  }
}

function isArrow(key: string): boolean {
  return key === "ArrowLeft" || key === "ArrowRight" || key === "ArrowUp" || key === "ArrowDown";
}
