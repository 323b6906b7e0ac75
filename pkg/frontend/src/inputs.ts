/**
 * Per-mode input bindings. Pointer moves become hand_update frames at
 * up to 30 Hz, stick moves go out at up to 60 Hz, pendant arrows send
 * press/release pairs. Nothing is sent while disconnected.
 */

import { FrameSender, type Action, type Mode } from "./protocol.js";

export type SendFn = (text: string) => void;
export type Gesture = "Palm" | "One";

export const HAND_HZ = 30;
export const STICK_HZ = 60;

export class RateLimiter {
  private readonly minIntervalMs: number;
  private lastMs = -Infinity;

  constructor(maxHz: number) {
    this.minIntervalMs = 1000 / maxHz;
  }

  ready(nowMs: number): boolean {
    if (nowMs - this.lastMs + 1e-9 >= this.minIntervalMs) {
      this.lastMs = nowMs;
      return true;
    }
    return false;
  }
}

export class InputBindings {
  readonly sender = new FrameSender();
  private mode: Mode;
  private enabled = false;
  private gesture: Gesture = "Palm";
  private readonly handLimit = new RateLimiter(HAND_HZ);
  private readonly stickLimit = new RateLimiter(STICK_HZ);
  private readonly pendantDown = new Set<Action>();
  private readonly send: SendFn;

  constructor(send: SendFn, mode: Mode) {
    this.send = send;
    this.mode = mode;
  }

  setEnabled(on: boolean): void {
    this.enabled = on;
  }

  currentMode(): Mode {
    return this.mode;
  }

  currentGesture(): Gesture {
    return this.gesture;
  }

  /** Pointer position in normalized camera coordinates, [0, 1] each. */
  pointerMove(x: number, y: number, tMs: number): boolean {
    if (!this.enabled || this.mode !== "cobotar") {
      return false;
    }
    if (!this.handLimit.ready(tMs)) {
      return false;
    }
    this.send(
      this.sender.encode("hand_update", {
        t: tMs / 1000,
        fingertip: [x, y],
        gesture: this.gesture,
      }),
    );
    return true;
  }

  /** Explicit gesture toggle (key or button); classifier stays server-side. */
  toggleGesture(): Gesture {
    this.gesture = this.gesture === "Palm" ? "One" : "Palm";
    return this.gesture;
  }

  stick(x: number, y: number, tMs: number): boolean {
    if (!this.enabled || this.mode !== "gamepad") {
      return false;
    }
    if (!this.stickLimit.ready(tMs)) {
      return false;
    }
    const clamp = (v: number) => Math.max(-1, Math.min(1, v));
    this.send(this.sender.encode("stick", { x: clamp(x), y: clamp(y) }));
    return true;
  }

  pendantPress(action: Action): boolean {
    if (!this.enabled || this.mode !== "pendant" || this.pendantDown.has(action)) {
      return false;
    }
    this.pendantDown.add(action);
    this.send(this.sender.encode("pendant", { action, pressed: true }));
    return true;
  }

  pendantRelease(action: Action): boolean {
    if (!this.enabled || !this.pendantDown.delete(action)) {
      return false;
    }
    this.send(this.sender.encode("pendant", { action, pressed: false }));
    return true;
  }

  setMode(mode: Mode): boolean {
    if (!this.enabled) {
      return false;
    }
    this.mode = mode;
    this.gesture = "Palm";
    this.pendantDown.clear();
    this.send(this.sender.encode("set_mode", { mode }));
    return true;
  }

  /** Called when a fresh hello arrives (mode switch acknowledged). */
  syncMode(mode: Mode): void {
    this.mode = mode;
  }

  taskMarker(event: "start" | "end"): boolean {
    if (!this.enabled) {
      return false;
    }
    this.send(this.sender.encode("task", { event }));
    return true;
  }
}
