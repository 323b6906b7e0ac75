/**
 * Scripted square driver: walks the TCP around the session's square
 * target by reacting to state frames, in any of the three modes.
 *
 * The driver is a pure state machine fed (state, nowMs) pairs and
 * returning the protocol payloads to send, so it runs identically
 * under a browser button ("autopilot") and the node end-to-end test.
 *
 * Mode semantics:
 *  - gamepad: full-deflection stick toward the next corner (dominant
 *    axis normalized to 1), stop command when finished.
 *  - pendant: hold the dominant-axis direction button; release+press
 *    on direction change.
 *  - cobotar: move the fingertip over the wanted direction button,
 *    show Palm for a few frames (arming), then One to press; Palm
 *    again to release at corners and at the end. Hand frames respect
 *    the 30 Hz cap.
 */

import {
  applyHomography,
  type Action,
  type Mode,
  type SessionInfo,
  type StateFrame,
} from "./protocol.js";
import { RateLimiter, HAND_HZ } from "./inputs.js";
import { squareCorners } from "./scene.js";

export interface Outgoing {
  type: "hand_update" | "stick" | "pendant";
  fields: Record<string, unknown>;
}

const WAYPOINT_TOL_MM = 2.5;
const ARM_FRAMES = 4; // Palm frames before pressing: debounce is 3

export function dominantAction(dx: number, dy: number): Action {
  if (Math.abs(dx) >= Math.abs(dy)) {
    return dx > 0 ? "+x" : "-x";
  }
  return dy > 0 ? "+y" : "-y";
}

export class SquareDriver {
  readonly mode: Mode;
  private waypoints: [number, number][] = [];
  private wpIndex = 0;
  private finished = false;
  private startedFrom: [number, number] | null = null;

  // cobotar bookkeeping
  private readonly handLimit = new RateLimiter(HAND_HZ);
  private phase: "arm" | "press" = "arm";
  private armLeft = ARM_FRAMES;
  private wantedAction: Action | null = null;

  // pendant bookkeeping
  private held: Action | null = null;

  constructor(mode: Mode) {
    this.mode = mode;
  }

  /** Waypoints from the session task: TR, BR, BL and back to TL. */
  begin(session: SessionInfo): void {
    const corners = squareCorners(session.task.center_mm, session.task.side_mm);
    this.waypoints = [corners[1]!, corners[2]!, corners[3]!, corners[0]!];
    this.wpIndex = 0;
    this.finished = false;
    this.startedFrom = null;
    this.phase = "arm";
    this.armLeft = ARM_FRAMES;
    this.wantedAction = null;
    this.held = null;
  }

  done(): boolean {
    return this.finished;
  }

  onState(state: StateFrame, nowMs: number): Outgoing[] {
    if (this.finished || this.waypoints.length === 0) {
      return [];
    }
    const pos: [number, number] = [state.tcp[0] * 1000, state.tcp[1] * 1000];
    if (this.startedFrom === null) {
      this.startedFrom = pos;
    }

    let wp = this.waypoints[this.wpIndex]!;
    while (Math.hypot(wp[0] - pos[0], wp[1] - pos[1]) <= WAYPOINT_TOL_MM) {
      this.wpIndex += 1;
      if (this.wpIndex >= this.waypoints.length) {
        this.finished = true;
        return this.stopCommands(state, nowMs);
      }
      wp = this.waypoints[this.wpIndex]!;
    }

    const dx = wp[0] - pos[0];
    const dy = wp[1] - pos[1];
    switch (this.mode) {
      case "gamepad":
        return this.driveStick(dx, dy);
      case "pendant":
        return this.drivePendant(dominantAction(dx, dy));
      case "cobotar":
        return this.driveHand(dominantAction(dx, dy), state, nowMs);
    }
  }

  private stopCommands(state: StateFrame, nowMs: number): Outgoing[] {
    switch (this.mode) {
      case "gamepad":
        return [{ type: "stick", fields: { x: 0, y: 0 } }];
      case "pendant": {
        if (this.held === null) {
          return [];
        }
        const a = this.held;
        this.held = null;
        return [{ type: "pendant", fields: { action: a, pressed: false } }];
      }
      case "cobotar": {
        const tip = this.tipOver(this.wantedAction ?? "+x", state);
        return [
          {
            type: "hand_update",
            fields: { t: nowMs / 1000, fingertip: tip, gesture: "Palm" },
          },
        ];
      }
    }
  }

  private driveStick(dx: number, dy: number): Outgoing[] {
    const m = Math.max(Math.abs(dx), Math.abs(dy));
    if (m < 1e-9) {
      return [];
    }
    return [{ type: "stick", fields: { x: dx / m, y: dy / m } }];
  }

  private drivePendant(action: Action): Outgoing[] {
    if (this.held === action) {
      return [];
    }
    const out: Outgoing[] = [];
    if (this.held !== null) {
      out.push({
        type: "pendant",
        fields: { action: this.held, pressed: false },
      });
    }
    out.push({ type: "pendant", fields: { action, pressed: true } });
    this.held = action;
    return out;
  }

  private tipOver(action: Action, state: StateFrame): [number, number] {
    const button = state.gui_buttons.find((b) => b.action === action);
    if (button === undefined) {
      throw new Error(`no button bound to ${action}`);
    }
    const [x, y, w, h] = button.rect_mm;
    // gui mm -> normalized camera coordinates
    return applyHomography(state.gui_to_cam, x + w / 2, y + h / 2);
  }

  private driveHand(
    action: Action,
    state: StateFrame,
    nowMs: number,
  ): Outgoing[] {
    if (action !== this.wantedAction) {
      this.wantedAction = action;
      this.phase = "arm";
      this.armLeft = ARM_FRAMES;
    }
    if (!this.handLimit.ready(nowMs)) {
      return [];
    }
    const tip = this.tipOver(action, state);
    if (this.phase === "arm") {
      this.armLeft -= 1;
      if (this.armLeft <= 0) {
        this.phase = "press";
      }
      return [
        {
          type: "hand_update",
          fields: { t: nowMs / 1000, fingertip: tip, gesture: "Palm" },
        },
      ];
    }
    return [
      {
        type: "hand_update",
        fields: { t: nowMs / 1000, fingertip: tip, gesture: "One" },
      },
    ];
  }
}
