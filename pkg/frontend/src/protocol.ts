/**
 * Client side of the versioned JSON frame protocol.
 *
 * Frames are `{"v": 1, "seq": N, "type": tag, ...}` with per-direction
 * monotonically increasing sequence numbers. The console validates
 * every inbound server frame and rejects anything out of order, so a
 * buggy or stale stream surfaces immediately instead of rendering
 * garbage.
 */

export const PROTOCOL_VERSION = 1;

export const CLIENT_TYPES = [
  "hand_update",
  "stick",
  "pendant",
  "set_mode",
  "task",
] as const;

export const SERVER_TYPES = [
  "hello",
  "state",
  "press_event",
  "fault",
  "error",
  "task_marker",
] as const;

export type Mode = "cobotar" | "gamepad" | "pendant";
export const MODES: readonly Mode[] = ["cobotar", "gamepad", "pendant"];

export type Action = "+x" | "-x" | "+y" | "-y";
export const ACTIONS: readonly Action[] = ["+x", "-x", "+y", "-y"];

export class ProtocolError extends Error {}

export interface ButtonSnapshot {
  id: string;
  action: Action;
  rect_mm: [number, number, number, number];
  quad: number[][];
  active: boolean;
}

export interface SessionInfo {
  mode: Mode;
  rate_hz: number;
  speed_mm_s: number;
  vmax_mm_s: number;
  standoff_m: number;
  task: { center_mm: [number, number]; side_mm: number };
  workspace_mm: [number, number];
  layout: {
    buttons: { id: string; rect: number[]; action: Action }[];
    extent_mm: [number, number];
  };
}

export interface HelloFrame {
  v: 1;
  seq: number;
  type: "hello";
  session: SessionInfo;
}

export interface StateFrame {
  v: 1;
  seq: number;
  type: "state";
  t: number;
  mode: Mode;
  q: number[];
  tcp: [number, number, number];
  target: { p: [number, number, number] };
  follower: { p: [number, number, number] };
  gui_buttons: ButtonSnapshot[];
  active_button: string | null;
  gui_to_cam: number[];
  trace_tail: [number, number][];
}

export interface PressEventFrame {
  v: 1;
  seq: number;
  type: "press_event";
  t: number;
  button: string;
  kind: "activated" | "released";
}

export interface FaultFrame {
  v: 1;
  seq: number;
  type: "fault";
  t: number;
  reason: string;
}

export interface ErrorFrame {
  v: 1;
  seq: number;
  type: "error";
  message: string;
}

export interface TaskMarkerFrame {
  v: 1;
  seq: number;
  type: "task_marker";
  t: number;
  event: "start" | "end";
}

export type ServerFrame =
  | HelloFrame
  | StateFrame
  | PressEventFrame
  | FaultFrame
  | ErrorFrame
  | TaskMarkerFrame;

/** Outbound framing with its own sequence counter. */
export class FrameSender {
  private seq = 0;

  encode(type: string, fields: Record<string, unknown> = {}): string {
    this.seq += 1;
    return JSON.stringify({ v: PROTOCOL_VERSION, seq: this.seq, type, ...fields });
  }
}

function requireNumber(frame: Record<string, unknown>, key: string): number {
  const v = frame[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new ProtocolError(`${String(frame.type)}: field ${key} must be a number`);
  }
  return v;
}

/**
 * Parse and validate one frame arriving from the server. Callers keep
 * the last accepted sequence number and pass it back in.
 */
export function decodeServerFrame(
  text: string,
  lastSeq: number | null,
): ServerFrame {
  let frame: unknown;
  try {
    frame = JSON.parse(text);
  } catch {
    throw new ProtocolError("malformed JSON frame");
  }
  if (typeof frame !== "object" || frame === null || Array.isArray(frame)) {
    throw new ProtocolError("frame must be a JSON object");
  }
  const f = frame as Record<string, unknown>;
  if (f.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${String(f.v)}`);
  }
  const tag = f.type;
  if (typeof tag !== "string" || !(SERVER_TYPES as readonly string[]).includes(tag)) {
    throw new ProtocolError(`unknown frame type ${String(tag)}`);
  }
  const seq = f.seq;
  if (typeof seq !== "number" || !Number.isInteger(seq)) {
    throw new ProtocolError("seq must be an integer");
  }
  if (lastSeq !== null && seq <= lastSeq) {
    throw new ProtocolError(`out-of-order seq ${seq} after ${lastSeq}`);
  }

  switch (tag) {
    case "state": {
      requireNumber(f, "t");
      if (!Array.isArray(f.q) || !Array.isArray(f.tcp) || f.tcp.length !== 3) {
        throw new ProtocolError("state: q and tcp[3] are required");
      }
      if (!Array.isArray(f.gui_buttons) || !Array.isArray(f.gui_to_cam)) {
        throw new ProtocolError("state: gui_buttons and gui_to_cam are required");
      }
      if (f.gui_to_cam.length !== 9) {
        throw new ProtocolError("state: gui_to_cam must hold 9 numbers");
      }
      break;
    }
    case "hello": {
      const s = f.session;
      if (typeof s !== "object" || s === null) {
        throw new ProtocolError("hello: session object is required");
      }
      break;
    }
    case "press_event": {
      requireNumber(f, "t");
      if (f.kind !== "activated" && f.kind !== "released") {
        throw new ProtocolError(`press_event: unknown kind ${String(f.kind)}`);
      }
      if (typeof f.button !== "string") {
        throw new ProtocolError("press_event: button must be a string");
      }
      break;
    }
    case "fault": {
      requireNumber(f, "t");
      if (typeof f.reason !== "string") {
        throw new ProtocolError("fault: reason must be a string");
      }
      break;
    }
    case "error": {
      if (typeof f.message !== "string") {
        throw new ProtocolError("error: message must be a string");
      }
      break;
    }
    case "task_marker": {
      if (f.event !== "start" && f.event !== "end") {
        throw new ProtocolError(`task_marker: unknown event ${String(f.event)}`);
      }
      break;
    }
  }
  return frame as ServerFrame;
}

/** Apply a 3x3 row-major homography to a 2-D point. */
export function applyHomography(
  h: readonly number[],
  x: number,
  y: number,
): [number, number] {
  if (h.length !== 9) {
    throw new ProtocolError("homography needs 9 entries");
  }
  const w = h[6]! * x + h[7]! * y + h[8]!;
  if (Math.abs(w) < 1e-12) {
    throw new ProtocolError("homography maps the point to infinity");
  }
  return [(h[0]! * x + h[1]! * y + h[2]!) / w, (h[3]! * x + h[4]! * y + h[5]!) / w];
}
