/**
 * Top-down 2-D scene. `buildSceneModel` is a pure mapping from the
 * latest snapshot to drawable geometry (tested directly);
 * `drawScene` turns that model into canvas calls.
 */

import type { SessionInfo, StateFrame } from "./protocol.js";

export interface SceneButton {
  id: string;
  action: string;
  /** Button outline on the table plane, workspace millimetres. */
  outline: [number, number][];
  highlighted: boolean;
}

export interface SceneModel {
  connected: boolean;
  mode: string | null;
  /** Square target corners in traversal order, millimetres. */
  square: [number, number][];
  trace: [number, number][];
  tcp: [number, number] | null;
  follower: [number, number] | null;
  standoffMm: number | null;
  buttons: SceneButton[];
  faultToast: string | null;
  banner: string | null;
}

export function squareCorners(
  center: [number, number],
  side: number,
): [number, number][] {
  const [cx, cy] = center;
  const h = side / 2;
  return [
    [cx - h, cy + h],
    [cx + h, cy + h],
    [cx + h, cy - h],
    [cx - h, cy - h],
  ];
}

export interface SceneInputs {
  snapshot: StateFrame | null;
  session: SessionInfo | null;
  connected: boolean;
  faultToast: string | null;
}

export function buildSceneModel(inputs: SceneInputs): SceneModel {
  const { snapshot, session, connected, faultToast } = inputs;
  const model: SceneModel = {
    connected,
    mode: snapshot?.mode ?? session?.mode ?? null,
    square: session ? squareCorners(session.task.center_mm, session.task.side_mm) : [],
    trace: snapshot?.trace_tail ?? [],
    tcp: null,
    follower: null,
    standoffMm: null,
    buttons: [],
    faultToast,
    banner: connected ? null : "disconnected: inputs disabled",
  };
  if (snapshot === null) {
    return model;
  }
  model.tcp = [snapshot.tcp[0] * 1000, snapshot.tcp[1] * 1000];
  model.follower = [snapshot.follower.p[0] * 1000, snapshot.follower.p[1] * 1000];
  const dz = snapshot.follower.p[2] - snapshot.target.p[2];
  const dx = snapshot.follower.p[0] - snapshot.target.p[0];
  const dy = snapshot.follower.p[1] - snapshot.target.p[1];
  model.standoffMm = Math.hypot(dx, dy, dz) * 1000;
  model.buttons = snapshot.gui_buttons.map((b) => ({
    id: b.id,
    action: b.action,
    outline: b.quad.map((p) => [p[0]! * 1000, p[1]! * 1000] as [number, number]),
    highlighted: b.active,
  }));
  return model;
}

export interface Viewport {
  width: number;
  height: number;
  /** Workspace millimetres shown across the canvas width. */
  spanMm: number;
  centerMm: [number, number];
}

export function worldToCanvas(
  view: Viewport,
  xMm: number,
  yMm: number,
): [number, number] {
  const scale = view.width / view.spanMm;
  return [
    view.width / 2 + (xMm - view.centerMm[0]) * scale,
    view.height / 2 - (yMm - view.centerMm[1]) * scale, // +y is up
  ];
}

function tracePath(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  pts: [number, number][],
  close: boolean,
): void {
  ctx.beginPath();
  pts.forEach(([x, y], i) => {
    const [cx, cy] = worldToCanvas(view, x, y);
    if (i === 0) {
      ctx.moveTo(cx, cy);
    } else {
      ctx.lineTo(cx, cy);
    }
  });
  if (close) {
    ctx.closePath();
  }
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  model: SceneModel,
  view: Viewport,
): void {
  ctx.fillStyle = "#10151c";
  ctx.fillRect(0, 0, view.width, view.height);

  if (model.square.length === 4) {
    ctx.strokeStyle = "#4d6a8f";
    ctx.setLineDash([6, 4]);
    ctx.lineWidth = 1.5;
    tracePath(ctx, view, model.square, true);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  for (const b of model.buttons) {
    tracePath(ctx, view, b.outline, true);
    ctx.fillStyle = b.highlighted ? "#e8a33d" : "#263445";
    ctx.fill();
    ctx.strokeStyle = "#5d7ba0";
    ctx.lineWidth = 1;
    ctx.stroke();
    const cx = b.outline.reduce((s, p) => s + p[0], 0) / b.outline.length;
    const cy = b.outline.reduce((s, p) => s + p[1], 0) / b.outline.length;
    const [tx, ty] = worldToCanvas(view, cx, cy);
    ctx.fillStyle = "#cfd8e3";
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(b.action, tx, ty);
  }

  if (model.trace.length > 1) {
    ctx.strokeStyle = "#53c078";
    ctx.lineWidth = 2;
    tracePath(ctx, view, model.trace, false);
    ctx.stroke();
  }

  if (model.tcp) {
    const [x, y] = worldToCanvas(view, model.tcp[0], model.tcp[1]);
    ctx.fillStyle = "#6fe09a";
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }

  if (model.follower && model.tcp) {
    const [x, y] = worldToCanvas(view, model.follower[0], model.follower[1]);
    ctx.strokeStyle = "#9a86d6";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.arc(x, y, 8, 0, 2 * Math.PI);
    ctx.stroke();
    if (model.standoffMm !== null) {
      ctx.fillStyle = "#9a86d6";
      ctx.font = "11px sans-serif";
      ctx.textAlign = "left";
      ctx.fillText(`standoff ${model.standoffMm.toFixed(1)} mm`, x + 12, y);
    }
  }

  if (model.faultToast) {
    ctx.fillStyle = "#b3362f";
    ctx.fillRect(10, 10, 280, 28);
    ctx.fillStyle = "#ffffff";
    ctx.font = "13px sans-serif";
    ctx.textAlign = "left";
    ctx.textBaseline = "middle";
    ctx.fillText(model.faultToast, 18, 24);
  }

  if (model.banner) {
    ctx.fillStyle = "rgba(20, 24, 31, 0.85)";
    ctx.fillRect(0, view.height / 2 - 22, view.width, 44);
    ctx.fillStyle = "#e0b14c";
    ctx.font = "15px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(model.banner, view.width / 2, view.height / 2);
  }
}
