/**
 * Browser entry point. One WebSocket, one latest-snapshot buffer, one
 * requestAnimationFrame loop. Configuration comes from the URL query:
 * `?port=8765&mode=gamepad`.
 */

import {
  decodeServerFrame,
  MODES,
  type Action,
  type Mode,
  type ServerFrame,
  type SessionInfo,
} from "./protocol.js";
import { SnapshotBuffer } from "./snapshot.js";
import { buildSceneModel, drawScene, type Viewport } from "./scene.js";
import { InputBindings } from "./inputs.js";
import { SquareDriver } from "./driver.js";

const FAULT_TOAST_MS = 2500;

function queryConfig(): { port: number; mode: Mode | null } {
  const params = new URLSearchParams(window.location.search);
  const port = Number(params.get("port") ?? "8765");
  const modeRaw = params.get("mode");
  const mode = MODES.includes(modeRaw as Mode) ? (modeRaw as Mode) : null;
  return { port, mode };
}

function main(): void {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const statusEl = document.getElementById("status")!;
  const { port, mode: modeWanted } = queryConfig();

  const buffer = new SnapshotBuffer();
  let session: SessionInfo | null = null;
  let connected = false;
  let lastSeq: number | null = null;
  let faultToast: string | null = null;
  let faultShownAt = 0;
  let taskRunning = false;
  let driver: SquareDriver | null = null;

  const ws = new WebSocket(`ws://${window.location.hostname || "127.0.0.1"}:${port}`);
  const bindings = new InputBindings((text) => ws.send(text), "cobotar");

  function onFrame(frame: ServerFrame): void {
    switch (frame.type) {
      case "hello":
        session = frame.session;
        bindings.syncMode(session.mode);
        buffer.clear();
        taskRunning = false;
        statusEl.textContent = `mode ${session.mode}, ${session.rate_hz} Hz`;
        if (driver !== null) {
          driver = new SquareDriver(session.mode);
          driver.begin(session);
        }
        break;
      case "state":
        buffer.push(frame);
        if (driver !== null) {
          for (const msg of driver.onState(frame, performance.now())) {
            ws.send(bindings.sender.encode(msg.type, msg.fields));
          }
          if (driver.done()) {
            driver = null;
            if (taskRunning) {
              bindings.taskMarker("end");
              taskRunning = false;
            }
          }
        }
        break;
      case "press_event":
        buffer.applyPress(frame);
        break;
      case "fault":
        faultToast = `fault: ${frame.reason}`;
        faultShownAt = performance.now();
        break;
      case "error":
        statusEl.textContent = `server error: ${frame.message}`;
        break;
      case "task_marker":
        break;
    }
  }

  ws.addEventListener("open", () => {
    connected = true;
    bindings.setEnabled(true);
    if (modeWanted !== null) {
      bindings.setMode(modeWanted);
    }
  });
  ws.addEventListener("close", () => {
    connected = false;
    bindings.setEnabled(false);
  });
  ws.addEventListener("message", (ev) => {
    try {
      const frame = decodeServerFrame(String(ev.data), lastSeq);
      lastSeq = frame.seq;
      onFrame(frame);
    } catch (e) {
      statusEl.textContent = `protocol error: ${String(e)}`;
      ws.close();
    }
  });

  // pointer -> hand frames (cobotar); the canvas doubles as the camera view
  canvas.addEventListener("pointermove", (ev) => {
    const rect = canvas.getBoundingClientRect();
    bindings.pointerMove(
      (ev.clientX - rect.left) / rect.width,
      (ev.clientY - rect.top) / rect.height,
      performance.now(),
    );
  });
  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) {
      return;
    }
    if (ev.key === " ") {
      const g = bindings.toggleGesture();
      statusEl.textContent = `gesture ${g}`;
      ev.preventDefault();
    }
    const pendantKeys: Record<string, Action> = {
      ArrowUp: "+y",
      ArrowDown: "-y",
      ArrowRight: "+x",
      ArrowLeft: "-x",
    };
    const action = pendantKeys[ev.key];
    if (action) {
      bindings.pendantPress(action);
      ev.preventDefault();
    }
  });
  window.addEventListener("keyup", (ev) => {
    const pendantKeys: Record<string, Action> = {
      ArrowUp: "+y",
      ArrowDown: "-y",
      ArrowRight: "+x",
      ArrowLeft: "-x",
    };
    const action = pendantKeys[ev.key];
    if (action) {
      bindings.pendantRelease(action);
    }
  });

  // on-screen controls
  for (const m of MODES) {
    document.getElementById(`mode-${m}`)?.addEventListener("click", () => {
      bindings.setMode(m);
    });
  }
  document.getElementById("task-toggle")?.addEventListener("click", () => {
    bindings.taskMarker(taskRunning ? "end" : "start");
    taskRunning = !taskRunning;
  });
  document.getElementById("autopilot")?.addEventListener("click", () => {
    if (session === null || driver !== null) {
      return;
    }
    if (!taskRunning) {
      bindings.taskMarker("start");
      taskRunning = true;
    }
    driver = new SquareDriver(session.mode);
    driver.begin(session);
  });

  // gamepad poll: physical pad axes or on-screen stick pad
  const stickPad = document.getElementById("stick");
  let padPointer: [number, number] | null = null;
  stickPad?.addEventListener("pointermove", (ev) => {
    const rect = stickPad.getBoundingClientRect();
    padPointer = [
      ((ev.clientX - rect.left) / rect.width) * 2 - 1,
      -(((ev.clientY - rect.top) / rect.height) * 2 - 1),
    ];
  });
  stickPad?.addEventListener("pointerleave", () => {
    padPointer = null;
  });

  function pollInputs(now: number): void {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const pad = pads && pads[0];
    if (pad) {
      bindings.stick(pad.axes[0] ?? 0, -(pad.axes[1] ?? 0), now);
    } else if (padPointer) {
      bindings.stick(padPointer[0], padPointer[1], now);
    }
  }

  const view: Viewport = {
    width: canvas.width,
    height: canvas.height,
    spanMm: 500,
    centerMm: [0, 0],
  };

  function render(now: number): void {
    const snapshot = buffer.latest();
    if (snapshot && session) {
      view.centerMm = session.task.center_mm;
      view.spanMm = Math.max(500, session.task.side_mm * 2.5);
    }
    if (faultToast && now - faultShownAt > FAULT_TOAST_MS) {
      faultToast = null;
    }
    pollInputs(now);
    drawScene(ctx, buildSceneModel({ snapshot, session, connected, faultToast }), view);
    requestAnimationFrame(render);
  }
  requestAnimationFrame(render);
}

main();
