/** Shared hand-written frames for the unit tests. */

import type { SessionInfo, StateFrame } from "../src/protocol.js";

export function fakeSession(mode: SessionInfo["mode"] = "cobotar"): SessionInfo {
  return {
    mode,
    rate_hz: 50,
    speed_mm_s: 25,
    vmax_mm_s: 25,
    standoff_m: 0.6,
    task: { center_mm: [-381.75, -298.15], side_mm: 150 },
    workspace_mm: [400, 400],
    layout: {
      buttons: [
        { id: "+y", rect: [60, 80, 40, 40], action: "+y" },
        { id: "-y", rect: [60, 0, 40, 40], action: "-y" },
        { id: "+x", rect: [120, 40, 40, 40], action: "+x" },
        { id: "-x", rect: [0, 40, 40, 40], action: "-x" },
      ],
      extent_mm: [160, 120],
    },
  };
}

export function fakeState(overrides: Partial<StateFrame> = {}): StateFrame {
  return {
    v: 1,
    seq: 2,
    type: "state",
    t: 0.02,
    mode: "cobotar",
    q: [0, 0, 0, 0, 0, 0],
    tcp: [-0.45675, -0.22315, 0.0665],
    target: { p: [-0.12176, -0.4, 0.15185] },
    follower: { p: [-0.12176, -0.4, 0.75185] },
    gui_buttons: [
      {
        id: "+y",
        action: "+y",
        rect_mm: [60, 80, 40, 40],
        quad: [
          [-0.14, -0.36, 0.15],
          [-0.1, -0.36, 0.15],
          [-0.1, -0.32, 0.15],
          [-0.14, -0.32, 0.15],
        ],
        active: false,
      },
      {
        id: "-y",
        action: "-y",
        rect_mm: [60, 0, 40, 40],
        quad: [
          [-0.14, -0.44, 0.15],
          [-0.1, -0.44, 0.15],
          [-0.1, -0.4, 0.15],
          [-0.14, -0.4, 0.15],
        ],
        active: false,
      },
      {
        id: "+x",
        action: "+x",
        rect_mm: [120, 40, 40, 40],
        quad: [
          [-0.08, -0.4, 0.15],
          [-0.04, -0.4, 0.15],
          [-0.04, -0.36, 0.15],
          [-0.08, -0.36, 0.15],
        ],
        active: false,
      },
      {
        id: "-x",
        action: "-x",
        rect_mm: [0, 40, 40, 40],
        quad: [
          [-0.2, -0.4, 0.15],
          [-0.16, -0.4, 0.15],
          [-0.16, -0.36, 0.15],
          [-0.2, -0.36, 0.15],
        ],
        active: false,
      },
    ],
    active_button: null,
    gui_to_cam: [1 / 160, 0, 0, 0, 1 / 120, 0, 0, 0, 1],
    trace_tail: [
      [-456.75, -223.15],
      [-450.0, -223.15],
    ],
    ...overrides,
  };
}
