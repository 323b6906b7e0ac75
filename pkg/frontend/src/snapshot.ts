/**
 * Latest-snapshot buffer decoupling the render loop from message
 * arrival. The renderer always draws the newest state; press events
 * are folded into that snapshot immediately so the active-button
 * highlight changes on the very next rendered frame instead of waiting
 * for the next state broadcast.
 */

import type { PressEventFrame, StateFrame } from "./protocol.js";

export class SnapshotBuffer {
  private current: StateFrame | null = null;

  push(state: StateFrame): void {
    this.current = state;
  }

  applyPress(ev: PressEventFrame): void {
    if (this.current === null) {
      return;
    }
    const active = ev.kind === "activated" ? ev.button : null;
    this.current = {
      ...this.current,
      active_button: active,
      gui_buttons: this.current.gui_buttons.map((b) => ({
        ...b,
        active: b.id === active,
      })),
    };
  }

  latest(): StateFrame | null {
    return this.current;
  }

  clear(): void {
    this.current = null;
  }
}
