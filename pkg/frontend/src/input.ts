// Keyboard mapping: arrows/WASD move, space grabs, X drops, Enter readies.

export interface InputAction {
  move: number;
  grab: boolean;
  drop: boolean;
}

const MOVE_KEYS: Record<string, number> = {
  arrowup: 1,
  w: 1,
  arrowright: 2,
  d: 2,
  arrowdown: 3,
  s: 3,
  arrowleft: 4,
  a: 4,
};

export function keyToAction(key: string): InputAction | "ready" | null {
  const k = key.toLowerCase();
  if (k === "enter") return "ready";
  if (k === " " || k === "space" || k === "spacebar") {
    return { move: 0, grab: true, drop: false };
  }
  if (k === "x") return { move: 0, grab: false, drop: true };
  if (k in MOVE_KEYS) return { move: MOVE_KEYS[k], grab: false, drop: false };
  return null;
}
