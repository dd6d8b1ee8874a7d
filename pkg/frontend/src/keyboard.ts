/** Keyboard-first grading: A/B/C/D grade the focused candidate, N toggles
 * none-of-the-above, Backspace clears, arrows move focus. */
import { clearGrade, setGrade, toggleNone, type PoolView } from "./state.js";
import type { Grade } from "./types.js";

export interface KeyResult {
  view: PoolView;
  focusIndex: number;
}

const GRADE_KEYS: Record<string, Grade> = { a: "A", b: "B", c: "C", d: "D" };

export function handleKey(view: PoolView, focusIndex: number, key: string): KeyResult {
  const lower = key.toLowerCase();
  const n = view.candidates.length;
  const focused = view.candidates[focusIndex];

  if (lower in GRADE_KEYS && focused) {
    // Grading advances focus so a pool can be worked top to bottom.
    return {
      view: setGrade(view, focused.candidate_id, GRADE_KEYS[lower]),
      focusIndex: Math.min(focusIndex + 1, n - 1),
    };
  }
  if (lower === "n") {
    return { view: toggleNone(view), focusIndex };
  }
  if (lower === "backspace" && focused) {
    return { view: clearGrade(view, focused.candidate_id), focusIndex };
  }
  if (lower === "arrowdown" || lower === "j") {
    return { view, focusIndex: Math.min(focusIndex + 1, n - 1) };
  }
  if (lower === "arrowup" || lower === "k") {
    return { view, focusIndex: Math.max(focusIndex - 1, 0) };
  }
  return { view, focusIndex };
}
