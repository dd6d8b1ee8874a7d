/** Pure view-model for one pool being graded.
 *
 * All invariants the server enforces are mirrored here, so the UI can never
 * build a payload the service would reject:
 *   - none-of-the-above is mutually exclusive with any A grade;
 *   - submission needs at least one grade or the none-of-the-above toggle.
 */
import type {
  AnnotationRecord,
  CandidateView,
  ContextTurn,
  Grade,
  PoolPayload,
} from "./types.js";

export interface PoolView {
  readonly poolId: string;
  readonly context: readonly ContextTurn[];
  /** Display order is the server's shuffle; the client never reorders. */
  readonly candidates: readonly CandidateView[];
  readonly grades: ReadonlyMap<string, Grade>;
  readonly noneOfTheAbove: boolean;
  readonly leaseExpiry: string | null;
}

export function fromPayload(payload: PoolPayload): PoolView {
  return {
    poolId: payload.pool_id,
    context: payload.context,
    candidates: payload.candidates,
    grades: new Map(),
    noneOfTheAbove: false,
    leaseExpiry: payload.lease_expiry,
  };
}

function withGrades(
  view: PoolView,
  grades: Map<string, Grade>,
  noneOfTheAbove: boolean,
): PoolView {
  return { ...view, grades, noneOfTheAbove };
}

/** Set a grade. Choosing A is an explicit vote, so it unchecks none-of-the-above. */
export function setGrade(view: PoolView, candidateId: string, grade: Grade): PoolView {
  if (!view.candidates.some((c) => c.candidate_id === candidateId)) {
    return view;
  }
  const grades = new Map(view.grades);
  grades.set(candidateId, grade);
  const none = grade === "A" ? false : view.noneOfTheAbove;
  return withGrades(view, grades, none);
}

export function clearGrade(view: PoolView, candidateId: string): PoolView {
  if (!view.grades.has(candidateId)) {
    return view;
  }
  const grades = new Map(view.grades);
  grades.delete(candidateId);
  return withGrades(view, grades, view.noneOfTheAbove);
}

export function hasAGrade(view: PoolView): boolean {
  for (const grade of view.grades.values()) {
    if (grade === "A") return true;
  }
  return false;
}

/** The none-of-the-above checkbox is disabled while any A grade stands. */
export function canToggleNone(view: PoolView): boolean {
  return view.noneOfTheAbove || !hasAGrade(view);
}

export function toggleNone(view: PoolView): PoolView {
  if (!view.noneOfTheAbove && hasAGrade(view)) {
    return view; // blocked: mutually exclusive with grade A
  }
  return withGrades(view, new Map(view.grades), !view.noneOfTheAbove);
}

export function canSubmit(view: PoolView): boolean {
  return view.grades.size > 0 || view.noneOfTheAbove;
}

export function toRecord(view: PoolView, annotatorId: string): AnnotationRecord {
  if (!canSubmit(view)) {
    throw new Error("nothing to submit: grade a candidate or pick none-of-the-above");
  }
  if (view.noneOfTheAbove && hasAGrade(view)) {
    throw new Error("none-of-the-above cannot be combined with an A grade");
  }
  return {
    v: 1,
    pool_id: view.poolId,
    grades: Object.fromEntries(view.grades),
    none_of_the_above: view.noneOfTheAbove,
    annotator_id: annotatorId,
    timestamp: new Date().toISOString(),
  };
}
