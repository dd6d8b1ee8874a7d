/** Wire types, mirroring the annotation service's JSON payloads exactly. */

export type Grade = "A" | "B" | "C" | "D";

export const GRADES: readonly Grade[] = ["A", "B", "C", "D"];

/** Tooltip text shown on the grade buttons, per the annotation guidelines. */
export const GRADE_HINTS: Record<Grade, string> = {
  A: "I would use this response",
  B: "This response could be used",
  C: "This response would be okay in another context",
  D: "I would not use this response",
};

export interface ContextTurn {
  speaker: string;
  text: string;
}

export interface CandidateView {
  candidate_id: string;
  text: string;
  /** Present only when the server is configured to show RG badges. */
  rg_name?: string;
}

/** Body of GET /v1/annotation/next when work is available. */
export interface PoolPayload {
  pool_id: string;
  shuffle_seed: number | null;
  lease_expiry: string | null;
  context: ContextTurn[];
  candidates: CandidateView[];
  none_of_the_above_available: boolean;
}

/** Body of POST /v1/annotation. */
export interface AnnotationRecord {
  v: 1;
  pool_id: string;
  grades: Record<string, Grade>;
  none_of_the_above: boolean;
  annotator_id: string;
  timestamp: string;
}
