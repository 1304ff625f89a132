/** Wire types for the review-service API. */

export type QueueTask = "annotation" | "posthoc" | "leak_triage";

export interface QueueItem {
  doc_id: string;
  summary_text: string;
  task: QueueTask;
  /** Present only on post-hoc items; hidden from the DOM until submission. */
  probability?: number | null;
}

export interface QueueResponse {
  task: QueueTask;
  items: QueueItem[];
  remaining: number;
}

export interface LabelIn {
  doc_id: string;
  label: 0 | 1;
  annotator: string;
  status: "single" | "consensus";
}

export interface LabelRecord extends LabelIn {
  timestamp: string;
}

export type LeakVerdict = "confirmed" | "dismissed";

export interface LeakHit {
  id: string;
  doc_id: string;
  kind: string;
  surface: string;
  start: number;
  end: number;
  similarity: number;
  verdict?: LeakVerdict | null;
  context?: string;
}

export type EntityVerdict = "allow" | "redact";

export interface EntityCandidate {
  surface: string;
  frequency: number;
  verdict: EntityVerdict | null;
}

export interface CalibrationRow {
  bin_center: number;
  observed_rate: number;
  ci_low: number;
  ci_high: number;
  n: number;
}

export interface CalibrationResponse {
  rows: CalibrationRow[];
  n_scored: number;
}

export interface HealthResponse {
  status: string;
  corpus_size: number;
}

export interface ConflictBody {
  error: string;
  existing: EntityVerdict;
  requested: EntityVerdict;
}
