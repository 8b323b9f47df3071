// JSON shapes served by the review API.

export type Verdict = 'accept' | 'reject' | 'flag';
export type Status = 'pending' | 'accepted' | 'rejected' | 'flagged';

export const FAILURE_MODES = [
  'wrong_hand',
  'occluded_hand',
  'noisy_contact_frame',
  'homography_drift',
  'other',
] as const;

export type FailureMode = (typeof FAILURE_MODES)[number];

export interface QueueItem {
  id: string;
  instruction: string;
  status: Status;
  thumbnail_url: string;
}

export interface QueuePage {
  items: QueueItem[];
  cursor: string | null;
}

export interface DecisionRecord {
  sample_id: string;
  verdict: Verdict;
  failure_mode: FailureMode | null;
  reviewer: string;
  timestamp: number;
}

export interface SampleDetail extends QueueItem {
  source: string;
  direction_label: string | null;
  has_heatmap: boolean;
  image_url: string;
  overlay_url: string | null;
  decision: DecisionRecord | null;
  provenance: Record<string, unknown> | null;
}

export interface Stats {
  status: Record<Status, number>;
  failure_modes: Record<FailureMode, number>;
}
