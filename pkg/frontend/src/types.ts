// Wire types for the curation service API; field names are the contract.

export type Verdict = 'accept' | 'reject' | 'flag';

export type DiscrepancyLabel =
  | 'NuanceLoss'
  | 'DifferentMeaning'
  | 'Ambiguous'
  | 'MissingContext'
  | 'SimilarContextDistinctMeaning'
  | 'Accurate';

// Keyboard digits 1-5 map to the five defect labels, in taxonomy order
export const DEFECT_LABELS: readonly DiscrepancyLabel[] = [
  'NuanceLoss',
  'DifferentMeaning',
  'Ambiguous',
  'MissingContext',
  'SimilarContextDistinctMeaning',
];

export interface ReviewCard {
  pair_id: string;
  src: string;
  tgt: string;
  score?: number;
  lease_expiry: string;
}

export interface QueueStats {
  pending: number;
  leased: number;
  decided: number;
  per_label: Record<string, number>;
  defect_rate: number;
}

export interface DecisionBody {
  pair_id: string;
  verdict: Verdict;
  label?: DiscrepancyLabel;
  reviewer: string;
  note?: string;
}

export type NextResult = { kind: 'card'; card: ReviewCard } | { kind: 'done' };

export type SubmitResult = 'ok' | 'conflict';
