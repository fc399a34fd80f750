/** Wire types for the review API served by `attrqa serve-review`. */

export interface SampleSummary {
  id: string;
  question: string;
  hop_count: number;
  annotated: boolean;
}

export interface SamplePage {
  total: number;
  page: number;
  page_size: number;
  samples: SampleSummary[];
}

export interface QuoteSpan {
  text: string;
  doc: number;
  start: number;
  end: number;
}

export interface StepView {
  claim: string;
  citations: number[];
  quotes: QuoteSpan[];
}

export interface DocumentView {
  index: number;
  title: string;
  body: string;
  is_supporting: boolean;
}

export interface SamplePayload {
  id: string;
  question: string;
  hop_count: number;
  answer: string;
  chain_answer: string;
  documents: DocumentView[];
  steps: StepView[];
}

export type ErrorCategory = "DisorderedSteps" | "MissingSteps" | "IncorrectSteps";

export const ERROR_CATEGORIES: ErrorCategory[] = [
  "DisorderedSteps",
  "MissingSteps",
  "IncorrectSteps",
];

export interface AnnotationSubmit {
  sample_id: string;
  faithful: boolean;
  error_category: ErrorCategory | null;
  shortcut: boolean;
  annotator_id: string;
}

export interface AssessmentSummary {
  total_annotations: number;
  unfaithful_fraction: number;
  category_split: Partial<Record<ErrorCategory, number>>;
  shortcut_fraction: number;
  per_hop_unfaithful: Record<string, number>;
}

export interface ListFilter {
  hop?: number;
  status?: "annotated" | "unannotated";
  annotator?: string;
  page?: number;
  pageSize?: number;
}
