// Payload shapes of the authoring API. All span offsets are UTF-8 byte
// offsets; the server is byte-authoritative and the client converts to
// character positions only for rendering.

export interface DomainInfo {
  id: number;
  name: string;
  library_name: string;
  language: string;
}

export interface UseCaseRow {
  id: number;
  ordinal: number;
  description: string;
  program_id: number | null;
}

export interface ProgramRow {
  id: number;
  use_case_id: number | null;
  annotated_source: string;
  syntactically_valid: boolean;
  origin: string;
}

export interface ByteSpan {
  start: number;
  end: number;
  note: string | null;
}

export interface PlanResource {
  id: number;
  domain_id: number;
  name: string;
  goal: string;
  solution: string;
  changeable_areas: ByteSpan[];
  provenance: string;
  source_id: number | null;
  candidate_id: number | null;
  canvas_x: number;
  canvas_y: number;
  group_id: number | null;
  version: number;
}

export interface GroupResource {
  id: number;
  name: string;
  plan_ids: number[];
}

export interface CandidateSuggestion {
  id: number;
  name: string;
  pending_name: boolean;
  size: number;
  representative: {
    snippet_id: number;
    program_id: number;
    goal: string;
    code: string;
    spans: ByteSpan[];
  };
}

export interface SimilarValues {
  component: string;
  values: string[];
}

export interface ApiErrorBody {
  code: number;
  message: string;
}

export type PlanPatch = Partial<{
  name: string;
  goal: string;
  solution: string;
  canvas_x: number;
  canvas_y: number;
}> & { version: number };
