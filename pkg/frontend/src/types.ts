/** Wire types for the /v1 JSON API (shape mirrors the service responses). */

export interface PatientForm {
  age: number;
  sex: string;
  current_disease: string;
  population_tags: string[];
  allergies: string[];
  symptoms: string[];
  past_diseases: string[];
  concomitant_drugs: string[];
}

export interface Evidence {
  node_index: number;
  source_drug_id: string;
  score: number;
  text: string;
}

export interface RecommendedDrug {
  rank: number;
  drug_id: string;
  label: string;
  score: number;
  evidence: Evidence[];
}

export interface GraphNodePayload {
  index: number;
  kind: string;
  entity_id: string;
  text: string;
}

export interface RecommendResponse {
  patient: Record<string, unknown>;
  candidates: { bm25_top: [string, number][]; concomitant: string[] };
  ranking: [string, number][];
  recommendations: RecommendedDrug[];
  graph: { nodes: GraphNodePayload[]; edges: [number, number][] };
  model: Record<string, unknown>;
}

export interface FieldErrors {
  [field: string]: string;
}

/** Error envelope the service uses for 4xx responses. */
export interface ApiError {
  error: { message: string; fields?: FieldErrors };
}
