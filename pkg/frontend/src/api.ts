import type { ApiError, PatientForm, RecommendResponse } from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string; signal?: AbortSignal },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class RequestFailed extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly fields: Record<string, string> = {},
  ) {
    super(message);
  }
}

/** Network-level failure (the service never answered). */
export class Unreachable extends Error {}

export interface Client {
  recommend(patient: PatientForm, topK: number): Promise<RecommendResponse>;
  /** True while a request is still being awaited. */
  inFlight(): boolean;
}

/**
 * At most one request at a time: a new submit aborts the previous one.
 * Aborted calls reject with DOMException("AbortError") which callers
 * are expected to swallow (the newer request supersedes them).
 */
export function createClient(fetchImpl: FetchLike, base = ""): Client {
  let controller: AbortController | null = null;
  let pending = 0;

  async function recommend(patient: PatientForm, topK: number): Promise<RecommendResponse> {
    controller?.abort();
    controller = new AbortController();
    const signal = controller.signal;
    pending += 1;
    try {
      let res;
      try {
        res = await fetchImpl(`${base}/v1/recommend`, {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify({ patient, top_k: topK, top_evidence: 3 }),
          signal,
        });
      } catch (err) {
        if (err instanceof Error && err.name === "AbortError") throw err;
        throw new Unreachable(err instanceof Error ? err.message : String(err));
      }
      const payload = (await res.json()) as RecommendResponse | ApiError;
      if (!res.ok) {
        const envelope = payload as ApiError;
        throw new RequestFailed(
          envelope.error?.message ?? `request failed (${res.status})`,
          res.status,
          envelope.error?.fields ?? {},
        );
      }
      return payload as RecommendResponse;
    } finally {
      pending -= 1;
    }
  }

  return { recommend, inFlight: () => pending > 0 };
}
