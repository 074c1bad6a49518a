import { describe, expect, it } from "vitest";

import { createClient, RequestFailed, Unreachable, type FetchLike } from "../src/api.js";
import type { PatientForm } from "../src/types.js";

const patient: PatientForm = {
  age: 30,
  sex: "female",
  current_disease: "DIS00003",
  population_tags: [],
  allergies: [],
  symptoms: [],
  past_diseases: [],
  concomitant_drugs: [],
};

const okBody = { recommendations: [], ranking: [] };

function respondWith(status: number, body: unknown) {
  return { ok: status < 400, status, json: async () => body };
}

describe("createClient", () => {
  it("aborts the previous request when a new one is submitted", async () => {
    const settlers: Array<() => void> = [];
    const fake: FetchLike = (_url, init) =>
      new Promise((resolve, reject) => {
        init?.signal?.addEventListener("abort", () =>
          reject(new DOMException("aborted", "AbortError")),
        );
        settlers.push(() => resolve(respondWith(200, okBody)));
      });
    const client = createClient(fake);

    const first = client.recommend(patient, 5);
    const second = client.recommend(patient, 5);
    expect(client.inFlight()).toBe(true);

    await expect(first).rejects.toHaveProperty("name", "AbortError");
    settlers[1]();
    await expect(second).resolves.toMatchObject(okBody);
    expect(client.inFlight()).toBe(false);
  });

  it("turns a 400 envelope into RequestFailed with field details", async () => {
    const fake: FetchLike = async () =>
      respondWith(400, {
        error: { message: "invalid request", fields: { "patient.age": "must be >= 0" } },
      });
    const client = createClient(fake);
    const err = await client.recommend(patient, 5).catch((e) => e);
    expect(err).toBeInstanceOf(RequestFailed);
    expect(err.status).toBe(400);
    expect(err.fields["patient.age"]).toBe("must be >= 0");
  });

  it("maps network failure onto Unreachable (retry banner case)", async () => {
    const fake: FetchLike = async () => {
      throw new TypeError("fetch failed");
    };
    const client = createClient(fake);
    await expect(client.recommend(patient, 5)).rejects.toBeInstanceOf(Unreachable);
  });

  it("posts the form with top_k and evidence limits", async () => {
    let captured: string | undefined;
    const fake: FetchLike = async (_url, init) => {
      captured = init?.body;
      return respondWith(200, okBody);
    };
    await createClient(fake).recommend(patient, 5);
    const sent = JSON.parse(captured ?? "{}");
    expect(sent.patient).toEqual(patient);
    expect(sent.top_k).toBe(5);
    expect(sent.top_evidence).toBe(3);
  });
});
