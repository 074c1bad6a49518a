import { createClient, RequestFailed, Unreachable } from "./api.js";
import { diffTopK } from "./diff.js";
import { canSubmit, toPatient, type FormValues } from "./form.js";
import { renderDropped, renderFieldErrors, renderResults } from "./render.js";
import type { RecommendResponse } from "./types.js";

const client = createClient((input, init) => fetch(input, init));

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

function readForm(): FormValues {
  return {
    age: ($("age") as HTMLInputElement).value,
    sex: ($("sex") as HTMLSelectElement).value,
    disease: ($("disease") as HTMLInputElement).value,
    pregnant: ($("tag-pregnant") as HTMLInputElement).checked,
    breastfeeding: ($("tag-breastfeeding") as HTMLInputElement).checked,
    reducedLiver: ($("tag-liver") as HTMLInputElement).checked,
    reducedRenal: ($("tag-renal") as HTMLInputElement).checked,
    allergies: ($("allergies") as HTMLInputElement).value,
    symptoms: ($("symptoms") as HTMLInputElement).value,
    pastDiseases: ($("past-diseases") as HTMLInputElement).value,
    concomitant: ($("concomitant") as HTMLInputElement).value,
  };
}

// The previous successful response; what-if diffs are computed against it.
let lastResponse: RecommendResponse | null = null;

function topIds(res: RecommendResponse): string[] {
  return res.recommendations.map((d) => d.drug_id);
}

async function submit(isWhatIf: boolean): Promise<void> {
  const values = readForm();
  if (!canSubmit(values)) return;
  $("errors").innerHTML = "";
  $("banner").hidden = true;
  try {
    const res = await client.recommend(toPatient(values), 5);
    const diff = isWhatIf && lastResponse ? diffTopK(topIds(lastResponse), topIds(res)) : undefined;
    $("results").innerHTML = renderResults(res, diff);
    const droppedBox = $("dropped");
    if (diff && lastResponse) {
      droppedBox.innerHTML = renderDropped(diff, lastResponse);
      droppedBox.parentElement!.toggleAttribute("hidden", diff.dropped.length === 0);
    } else {
      droppedBox.innerHTML = "";
      droppedBox.parentElement!.toggleAttribute("hidden", true);
    }
    lastResponse = res;
  } catch (err) {
    if (err instanceof Error && err.name === "AbortError") return; // superseded
    if (err instanceof RequestFailed) {
      $("errors").innerHTML = renderFieldErrors(
        Object.keys(err.fields).length ? err.fields : { request: err.message },
      );
    } else if (err instanceof Unreachable) {
      $("banner").hidden = false; // retry banner
    } else {
      throw err;
    }
  }
}

function refreshSubmitState(): void {
  ($("submit") as HTMLButtonElement).disabled = !canSubmit(readForm());
}

export function wire(): void {
  $("patient-form").addEventListener("submit", (e) => {
    e.preventDefault();
    void submit(lastResponse !== null);
  });
  $("disease").addEventListener("input", refreshSubmitState);
  $("retry").addEventListener("click", () => void submit(lastResponse !== null));
  refreshSubmitState();
}

if (typeof document !== "undefined" && document.getElementById("patient-form")) {
  wire();
}
