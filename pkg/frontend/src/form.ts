import type { PatientForm } from "./types.js";

/** Raw string values as read from the form controls. */
export interface FormValues {
  age: string;
  sex: string;
  disease: string;
  pregnant: boolean;
  breastfeeding: boolean;
  reducedLiver: boolean;
  reducedRenal: boolean;
  allergies: string;
  symptoms: string;
  pastDiseases: string;
  concomitant: string;
}

export const splitList = (s: string): string[] =>
  s
    .split(",")
    .map((x) => x.trim())
    .filter((x) => x.length > 0);

/** Disease is the only hard requirement: without it there is no query. */
export const canSubmit = (v: FormValues): boolean => v.disease.trim().length > 0;

export function toPatient(v: FormValues): PatientForm {
  const tags: string[] = [];
  if (v.pregnant) tags.push("pregnant");
  if (v.breastfeeding) tags.push("breastfeeding");
  if (v.reducedLiver) tags.push("reduced_liver");
  if (v.reducedRenal) tags.push("reduced_renal");
  return {
    age: Number.parseInt(v.age, 10),
    sex: v.sex,
    current_disease: v.disease.trim(),
    population_tags: tags,
    allergies: splitList(v.allergies),
    symptoms: splitList(v.symptoms),
    past_diseases: splitList(v.pastDiseases),
    concomitant_drugs: splitList(v.concomitant),
  };
}
