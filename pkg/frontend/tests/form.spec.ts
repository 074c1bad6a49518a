import { describe, expect, it } from "vitest";

import { canSubmit, splitList, toPatient, type FormValues } from "../src/form.js";

const base: FormValues = {
  age: "30",
  sex: "female",
  disease: "DIS00003",
  pregnant: false,
  breastfeeding: false,
  reducedLiver: false,
  reducedRenal: false,
  allergies: "",
  symptoms: "",
  pastDiseases: "",
  concomitant: "",
};

describe("canSubmit", () => {
  it("requires a non-blank disease", () => {
    expect(canSubmit(base)).toBe(true);
    expect(canSubmit({ ...base, disease: "" })).toBe(false);
    expect(canSubmit({ ...base, disease: "   " })).toBe(false);
  });
});

describe("splitList", () => {
  it("trims entries and drops blanks", () => {
    expect(splitList("cough, fever , ,chills")).toEqual(["cough", "fever", "chills"]);
    expect(splitList("")).toEqual([]);
  });
});

describe("toPatient", () => {
  it("collects checked population tags in a fixed order", () => {
    const p = toPatient({ ...base, pregnant: true, reducedRenal: true });
    expect(p.population_tags).toEqual(["pregnant", "reduced_renal"]);
  });

  it("parses age and comma lists", () => {
    const p = toPatient({
      ...base,
      age: "42",
      symptoms: "joint pain, stiffness",
      concomitant: "DRG00000",
    });
    expect(p.age).toBe(42);
    expect(p.symptoms).toEqual(["joint pain", "stiffness"]);
    expect(p.concomitant_drugs).toEqual(["DRG00000"]);
  });
});
