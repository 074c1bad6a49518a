"""Patient health records: the EHR type, validation, and JSONL dataset IO."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError
from .kg import is_population_tag

SEXES = ("male", "female")


@dataclass
class PatientEHR:
    """One (synthetic) patient record.

    ``ground_truth_drugs`` is present in benchmark records and absent at
    inference time. Entity-valued fields hold KG ids, not labels.
    """

    age: int
    sex: str
    current_disease: str
    patient_id: str = ""
    population_tags: list[str] = field(default_factory=list)
    allergies: list[str] = field(default_factory=list)
    symptoms: list[str] = field(default_factory=list)
    past_diseases: list[str] = field(default_factory=list)
    concomitant_drugs: list[str] = field(default_factory=list)
    ground_truth_drugs: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        obj = {
            "patient_id": self.patient_id,
            "age": self.age,
            "sex": self.sex,
            "population_tags": list(self.population_tags),
            "allergies": list(self.allergies),
            "current_disease": self.current_disease,
            "symptoms": list(self.symptoms),
            "past_diseases": list(self.past_diseases),
            "concomitant_drugs": list(self.concomitant_drugs),
        }
        if self.ground_truth_drugs:
            obj["ground_truth_drugs"] = list(self.ground_truth_drugs)
        return obj


def patient_from_json(obj: dict, require_truth: bool = False) -> PatientEHR:
    """Build a validated :class:`PatientEHR` from a JSON object.

    Collects every field problem into one :class:`ValidationError` so API
    clients get all messages at once, keyed by field path.
    """
    errors: dict[str, str] = {}
    if not isinstance(obj, dict):
        raise ValidationError({"": "patient must be a JSON object"})

    age = obj.get("age")
    if not isinstance(age, int) or isinstance(age, bool) or age < 0:
        errors["age"] = "must be a non-negative integer"
    sex = obj.get("sex")
    if sex not in SEXES:
        errors["sex"] = f"must be one of {SEXES}"
    disease = obj.get("current_disease")
    if not isinstance(disease, str) or not disease.strip():
        errors["current_disease"] = "must be a non-empty disease id"

    def str_list(key):
        val = obj.get(key, [])
        if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
            errors[key] = "must be a list of strings"
            return []
        return list(val)

    tags = str_list("population_tags")
    for tag in tags:
        if not is_population_tag(tag):
            errors["population_tags"] = f"unknown population tag: {tag!r}"
    allergies = str_list("allergies")
    symptoms = str_list("symptoms")
    past = str_list("past_diseases")
    concomitant = str_list("concomitant_drugs")
    truth = str_list("ground_truth_drugs")
    if require_truth and not truth:
        errors["ground_truth_drugs"] = "benchmark records must list ground-truth drugs"

    if errors:
        raise ValidationError(errors)
    return PatientEHR(
        age=age, sex=sex, current_disease=disease,
        patient_id=str(obj.get("patient_id", "")),
        population_tags=tags, allergies=allergies, symptoms=symptoms,
        past_diseases=past, concomitant_drugs=concomitant,
        ground_truth_drugs=truth,
    )


def load_dataset(path, require_truth: bool = True) -> list[PatientEHR]:
    """Read a JSONL benchmark split."""
    patients = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
            try:
                patients.append(patient_from_json(obj, require_truth=require_truth))
            except ValidationError as exc:
                raise ParseError(str(exc), line_no) from exc
    return patients


def dump_dataset(patients, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in patients:
            fh.write(json.dumps(p.to_json(), ensure_ascii=False) + "\n")
