import pytest

from rxgraph.errors import ParseError, ValidationError
from rxgraph.patient import (PatientEHR, dump_dataset, load_dataset,
                             patient_from_json)


def _obj(**kw):
    base = {"age": 30, "sex": "female", "current_disease": "dis_gout"}
    base.update(kw)
    return base


def test_minimal_object_accepted():
    p = patient_from_json(_obj())
    assert (p.age, p.sex, p.current_disease) == (30, "female", "dis_gout")
    assert p.ground_truth_drugs == []


def test_all_field_errors_collected_at_once():
    with pytest.raises(ValidationError) as exc:
        patient_from_json({"age": -1, "sex": "robot", "current_disease": "",
                           "allergies": "nope"})
    fields = exc.value.fields
    assert set(fields) == {"age", "sex", "current_disease", "allergies"}


def test_age_rejects_bool_and_float():
    with pytest.raises(ValidationError):
        patient_from_json(_obj(age=True))
    with pytest.raises(ValidationError):
        patient_from_json(_obj(age=30.0))


def test_unknown_population_tag_rejected():
    with pytest.raises(ValidationError) as exc:
        patient_from_json(_obj(population_tags=["smoker"]))
    assert "population_tags" in exc.value.fields


def test_require_truth_flag():
    with pytest.raises(ValidationError) as exc:
        patient_from_json(_obj(), require_truth=True)
    assert "ground_truth_drugs" in exc.value.fields
    p = patient_from_json(_obj(ground_truth_drugs=["D001"]), require_truth=True)
    assert p.ground_truth_drugs == ["D001"]


def test_non_dict_rejected():
    with pytest.raises(ValidationError):
        patient_from_json(["not", "a", "dict"])


def test_truth_omitted_from_json_when_empty():
    p = PatientEHR(age=5, sex="male", current_disease="d")
    assert "ground_truth_drugs" not in p.to_json()
    p.ground_truth_drugs = ["D9"]
    assert p.to_json()["ground_truth_drugs"] == ["D9"]


def test_dataset_round_trip(tmp_path):
    patients = [
        PatientEHR(age=30, sex="female", current_disease="dis_gout",
                   patient_id="p0", population_tags=["pregnant"],
                   symptoms=["joint pain"], ground_truth_drugs=["D001"]),
        PatientEHR(age=70, sex="male", current_disease="dis_hypertension",
                   patient_id="p1", concomitant_drugs=["D001"],
                   ground_truth_drugs=["D003"]),
    ]
    path = tmp_path / "split.jsonl"
    dump_dataset(patients, path)
    loaded = load_dataset(path)
    assert [p.to_json() for p in loaded] == [p.to_json() for p in patients]


def test_load_dataset_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"age": 30, "sex": "female", "current_disease": "d", '
                    '"ground_truth_drugs": ["D1"]}\n{"age": -2}\n')
    with pytest.raises(ParseError) as exc:
        load_dataset(path)
    assert exc.value.line_no == 2


def test_load_dataset_without_truth(tmp_path):
    path = tmp_path / "infer.jsonl"
    path.write_text('{"age": 30, "sex": "female", "current_disease": "d"}\n')
    assert load_dataset(path, require_truth=False)[0].current_disease == "d"
    with pytest.raises(ParseError):
        load_dataset(path, require_truth=True)
