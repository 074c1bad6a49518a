import json

import pytest

from rxgraph.errors import LoadError, NotFoundError, ParseError
from rxgraph.kg import (KGStore, SafeUseRule, is_population_tag,
                        population_tag_sort_key)
from rxgraph.patient import PatientEHR


# -- population tags ----------------------------------------------------------

def test_population_tag_enumeration():
    for tag in ("pregnant", "breastfeeding", "reduced_liver", "reduced_renal",
                "child_below_age(12)", "elderly_above_age(65)"):
        assert is_population_tag(tag)
    for bad in ("smoker", "child_below_age", "child_below_age(x)", "", "PREGNANT"):
        assert not is_population_tag(bad)


def test_tag_sort_key_orders_canonically():
    tags = ["elderly_above_age(65)", "pregnant", "child_below_age(12)",
            "reduced_renal"]
    assert sorted(tags, key=population_tag_sort_key) == [
        "pregnant", "reduced_renal", "child_below_age(12)",
        "elderly_above_age(65)"]


def test_rule_rejects_unknown_tag_and_action():
    with pytest.raises(LoadError):
        SafeUseRule("smoker", "forbid")
    with pytest.raises(LoadError):
        SafeUseRule("pregnant", "avoid")


def test_age_band_rules_use_age_not_tags():
    child = SafeUseRule("child_below_age(12)", "forbid")
    assert child.matches(11, [])
    assert not child.matches(12, [])
    elderly = SafeUseRule("elderly_above_age(65)", "forbid")
    assert elderly.matches(65, [])
    assert not elderly.matches(64, ["elderly_above_age(65)"])  # age wins


def test_simple_rules_use_tag_membership():
    rule = SafeUseRule("pregnant", "forbid")
    assert rule.matches(30, ["pregnant"])
    assert not rule.matches(30, ["breastfeeding"])


# -- store construction -------------------------------------------------------

def test_ddi_symmetrized_at_init(toy_store):
    # D001 listed D002 but not vice versa
    assert "D001" in toy_store.drugs["D002"].interactions
    assert toy_store.has_ddi("D002", "D001")
    assert toy_store.has_ddi("D001", "D002")
    assert not toy_store.has_ddi("D001", "D001")
    assert not toy_store.has_ddi("D001", "D003")


def test_no_dangling_in_toy_store(toy_store):
    assert toy_store.dangling_references == []


def test_dangling_references_collected(toy_store, tmp_path):
    path = tmp_path / "kg.jsonl"
    toy_store.drugs["D003"].treatments.append("dis_missing")
    toy_store.dump(path)
    reloaded = KGStore.load(path)
    assert ("drug", "dis_missing") in reloaded.dangling_references


def test_drugs_treating_reverse_index(toy_store):
    assert toy_store.drugs_treating("dis_gout") == ["D001", "D002"]
    assert toy_store.drugs_treating("dis_ulcer") == []
    with pytest.raises(NotFoundError):
        toy_store.drugs_treating("dis_nope")


def test_label_and_kind_lookup(toy_store):
    assert toy_store.label_of("dis_gout") == "gout"
    assert toy_store.label_of("pregnant") == "pregnant"
    assert toy_store.entity_kind("D001") == "drug"
    assert toy_store.entity_kind("ing_lactose") == "ingredient"
    assert toy_store.entity_kind("child_below_age(12)") == "contraindication"
    with pytest.raises(NotFoundError):
        toy_store.label_of("XXX")


def test_allergen_pool_sorted_flagged_only(toy_store):
    assert toy_store.allergen_pool() == ["ing_lactose", "ing_uratex"]


# -- load / dump --------------------------------------------------------------

def test_dump_load_round_trip(toy_store, tmp_path):
    path = tmp_path / "kg.jsonl"
    toy_store.dump(path)
    reloaded = KGStore.load(path)
    assert reloaded.stats() == toy_store.stats()
    for drug_id in toy_store.drugs:
        assert reloaded.verbalize(drug_id) == toy_store.verbalize(drug_id)


def test_load_reports_line_number_on_bad_json(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text('{"kind": "disease", "id": "d1", "label": "x"}\n{oops\n')
    with pytest.raises(ParseError) as exc:
        KGStore.load(path)
    assert exc.value.line_no == 2


def test_load_rejects_duplicate_ids(tmp_path):
    rec = {"kind": "disease", "id": "d1", "label": "x"}
    path = tmp_path / "kg.jsonl"
    path.write_text(json.dumps(rec) + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(LoadError, match="duplicate"):
        KGStore.load(path)


def test_load_rejects_unknown_kind_and_missing_fields(tmp_path):
    path = tmp_path / "kg.jsonl"
    path.write_text('{"kind": "potion", "id": "p1", "label": "x"}\n')
    with pytest.raises(ParseError):
        KGStore.load(path)
    path.write_text('{"kind": "drug", "label": "no id"}\n')
    with pytest.raises(ParseError):
        KGStore.load(path)
    path.write_text("")
    with pytest.raises(LoadError, match="no records"):
        KGStore.load(path)


# -- verbalization ------------------------------------------------------------

def test_verbalize_layout_and_mentions(toy_store):
    ev = toy_store.verbalize("D001")
    assert ev.text == ("Treatments: gout | "
                       "Contraindications: peptic ulcer, child_below_age(12) | "
                       "Ingredients: colchinol")
    assert ev.mentioned_entities == (
        "dis_gout", "dis_ulcer", "child_below_age(12)", "ing_colchinol")


def test_verbalize_caution_suffix_and_rule_tags(toy_store):
    ev = toy_store.verbalize("D002")
    assert ("Contraindications: pregnant, reduced_liver (use with caution) |"
            in ev.text)
    assert "pregnant" in ev.mentioned_entities
    assert "reduced_liver" in ev.mentioned_entities


def test_verbalize_skips_rule_tag_already_listed(toy_store):
    drug = toy_store.drugs["D001"]
    drug.contraindications.append("child_below_age(12)")
    ev = toy_store.verbalize("D001")
    assert ev.text.count("child_below_age(12)") == 1


def test_verbalize_keeps_dangling_ids_as_raw_text(toy_store):
    toy_store.drugs["D003"].treatments.append("dis_missing")
    ev = toy_store.verbalize("D003")
    assert "dis_missing" in ev.text
    assert "dis_missing" not in ev.mentioned_entities


def test_verbalize_is_deterministic(toy_store):
    assert toy_store.verbalize("D002") == toy_store.verbalize("D002")


# -- safety queries -----------------------------------------------------------

def _patient(**kw):
    base = dict(age=30, sex="female", current_disease="dis_gout")
    base.update(kw)
    return PatientEHR(**base)


def test_violates_forbid_rule(toy_store):
    assert toy_store.violates_safe_use("D002", _patient(population_tags=["pregnant"]))
    assert not toy_store.violates_safe_use("D002", _patient())


def test_caution_rule_never_disqualifies(toy_store):
    p = _patient(population_tags=["reduced_liver"])
    assert not toy_store.violates_safe_use("D002", p)


def test_age_band_rule_uses_age(toy_store):
    assert toy_store.violates_safe_use("D001", _patient(age=8))
    assert not toy_store.violates_safe_use("D001", _patient(age=12))


def test_allergy_to_ingredient_or_drug(toy_store):
    assert toy_store.violates_safe_use("D002", _patient(allergies=["ing_lactose"]))
    assert toy_store.violates_safe_use("D002", _patient(allergies=["D002"]))
    assert not toy_store.violates_safe_use("D001", _patient(allergies=["ing_lactose"]))


def test_disease_demographics(toy_store):
    rec = toy_store.diseases["dis_preg_only"]
    assert rec.allows("female", 30)
    assert not rec.allows("male", 30)
    assert not rec.allows("female", 12)
    assert not rec.allows("female", 70)
    assert toy_store.diseases["dis_gout"].allows("male", 99)


def test_stats_shape(toy_store):
    s = toy_store.stats()
    assert s == {"drugs": 3, "diseases": 5, "ingredients": 4,
                 "ddi_pairs": 1, "dangling_references": 0}
