"""Synthetic KG builder: structural invariants the planted tasks rely on."""
import numpy as np
import pytest

from rxgraph.synthkg import find_twin_fixture, make_synth_kg


@pytest.fixture(scope="module")
def store():
    return make_synth_kg(n_diseases=40, seed=3)


def test_sizes_and_referential_integrity(store):
    stats = store.stats()
    assert stats["diseases"] == 40
    assert stats["drugs"] == 120
    assert stats["dangling_references"] == 0
    # a few drugs may treat nothing (they still matter as DDI partners),
    # but the bulk must be reachable through some disease
    treatless = sum(1 for d in store.drugs.values() if not d.treatments)
    assert treatless < len(store.drugs) * 0.2
    for drug in store.drugs.values():
        assert drug.ingredients[0].startswith("ING")


def test_every_disease_within_treating_range(store):
    for did in store.diseases:
        n = len(store.drugs_treating(did))
        assert 8 <= n <= 11


def test_ddi_iff_shared_marker(store):
    """Interaction partners always share a marker ingredient and vice versa."""
    drug_ids = sorted(store.drugs)
    markers = {d: {i for i in store.drugs[d].ingredients
                   if i.startswith("MRK")} for d in drug_ids}
    for a_pos, a in enumerate(drug_ids):
        for b in drug_ids[a_pos + 1:]:
            shared = bool(markers[a] & markers[b])
            assert store.has_ddi(a, b) == shared, (a, b)


def test_ddi_symmetry_in_records(store):
    for a, drug in store.drugs.items():
        for b in drug.interactions:
            assert a in store.drugs[b].interactions


def test_routed_per_disease_guarantees_group_members(store):
    # with routing, each disease's treating set touches >= 1 interaction group
    for did in store.diseases:
        treating = store.drugs_treating(did)
        grouped = [d for d in treating if store.drugs[d].interactions]
        assert grouped, did


def test_heavier_routing_adds_interactions():
    light = make_synth_kg(n_diseases=30, seed=5, routed_per_disease=1)
    heavy = make_synth_kg(n_diseases=30, seed=5, routed_per_disease=5)
    assert heavy.stats()["ddi_pairs"] > light.stats()["ddi_pairs"]


def test_excipients_are_shared_nonallergen_fillers(store):
    exc = {i: rec for i, rec in store.ingredients.items()
           if i.startswith("EXC")}
    assert len(exc) == 4
    assert {rec.label for rec in exc.values()} == \
        {"lactose", "starch", "cellulose", "povidone"}
    assert not any(rec.is_allergen for rec in exc.values())
    counts = {i: 0 for i in exc}
    for drug in store.drugs.values():
        mine = [i for i in drug.ingredients if i.startswith("EXC")]
        assert 1 <= len(mine) <= 3
        for i in mine:
            counts[i] += 1
    # each filler appears in a large share of the corpus -> high-degree nodes
    for i, c in counts.items():
        assert c > len(store.drugs) * 0.25, (i, c)


def test_excipients_can_be_disabled():
    bare = make_synth_kg(n_diseases=10, seed=0, excipient_range=(0, 0))
    assert not any(i.startswith("EXC") for i in bare.ingredients)
    for drug in bare.drugs.values():
        assert not any(i.startswith("EXC") for i in drug.ingredients)


def test_population_rules_and_contras_appear_at_configured_rates():
    dense = make_synth_kg(n_diseases=60, seed=9, p_forbid_rule=0.9,
                          p_caution_rule=0.0, p_disease_contra=0.9)
    n = len(dense.drugs)
    with_rule = sum(1 for d in dense.drugs.values() if d.population_rules)
    with_contra = sum(1 for d in dense.drugs.values() if d.contraindications)
    assert with_rule / n > 0.8
    assert with_contra / n > 0.8
    none = make_synth_kg(n_diseases=60, seed=9, p_forbid_rule=0.0,
                         p_caution_rule=0.0, p_disease_contra=0.0)
    assert all(not d.population_rules for d in none.drugs.values())
    assert all(not d.contraindications for d in none.drugs.values())


def _snapshot(kg):
    return [rec.to_json() for group in (kg.diseases, kg.ingredients, kg.drugs)
            for _, rec in sorted(group.items())]


def test_deterministic_in_seed(store):
    assert _snapshot(make_synth_kg(n_diseases=40, seed=3)) == _snapshot(store)
    assert _snapshot(make_synth_kg(n_diseases=40, seed=4)) != _snapshot(store)


def test_label_space_exhaustion_guard():
    with pytest.raises(ValueError):
        make_synth_kg(n_diseases=10000, drugs_per_disease=10.0)


def test_demographic_diseases_exist(store):
    demos = [d.demographics for d in store.diseases.values() if d.demographics]
    assert demos, "expected some demographically restricted diseases"
    kinds = set()
    for demo in demos:
        kinds.update(demo.keys())
    assert kinds <= {"sex", "age_min", "age_max"}


def test_verbalized_evidence_mentions_marker_labels(store):
    # pick any interacting drug: its evidence must expose the shared marker
    drug = next(d for d in store.drugs.values() if d.interactions)
    ev = store.verbalize(drug.id)
    marker = next(i for i in drug.ingredients if i.startswith("MRK"))
    assert store.ingredients[marker].label in ev.text
    assert marker in ev.mentioned_entities


def test_twin_fixture_contract(store):
    fix = find_twin_fixture(store)
    assert fix is not None
    g = fix["pregnancy_drug"]
    q = fix["concomitant"]
    treating = store.drugs_treating(fix["disease"])
    assert g in treating
    assert q not in treating
    assert any(r.population_tag == "pregnant" and r.action == "forbid"
               for r in store.drugs[g].population_rules)
    assert not store.has_ddi(q, g)
    assert any(store.has_ddi(q, other) for other in treating if other != g)
