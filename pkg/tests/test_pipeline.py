"""End-to-end recommender: ranking, evidence traceability, persistence."""
import json

import numpy as np
import pytest

from rxgraph.benchgen import generate_dataset, planted_config
from rxgraph.encoders import HashingEncoder
from rxgraph.errors import NotFoundError, RxGraphError
from rxgraph.gnn import ModelConfig, ModelParams
from rxgraph.pipeline import Recommender
from rxgraph.retrieval import build_index
from rxgraph.synthkg import make_synth_kg


@pytest.fixture(scope="module")
def world():
    store = make_synth_kg(n_diseases=20, seed=2)
    index = build_index(store)
    encoder = HashingEncoder(dim=32, seed=0)
    params = ModelParams.init(ModelConfig(dim=32), seed=1)
    rec = Recommender(store, index, params, encoder)
    config = planted_config(n_patients=8, seed=1, max_per_disease=10)
    patients, _ = generate_dataset(store, config)
    return store, index, encoder, params, rec, patients


def test_encoder_dim_must_match(world):
    store, index, _, params, _, _ = world
    with pytest.raises(RxGraphError):
        Recommender(store, index, params, HashingEncoder(dim=16, seed=0))


def test_rank_is_candidate_permutation(world):
    store, index, _, _, rec, patients = world
    for patient in patients[:4]:
        ranking = rec.rank(patient)
        assert sorted(ranking) == sorted(set(ranking))
        cands, _, probs, _ = rec.score_graph(patient)
        assert sorted(ranking) == sorted(cands.all)
        # best-first by probability, id as tie break
        by = {d: probs[i] for i, d in enumerate(cands.all)}
        for a, b in zip(ranking, ranking[1:]):
            assert (by[a], a) >= (by[b], a) or by[a] > by[b] or \
                (by[a] == by[b] and a < b)


def test_recommendation_payload_shape(world):
    _, _, _, params, rec, patients = world
    out = rec.recommend(patients[0], top_k=4, top_evidence=2)
    assert [d.rank for d in out.drugs] == [1, 2, 3, 4]
    scores = [d.score for d in out.drugs]
    assert scores == sorted(scores, reverse=True)
    assert len(out.ranked) == len(out.candidates.all)
    for drug in out.drugs:
        assert len(drug.evidence) <= 2
        for ev in drug.evidence:
            assert ev.text
    assert out.model_info == params.config.to_json()
    payload = out.to_json()
    json.dumps(payload)  # must be serializable as-is
    assert payload["recommendations"][0]["rank"] == 1
    assert set(payload["graph"]) == {"nodes", "edges"}


def test_evidence_traceability(world):
    """Every supporting evidence is graph-adjacent to its drug and its text
    is byte-identical to the store's verbalization of the source drug."""
    store, _, _, _, rec, patients = world
    for patient in patients:
        out = rec.recommend(patient, top_k=5, top_evidence=3)
        _, graph, _, _ = rec.score_graph(patient)
        pos_of = {d: i for i, d in enumerate(graph.candidate_ids)}
        for drug in out.drugs:
            drug_node = graph.drug_node_indices[pos_of[drug.drug_id]]
            for ev in drug.evidence:
                assert ev.node_index in graph.adjacency[drug_node]
                assert graph.nodes[ev.node_index].kind == "evidence"
                assert ev.text == store.verbalize(ev.source_drug_id).text


def test_graph_excerpt_is_closed(world):
    _, _, _, _, rec, patients = world
    out = rec.recommend(patients[1], top_k=3, top_evidence=2)
    nodes = {n["index"] for n in out.graph_excerpt["nodes"]}
    for a, b in out.graph_excerpt["edges"]:
        assert a in nodes and b in nodes
    listed = {ev.node_index for d in out.drugs for ev in d.evidence}
    assert listed <= nodes


def test_top_evidence_zero(world):
    _, _, _, _, rec, patients = world
    out = rec.recommend(patients[0], top_k=3, top_evidence=0)
    assert all(not d.evidence for d in out.drugs)


def test_unknown_concomitant_rejected(world):
    _, _, _, _, rec, patients = world
    patient = patients[0]
    old = patient.concomitant_drugs
    patient.concomitant_drugs = ["DRG99999"]
    try:
        with pytest.raises(NotFoundError):
            rec.recommend(patient)
    finally:
        patient.concomitant_drugs = old


def test_no_candidates_is_an_error(world):
    from rxgraph.patient import PatientEHR
    _, _, _, _, rec, _ = world
    ghost = PatientEHR(age=30, sex="male", current_disease="zzz qqq www")
    with pytest.raises(RxGraphError):
        rec.recommend(ghost)


def test_load_roundtrip(tmp_path, world):
    store, index, encoder, params, rec, patients = world
    index.save(tmp_path / "index.json")
    params.save(tmp_path / "model.npz", encoder_info=encoder.info(),
                train_config={"note": "fixture"})
    loaded = Recommender.load(store, tmp_path / "index.json",
                              tmp_path / "model.npz")
    for patient in patients[:3]:
        assert loaded.rank(patient) == rec.rank(patient)
    a = loaded.recommend(patients[0]).to_json()
    b = rec.recommend(patients[0]).to_json()
    assert a == b
