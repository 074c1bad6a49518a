import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bm25_direct
from rxgraph.errors import LoadError
from rxgraph.patient import PatientEHR
from rxgraph.retrieval import (BM25Index, CandidateSet, build_index,
                               drug_document_tokens, gather_evidence,
                               patient_query_tokens, retrieve_candidates)

DOCS = {
    "d1": "gout acute flare uric acid".split(),
    "d2": "gout chronic tophus".split(),
    "d3": "hypertension blood pressure".split(),
    "d4": "pressure ulcer wound care dressing gauze".split(),
    "d5": "migraine aura headache".split(),
}


@pytest.fixture
def index():
    ids = sorted(DOCS)
    return BM25Index(ids, [DOCS[i] for i in ids])


def test_idf_formula(index):
    # "gout" appears in 2 of 5 docs
    assert index.idf("gout") == pytest.approx(math.log((5 - 2 + 0.5) / (2 + 0.5)))
    assert index.idf("unseen") == pytest.approx(math.log((5 + 0.5) / 0.5))


def test_idf_floored_at_zero():
    ids = ["a", "b", "c"]
    idx = BM25Index(ids, [["common"], ["common"], ["common", "rare"]])
    # df=3 of N=3 makes the raw log negative; the floor clips it
    assert idx.idf("common") == 0.0
    assert idx.idf("rare") > 0.0


def test_scores_match_direct_formula(index):
    ids = sorted(DOCS)
    docs = [DOCS[i] for i in ids]
    for query in (["gout"], ["gout", "acute"], ["pressure"],
                  ["gout", "gout"], ["unseen"]):
        scores = index.score_all(query)
        for pos in range(len(ids)):
            assert scores[pos] == pytest.approx(
                bm25_direct(docs, query, pos), abs=1e-12)


def test_repeated_query_token_scores_double(index):
    single = index.score_all(["gout"])
    double = index.score_all(["gout", "gout"])
    assert np.allclose(double, 2 * single)


def test_top_k_drops_zero_scores_and_breaks_ties_by_id(index):
    hits = index.top_k(["gout"], k=10)
    assert [h[0] for h in hits] == ["d2", "d1"]  # d2 shorter doc, higher tf norm
    assert all(s > 0 for _, s in hits)
    # equal-length docs with the same tf tie exactly; id order must decide
    idx = BM25Index(["z", "a", "f1", "f2", "f3"],
                    [["x", "y"], ["x", "q"], ["m", "n"], ["o", "p"], ["r", "s"]])
    assert [h[0] for h in idx.top_k(["x"], k=2)] == ["a", "z"]


def test_empty_corpus_rejected():
    with pytest.raises(LoadError):
        BM25Index([], [])


def test_save_load_round_trip(index, tmp_path):
    path = tmp_path / "bm25.json"
    index.save(path)
    loaded = BM25Index.load_file(path)
    for query in (["gout", "acute"], ["pressure", "wound"]):
        assert np.allclose(loaded.score_all(query), index.score_all(query))
    assert loaded.top_k(["gout"], 3) == index.top_k(["gout"], 3)


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"format": "something-else", "version": 9}')
    with pytest.raises(LoadError):
        BM25Index.load_file(path)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from("abcdefg"), min_size=0, max_size=6))
def test_scores_nonnegative_and_bounded_terms(query):
    docs = [list("abc"), list("ddee"), list("afg"), list("gg")]
    idx = BM25Index(["w", "x", "y", "z"], docs)
    scores = idx.score_all(list(query))
    assert (scores >= 0).all()
    if not query:
        assert not scores.any()


# -- store-facing helpers ------------------------------------------------------

def test_drug_document_tokens_cover_three_sections(toy_store):
    toks = drug_document_tokens(toy_store, "D001")
    assert toks == ["gout", "colchinol", "peptic", "ulcer"]


def test_drug_document_tokens_keep_dangling_ids(toy_store):
    toy_store.drugs["D003"].treatments.append("dis_missing")
    assert "dis_missing" in drug_document_tokens(toy_store, "D003")


def test_patient_query_resolves_disease_id(toy_store, toy_patient):
    assert patient_query_tokens(toy_store, toy_patient) == ["gout", "joint", "pain"]


def test_patient_query_accepts_free_text_disease(toy_store):
    p = PatientEHR(age=30, sex="male", current_disease="peptic ulcer")
    assert patient_query_tokens(toy_store, p) == ["peptic", "ulcer"]


def test_retrieve_candidates_appends_concomitant(toy_store):
    # "gout" hits 2 of 3 drug docs, which floors its idf to 0; query the
    # unique disease instead so the ranking is non-empty.
    index = build_index(toy_store)
    p = PatientEHR(age=30, sex="male", current_disease="dis_hypertension",
                   concomitant_drugs=["D003", "D001"])
    cand = retrieve_candidates(index, toy_store, p, k=5)
    assert [d for d, _ in cand.bm25_top] == ["D003"]
    assert cand.concomitant == ["D003", "D001"]
    # dedup: D003 already ranked, D001 appended once
    assert cand.all == ["D003", "D001"]


def test_candidate_set_dedup_preserves_order():
    cand = CandidateSet(bm25_top=[("b", 2.0), ("a", 1.0)], concomitant=["a", "c", "c"])
    assert cand.all == ["b", "a", "c"]


def test_gather_evidence_aligned_with_candidates(toy_store):
    cand = CandidateSet(bm25_top=[("D002", 1.0)], concomitant=["D001"])
    texts = gather_evidence(toy_store, cand)
    assert [t.drug_id for t in texts] == ["D002", "D001"]
    assert texts[0] == toy_store.verbalize("D002")
