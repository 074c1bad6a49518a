"""Okapi BM25 retrieval over per-drug documents.

Each drug document is the token multiset of the labels of its target
diseases, ingredients, and contraindication conditions. The index is
immutable after :func:`build_index`; concurrent queries are safe.

Scoring uses the Robertson/Sparck-Jones idf with +0.5 smoothing, floored at
zero so rare-corpus terms cannot contribute negatively:

    idf(t)     = max(0, ln((N - df + 0.5) / (df + 0.5)))
    score(q,d) = sum over query token occurrences t of
                 idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl/avgdl))
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import LoadError, NotFoundError
from .kg import EvidenceText, KGStore
from .patient import PatientEHR
from .tokenize import tokenize

INDEX_FORMAT = "rxgraph-bm25"
INDEX_VERSION = 1


def drug_document_tokens(store: KGStore, drug_id: str,
                         tokenizer: Callable[[str], list[str]] = tokenize) -> list[str]:
    """Token multiset representing one drug for retrieval."""
    drug = store.drug(drug_id)
    tokens: list[str] = []
    for eid in (*drug.treatments, *drug.ingredients, *drug.contraindications):
        try:
            tokens.extend(tokenizer(store.label_of(eid)))
        except NotFoundError:
            tokens.extend(tokenizer(eid))  # dangling ref: index the raw id
    return tokens


@dataclass
class CandidateSet:
    """Retrieval output: BM25 ranking plus the patient's concomitant drugs."""

    bm25_top: list[tuple[str, float]]
    concomitant: list[str]
    all: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.all:
            seen = set()
            merged = []
            for drug_id in [d for d, _ in self.bm25_top] + list(self.concomitant):
                if drug_id not in seen:
                    seen.add(drug_id)
                    merged.append(drug_id)
            self.all = merged


class BM25Index:
    """Inverted index with the standard Okapi parameters (k1=1.5, b=0.75)."""

    def __init__(self, doc_ids: list[str], doc_tokens: list[list[str]],
                 k1: float = 1.5, b: float = 0.75):
        if not doc_ids:
            raise LoadError("cannot build a BM25 index over an empty corpus")
        self.doc_ids = list(doc_ids)
        self.k1 = k1
        self.b = b
        self.doc_len = np.array([len(t) for t in doc_tokens], dtype=float)
        self.avgdl = float(self.doc_len.mean())
        self.postings: dict[str, list[tuple[int, int]]] = {}
        for idx, tokens in enumerate(doc_tokens):
            counts: dict[str, int] = {}
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
            for tok, tf in counts.items():
                self.postings.setdefault(tok, []).append((idx, tf))
        self._pos_of = {d: i for i, d in enumerate(self.doc_ids)}

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return max(0.0, math.log((self.n_docs - df + 0.5) / (df + 0.5)))

    def score_all(self, query_tokens: list[str]) -> np.ndarray:
        """BM25 score of every document for the query token multiset."""
        scores = np.zeros(self.n_docs)
        norm = self.k1 * (1.0 - self.b + self.b * self.doc_len / self.avgdl)
        for tok in query_tokens:
            postings = self.postings.get(tok)
            if not postings:
                continue
            idf = self.idf(tok)
            for doc_idx, tf in postings:
                scores[doc_idx] += idf * tf * (self.k1 + 1.0) / (tf + norm[doc_idx])
        return scores

    def top_k(self, query_tokens: list[str], k: int) -> list[tuple[str, float]]:
        """Top-k documents with positive score; ties broken by doc id ascending."""
        scores = self.score_all(query_tokens)
        hits = [(self.doc_ids[i], float(s)) for i, s in enumerate(scores) if s > 0.0]
        hits.sort(key=lambda pair: (-pair[1], pair[0]))
        return hits[:k]

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        payload = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "k1": self.k1,
            "b": self.b,
            "doc_ids": self.doc_ids,
            "doc_len": self.doc_len.tolist(),
            "avgdl": self.avgdl,
            "postings": {t: [[i, tf] for i, tf in plist]
                         for t, plist in sorted(self.postings.items())},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)

    @classmethod
    def load_file(cls, path) -> "BM25Index":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != INDEX_FORMAT or payload.get("version") != INDEX_VERSION:
            raise LoadError(f"not a {INDEX_FORMAT}/{INDEX_VERSION} index file: {path}")
        idx = cls.__new__(cls)
        idx.doc_ids = list(payload["doc_ids"])
        idx.k1 = float(payload["k1"])
        idx.b = float(payload["b"])
        idx.doc_len = np.array(payload["doc_len"], dtype=float)
        idx.avgdl = float(payload["avgdl"])
        idx.postings = {t: [(int(i), int(tf)) for i, tf in plist]
                        for t, plist in payload["postings"].items()}
        idx._pos_of = {d: i for i, d in enumerate(idx.doc_ids)}
        return idx


def build_index(store: KGStore, tokenizer: Callable[[str], list[str]] = tokenize,
                k1: float = 1.5, b: float = 0.75) -> BM25Index:
    """Index every drug in the store. Document order is sorted drug id."""
    doc_ids = sorted(store.drugs)
    doc_tokens = [drug_document_tokens(store, d, tokenizer) for d in doc_ids]
    return BM25Index(doc_ids, doc_tokens, k1=k1, b=b)


def patient_query_tokens(store: KGStore, patient: PatientEHR,
                         tokenizer: Callable[[str], list[str]] = tokenize) -> list[str]:
    """Query = current-disease label plus symptom strings.

    If the disease field does not resolve as a KG id it is treated as a
    free-text label, which lets clients query by name.
    """
    disease = patient.current_disease
    if disease in store.diseases:
        disease = store.diseases[disease].label
    parts = [disease] + list(patient.symptoms)
    tokens: list[str] = []
    for part in parts:
        tokens.extend(tokenizer(part))
    return tokens


def retrieve_candidates(index: BM25Index, store: KGStore, patient: PatientEHR,
                        k: int = 50,
                        tokenizer: Callable[[str], list[str]] = tokenize) -> CandidateSet:
    """Top-k BM25 drugs for the patient query, plus concomitant drugs.

    Concomitant drugs are appended unscored (deduplicated against the BM25
    ranking); they are context for the downstream graph, not rescored.
    """
    query = patient_query_tokens(store, patient, tokenizer)
    bm25_top = index.top_k(query, k)
    return CandidateSet(bm25_top=bm25_top, concomitant=list(patient.concomitant_drugs))


def gather_evidence(store: KGStore, candidates: CandidateSet) -> list[EvidenceText]:
    """One evidence text per candidate, aligned with ``candidates.all``."""
    return [store.verbalize(drug_id) for drug_id in candidates.all]
