"""End-to-end recommendation: retrieve -> graph -> encode -> score -> trace.

Every recommended drug carries the evidence nodes that support it (its
adjacent evidence texts ranked by the evidence head), plus a graph excerpt
so a client can render the neighborhood that produced the ranking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoders import encode_graph, make_encoder
from .errors import NotFoundError, RxGraphError
from .gnn import GraphTensors, ModelParams, forward
from .graph import EvidenceGraph, build_graph
from .kg import KGStore
from .patient import PatientEHR
from .retrieval import BM25Index, CandidateSet, gather_evidence, retrieve_candidates


@dataclass
class SupportingEvidence:
    node_index: int
    source_drug_id: str
    score: float
    text: str

    def to_json(self) -> dict:
        return {"node_index": self.node_index,
                "source_drug_id": self.source_drug_id,
                "score": self.score, "text": self.text}


@dataclass
class RankedDrug:
    rank: int
    drug_id: str
    label: str
    score: float
    evidence: list[SupportingEvidence] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"rank": self.rank, "drug_id": self.drug_id, "label": self.label,
                "score": self.score,
                "evidence": [e.to_json() for e in self.evidence]}


@dataclass
class Recommendation:
    patient: PatientEHR
    candidates: CandidateSet
    ranked: list[tuple[str, float]]           # full candidate ranking
    drugs: list[RankedDrug]                   # top-k with supporting evidence
    graph_excerpt: dict
    model_info: dict

    def to_json(self) -> dict:
        return {
            "patient": self.patient.to_json(),
            "candidates": {
                "bm25_top": [[d, s] for d, s in self.candidates.bm25_top],
                "concomitant": list(self.candidates.concomitant),
            },
            "ranking": [[d, s] for d, s in self.ranked],
            "recommendations": [d.to_json() for d in self.drugs],
            "graph": self.graph_excerpt,
            "model": self.model_info,
        }


class Recommender:
    """Holds the store, index, encoder, and trained parameters."""

    def __init__(self, store: KGStore, index: BM25Index, params: ModelParams,
                 encoder, retrieve_k: int = 50):
        if getattr(encoder, "dim", params.config.dim) != params.config.dim:
            raise RxGraphError(f"encoder dim {encoder.dim} does not match "
                               f"model dim {params.config.dim}")
        self.store = store
        self.index = index
        self.params = params
        self.encoder = encoder
        self.retrieve_k = retrieve_k

    @classmethod
    def load(cls, store: KGStore, index_path, checkpoint_path,
             retrieve_k: int = 50) -> "Recommender":
        index = BM25Index.load_file(index_path)
        params, meta = ModelParams.load(checkpoint_path)
        enc_info = meta.get("encoder") or {"type": "hashing",
                                           "dim": params.config.dim, "seed": 0}
        return cls(store, index, params, make_encoder(enc_info),
                   retrieve_k=retrieve_k)

    def _validate(self, patient: PatientEHR) -> None:
        for drug_id in patient.concomitant_drugs:
            if drug_id not in self.store.drugs:
                raise NotFoundError(f"unknown concomitant drug id: {drug_id}")

    def score_graph(self, patient: PatientEHR
                    ) -> tuple[CandidateSet, EvidenceGraph, np.ndarray, np.ndarray]:
        """(candidates, graph, entity_probs, evidence_probs) for a patient."""
        self._validate(patient)
        candidates = retrieve_candidates(self.index, self.store, patient,
                                         k=self.retrieve_k)
        if not candidates.all:
            raise RxGraphError(
                "retrieval produced no candidates; check the disease/symptom "
                "text against the knowledge-graph vocabulary")
        evidence = gather_evidence(self.store, candidates)
        graph = build_graph(self.store, candidates, evidence)
        patient_vec, node_matrix = encode_graph(graph, patient, self.encoder,
                                                self.store)
        state = forward(GraphTensors(graph), node_matrix, patient_vec,
                        self.params)
        return (candidates, graph, state.scores.entity_probs,
                state.scores.evidence_probs)

    def rank(self, patient: PatientEHR) -> list[str]:
        """Full candidate ranking, best first (metrics entry point)."""
        candidates, _, probs, _ = self.score_graph(patient)
        order = sorted(range(len(candidates.all)),
                       key=lambda i: (-probs[i], candidates.all[i]))
        return [candidates.all[i] for i in order]

    def recommend(self, patient: PatientEHR, top_k: int = 5,
                  top_evidence: int = 3) -> Recommendation:
        candidates, graph, ent_probs, ev_probs = self.score_graph(patient)
        ids = candidates.all
        order = sorted(range(len(ids)), key=lambda i: (-ent_probs[i], ids[i]))
        ranked = [(ids[i], float(ent_probs[i])) for i in order]

        ev_prob_of = {node: float(ev_probs[pos])
                      for pos, node in enumerate(graph.evidence_node_indices)}
        drugs: list[RankedDrug] = []
        keep_nodes: set[int] = set()
        for rank_pos, i in enumerate(order[:top_k], start=1):
            drug_node = graph.drug_node_indices[i]
            keep_nodes.add(drug_node)
            adjacent = graph.evidence_for_drug(drug_node)
            adjacent.sort(key=lambda n: (-ev_prob_of[n], n))
            support = []
            for node in adjacent[:top_evidence]:
                keep_nodes.add(node)
                support.append(SupportingEvidence(
                    node_index=node,
                    source_drug_id=graph.nodes[node].entity_id,
                    score=ev_prob_of[node], text=graph.nodes[node].text))
            drugs.append(RankedDrug(
                rank=rank_pos, drug_id=ids[i],
                label=self.store.label_of(ids[i]),
                score=float(ent_probs[i]), evidence=support))

        # excerpt: kept drug/evidence nodes plus entities around the evidence
        for node in list(keep_nodes):
            if graph.nodes[node].kind == "evidence":
                keep_nodes.update(graph.adjacency[node])
        excerpt_nodes = [graph.nodes[n].to_json() for n in sorted(keep_nodes)]
        excerpt_edges = [[a, b] for a, b in graph.edges
                         if a in keep_nodes and b in keep_nodes]
        excerpt = {"nodes": excerpt_nodes, "edges": excerpt_edges}

        return Recommendation(
            patient=patient, candidates=candidates, ranked=ranked,
            drugs=drugs, graph_excerpt=excerpt,
            model_info=self.params.config.to_json())
