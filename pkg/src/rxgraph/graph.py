"""Per-patient evidence graph.

Two node families:

* entity nodes -- one per drug / disease / ingredient / contraindication
  condition touched by the candidate evidence; surface text is the label.
* evidence nodes -- one per candidate drug; surface text is the verbalized
  drug facts.

Edges only ever connect an evidence node with an entity node (the graph is
bipartite between the two families). Entities shared by several evidence
texts become shared neighbors, which is what lets signal travel between
candidate drugs and the patient's concomitant drugs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import GraphBuildError
from .kg import EvidenceText, KGStore
from .patient import PatientEHR
from .retrieval import CandidateSet

ENTITY_KINDS = ("drug", "disease", "ingredient", "contraindication")
NODE_KINDS = ENTITY_KINDS + ("evidence",)


@dataclass
class GraphNode:
    index: int
    kind: str          # one of NODE_KINDS
    entity_id: str     # for evidence nodes: the source drug id
    text: str          # surface form fed to the encoder

    def to_json(self) -> dict:
        return {"index": self.index, "kind": self.kind,
                "entity_id": self.entity_id, "text": self.text}


@dataclass
class EvidenceGraph:
    nodes: list[GraphNode]
    edges: list[tuple[int, int]]            # (evidence_idx, entity_idx)
    drug_node_indices: list[int]            # aligned with candidate order
    evidence_node_indices: list[int]        # aligned with candidate order
    candidate_ids: list[str]
    adjacency: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.adjacency:
            adj: list[list[int]] = [[] for _ in self.nodes]
            for ev, ent in self.edges:
                adj[ev].append(ent)
                adj[ent].append(ev)
            self.adjacency = [sorted(set(n)) for n in adj]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, index: int) -> list[int]:
        return self.adjacency[index]

    def evidence_for_drug(self, drug_node_index: int) -> list[int]:
        """Evidence nodes adjacent to an entity node, ascending index."""
        ev = set(self.evidence_node_indices)
        return [i for i in self.adjacency[drug_node_index] if i in ev]

    def to_json(self) -> dict:
        return {
            "nodes": [n.to_json() for n in self.nodes],
            "edges": [list(e) for e in self.edges],
            "drug_node_indices": list(self.drug_node_indices),
            "evidence_node_indices": list(self.evidence_node_indices),
            "candidate_ids": list(self.candidate_ids),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvidenceGraph":
        nodes = [GraphNode(int(n["index"]), n["kind"], n["entity_id"], n["text"])
                 for n in obj["nodes"]]
        edges = [(int(a), int(b)) for a, b in obj["edges"]]
        return cls(nodes=nodes, edges=edges,
                   drug_node_indices=[int(i) for i in obj["drug_node_indices"]],
                   evidence_node_indices=[int(i) for i in obj["evidence_node_indices"]],
                   candidate_ids=list(obj["candidate_ids"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, ensure_ascii=False)


def build_graph(store: KGStore, candidates: CandidateSet,
                evidence: list[EvidenceText]) -> EvidenceGraph:
    """Assemble the evidence graph for one patient.

    Node order is deterministic: for each candidate in ``candidates.all``
    order, its drug entity node, then its evidence node, then any newly
    mentioned entity nodes in the order the evidence text mentions them.
    """
    if len(evidence) != len(candidates.all):
        raise GraphBuildError(
            f"evidence/candidate mismatch: {len(evidence)} texts for "
            f"{len(candidates.all)} candidates")

    nodes: list[GraphNode] = []
    edges: list[tuple[int, int]] = []
    entity_node: dict[str, int] = {}
    drug_idx: list[int] = []
    ev_idx: list[int] = []
    edge_seen: set[tuple[int, int]] = set()

    def ensure_entity(entity_id: str) -> int:
        if entity_id in entity_node:
            return entity_node[entity_id]
        node = GraphNode(index=len(nodes), kind=store.entity_kind(entity_id),
                         entity_id=entity_id, text=store.label_of(entity_id))
        nodes.append(node)
        entity_node[entity_id] = node.index
        return node.index

    for drug_id, ev in zip(candidates.all, evidence):
        if ev.drug_id != drug_id:
            raise GraphBuildError(
                f"evidence for {ev.drug_id} is not aligned with candidate {drug_id}")
        d_node = ensure_entity(drug_id)
        drug_idx.append(d_node)
        e_node = GraphNode(index=len(nodes), kind="evidence",
                           entity_id=drug_id, text=ev.text)
        nodes.append(e_node)
        ev_idx.append(e_node.index)
        for pair in [(e_node.index, d_node)] + [
                (e_node.index, ensure_entity(m)) for m in ev.mentioned_entities]:
            if pair not in edge_seen:
                edge_seen.add(pair)
                edges.append(pair)

    return EvidenceGraph(nodes=nodes, edges=edges, drug_node_indices=drug_idx,
                         evidence_node_indices=ev_idx,
                         candidate_ids=list(candidates.all))


def graph_stats(graph: EvidenceGraph) -> dict:
    counts = {kind: 0 for kind in NODE_KINDS}
    for node in graph.nodes:
        counts[node.kind] += 1
    degree = [len(adj) for adj in graph.adjacency]
    return {
        "nodes": graph.n_nodes,
        "edges": len(graph.edges),
        "by_kind": counts,
        "max_degree": max(degree) if degree else 0,
        "isolated": sum(1 for d in degree if d == 0),
    }
