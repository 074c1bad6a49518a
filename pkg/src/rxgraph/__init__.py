"""Traceable drug recommendation over a medical knowledge graph.

Pipeline: BM25 retrieval over verbalized drug facts -> per-patient evidence
graph -> patient-conditioned attention message passing -> bilinear scoring
of candidate drugs and their supporting evidence.
"""

from .kg import (DiseaseRecord, DrugRecord, EvidenceText, IngredientRecord,
                 KGStore, SafeUseRule)
from .patient import PatientEHR, load_dataset, dump_dataset, patient_from_json
from .retrieval import BM25Index, CandidateSet, build_index, \
    gather_evidence, retrieve_candidates
from .graph import EvidenceGraph, GraphNode, build_graph, graph_stats
from .encoders import ExternalEncoder, HashingEncoder, encode_graph, \
    serialize_patient
from .gnn import GraphTensors, ModelConfig, ModelParams, forward, \
    loss_and_grads, multitask_loss
from .train import AdamW, TrainConfig, preset_config, train
from .pipeline import Recommendation, Recommender
from .metrics import average_precision, ddi_rate, evaluate, hit_at_1, \
    set_metrics
from .benchgen import AgeTable, GenConfig, audit_dataset, emit_benchmark, \
    generate_dataset, planted_config, split_dataset
from .synthkg import make_synth_kg
from .errors import (AuditError, GenerationError, GraphBuildError, LoadError,
                     NotFoundError, ParseError, RxGraphError, ValidationError)

__version__ = "0.1.0"

__all__ = [
    "AdamW", "AgeTable", "AuditError", "BM25Index", "CandidateSet",
    "DiseaseRecord", "DrugRecord", "EvidenceGraph", "EvidenceText",
    "ExternalEncoder", "GenConfig", "GenerationError", "GraphBuildError",
    "GraphNode", "GraphTensors", "HashingEncoder", "IngredientRecord",
    "KGStore", "LoadError", "ModelConfig", "ModelParams", "NotFoundError",
    "ParseError", "PatientEHR", "Recommendation", "Recommender",
    "RxGraphError", "SafeUseRule", "TrainConfig", "ValidationError",
    "audit_dataset", "average_precision", "build_graph", "build_index",
    "ddi_rate", "dump_dataset", "emit_benchmark", "encode_graph", "evaluate",
    "forward", "gather_evidence", "generate_dataset", "graph_stats",
    "hit_at_1", "load_dataset", "loss_and_grads", "make_synth_kg",
    "multitask_loss", "patient_from_json", "planted_config", "preset_config",
    "retrieve_candidates", "serialize_patient", "set_metrics",
    "split_dataset", "train",
]
