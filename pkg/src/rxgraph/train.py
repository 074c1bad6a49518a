"""Training loop: AdamW with linear warmup, best-epoch selection on dev F1.

Instances are prepared once (retrieval -> graph -> encoding) and reused
across epochs; only the model parameters change between steps. Training is
deterministic given (config.seed, dataset, store).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .encoders import HashingEncoder, encode_graph
from .errors import RxGraphError
from .gnn import (DEFAULT_TASK_WEIGHTS, GraphTensors, ModelConfig, ModelParams,
                  forward, loss_and_grads)
from .graph import build_graph
from .kg import KGStore
from .metrics import set_metrics
from .patient import PatientEHR
from .retrieval import BM25Index, gather_evidence, retrieve_candidates


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 1
    lr: float = 1e-5
    warmup_steps: int = 500
    weight_decay: float = 0.01
    entity_weight: float = 0.7
    evidence_weight: float = 0.3
    dim: int = 64
    layers: int = 3
    attention_mode: str = "patient"
    activation: str = "none"
    retrieve_k: int = 50
    eval_top_k: int = 5
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if abs(self.entity_weight + self.evidence_weight - 1.0) > 1e-9:
            raise ValueError("task weights must sum to 1")
        if self.epochs <= 0 or self.batch_size <= 0 or self.lr <= 0:
            raise ValueError("epochs, batch_size and lr must be positive")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")

    def model_config(self) -> ModelConfig:
        return ModelConfig(dim=self.dim, layers=self.layers,
                           attention_mode=self.attention_mode,
                           activation=self.activation)

    def to_json(self) -> dict:
        out = asdict(self)
        out["betas"] = list(self.betas)
        return out


# Reference setup: 5 epochs, batch 1, lr 1e-5 with 768-dim encodings.
PRESETS = {
    "paper": dict(lr=1e-5, dim=768),
    # small/fast profile for local corpora and the test suite
    "desk": dict(lr=1e-3, dim=64),
}


def preset_config(name: str, **overrides) -> TrainConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; pick one of {sorted(PRESETS)}")
    merged = dict(PRESETS[name])
    merged.update(overrides)
    return TrainConfig(**merged)


class AdamW:
    """Adam with decoupled weight decay and linear warmup to a flat lr."""

    def __init__(self, tensors: dict[str, np.ndarray], lr: float,
                 betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01, warmup_steps: int = 0):
        self.tensors = tensors
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.warmup_steps = warmup_steps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}

    def lr_at(self, step: int) -> float:
        if self.warmup_steps > 0 and step < self.warmup_steps:
            return self.lr * step / self.warmup_steps
        return self.lr

    def step(self, grads: dict[str, np.ndarray]) -> float:
        self.t += 1
        lr_t = self.lr_at(self.t)
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for key, theta in self.tensors.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            theta -= lr_t * (update + self.weight_decay * theta)
        return lr_t


@dataclass
class TrainInstance:
    patient_id: str
    gt: GraphTensors
    node_matrix: np.ndarray
    patient_vec: np.ndarray
    entity_labels: np.ndarray
    evidence_labels: np.ndarray
    candidate_ids: list[str]
    truth: set = field(default_factory=set)


def prepare_instances(store: KGStore, index: BM25Index,
                      patients: Sequence[PatientEHR], encoder,
                      k: int = 50, for_training: bool = True
                      ) -> tuple[list[TrainInstance], int]:
    """Build the cached per-patient tensors.

    For training, patients whose ground truth misses the candidate set
    entirely are skipped (the loss needs at least one positive); the skip
    count is returned so runs can report it.
    """
    instances = []
    skipped = 0
    for patient in patients:
        candidates = retrieve_candidates(index, store, patient, k=k)
        if not candidates.all:
            skipped += 1
            continue
        truth = set(patient.ground_truth_drugs)
        labels = np.array([1.0 if d in truth else 0.0 for d in candidates.all])
        if for_training and not labels.any():
            skipped += 1
            continue
        graph = build_graph(store, candidates, gather_evidence(store, candidates))
        patient_vec, node_matrix = encode_graph(graph, patient, encoder, store)
        instances.append(TrainInstance(
            patient_id=patient.patient_id, gt=GraphTensors(graph),
            node_matrix=node_matrix, patient_vec=patient_vec,
            entity_labels=labels, evidence_labels=labels.copy(),
            candidate_ids=list(candidates.all), truth=truth))
    return instances, skipped


def rank_instance(params: ModelParams, inst: TrainInstance) -> list[str]:
    """Candidate ids ranked by entity probability (ties by id)."""
    state = forward(inst.gt, inst.node_matrix, inst.patient_vec, params)
    probs = state.scores.entity_probs
    order = sorted(range(len(inst.candidate_ids)),
                   key=lambda i: (-probs[i], inst.candidate_ids[i]))
    return [inst.candidate_ids[i] for i in order]


def mean_dev_f1(params: ModelParams, instances: Sequence[TrainInstance],
                top_k: int = 5) -> float:
    scores = []
    for inst in instances:
        if not inst.truth:
            continue
        ranked = rank_instance(params, inst)
        scores.append(set_metrics(ranked[:top_k], inst.truth)["f1"])
    return float(np.mean(scores)) if scores else 0.0


def train(store: KGStore, index: BM25Index,
          train_patients: Sequence[PatientEHR], config: TrainConfig,
          dev_patients: Optional[Sequence[PatientEHR]] = None,
          encoder=None, log_path=None, quiet: bool = True
          ) -> tuple[ModelParams, dict]:
    """Fit the model; returns (best params, training log).

    Best = highest dev F1 epoch when a dev split is given (ties keep the
    earlier epoch), else the final epoch.
    """
    if encoder is None:
        encoder = HashingEncoder(dim=config.dim, seed=config.seed)
    if getattr(encoder, "dim", config.dim) != config.dim:
        raise RxGraphError(
            f"encoder dim {encoder.dim} != model dim {config.dim}")

    train_inst, skipped = prepare_instances(
        store, index, train_patients, encoder, k=config.retrieve_k,
        for_training=True)
    if not train_inst:
        raise RxGraphError("no trainable instances "
                           "(every patient lacked an in-candidate truth drug)")
    dev_inst: list[TrainInstance] = []
    if dev_patients:
        dev_inst, _ = prepare_instances(store, index, dev_patients, encoder,
                                        k=config.retrieve_k, for_training=False)

    params = ModelParams.init(config.model_config(), seed=config.seed)
    opt = AdamW(params.as_dict(), lr=config.lr, betas=config.betas,
                eps=config.adam_eps, weight_decay=config.weight_decay,
                warmup_steps=config.warmup_steps)
    weights = (config.entity_weight, config.evidence_weight)
    rng = np.random.default_rng(config.seed)

    log = {"config": config.to_json(), "encoder": encoder.info(),
           "n_train_instances": len(train_inst),
           "n_dev_instances": len(dev_inst),
           "skipped_training_instances": skipped, "epochs": []}
    best_params = None
    best_f1 = -1.0
    best_epoch = -1

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_inst))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            grads = params.zero_grads()
            for idx in batch:
                inst = train_inst[idx]
                loss, g, _ = loss_and_grads(
                    inst.gt, inst.node_matrix, inst.patient_vec, params,
                    inst.entity_labels, inst.evidence_labels, weights=weights)
                losses.append(loss)
                for key in grads:
                    grads[key] += g[key]
            if len(batch) > 1:
                for key in grads:
                    grads[key] /= len(batch)
            opt.step(grads)
        entry = {"epoch": epoch, "mean_loss": float(np.mean(losses)),
                 "lr": opt.lr_at(opt.t), "steps": opt.t}
        if dev_inst:
            f1 = mean_dev_f1(params, dev_inst, top_k=config.eval_top_k)
            entry["dev_f1"] = f1
            if f1 > best_f1:
                best_f1 = f1
                best_epoch = epoch
                best_params = params.copy()
        log["epochs"].append(entry)
        if not quiet:
            print(f"epoch {epoch}: loss={entry['mean_loss']:.4f}"
                  + (f" dev_f1={entry.get('dev_f1'):.4f}" if dev_inst else ""))

    if best_params is None:
        best_params = params
        best_epoch = config.epochs
    log["best_epoch"] = best_epoch
    if dev_inst:
        log["best_dev_f1"] = best_f1
    if log_path:
        with open(log_path, "w", encoding="utf-8") as fh:
            json.dump(log, fh, indent=2)
    return best_params, log
