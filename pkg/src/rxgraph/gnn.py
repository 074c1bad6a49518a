"""Patient-conditioned graph network with analytic gradients.

Forward pass, per layer l = 1..L over the evidence graph:

    z(n')      = (W_a . vec(n')) . vec(p)                for n' in N(n)
    alpha(n')  = softmax over N(n) of z(n')
    vec(n)    <- vec(n) + W_m . sum_{n'} alpha(n') vec(n')

The update is synchronous (all neighbor states read from the previous
layer), residual, and applies no nonlinearity by default. Nodes without
neighbors pass through unchanged. ``attention_mode="uniform"`` replaces the
softmax with 1/|N(n)| and is kept as an ablation.

Scoring is bilinear against the patient vector with one weight matrix per
node family:

    s(n) = vec(n)^T W vec(p) + bias

drug-entity scores and evidence scores are each turned into probabilities
with a softmax over their own group, and trained with weighted binary
cross-entropy (default weights 0.7 entity / 0.3 evidence, probabilities
clamped to [eps, 1-eps], eps=1e-7).

Everything is plain numpy with float64. The backward pass is written by
hand and is exact (see tests for finite-difference checks); edges are kept
as flat arrays sorted by destination so both directions run as vectorized
segment operations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import LoadError
from .graph import EvidenceGraph

CHECKPOINT_FORMAT = "rxgraph-model"
CHECKPOINT_VERSION = 1
DEFAULT_TASK_WEIGHTS = (0.7, 0.3)
EPS = 1e-7


@dataclass
class ModelConfig:
    dim: int = 64
    layers: int = 3
    attention_mode: str = "patient"   # "patient" | "uniform"
    activation: str = "none"          # "none" | "relu" | "tanh"

    def __post_init__(self):
        if self.dim <= 0 or self.layers <= 0:
            raise ValueError("dim and layers must be positive")
        if self.attention_mode not in ("patient", "uniform"):
            raise ValueError(f"unknown attention_mode: {self.attention_mode!r}")
        if self.activation not in ("none", "relu", "tanh"):
            raise ValueError(f"unknown activation: {self.activation!r}")

    def to_json(self) -> dict:
        return {"dim": self.dim, "layers": self.layers,
                "attention_mode": self.attention_mode,
                "activation": self.activation}


class ModelParams:
    """All trainable tensors, keyed for the optimizer via :meth:`as_dict`."""

    def __init__(self, config: ModelConfig, tensors: dict[str, np.ndarray]):
        self.config = config
        d, L = config.dim, config.layers
        self.w_attn = [np.asarray(tensors[f"w_attn.{i}"], dtype=float) for i in range(L)]
        self.w_msg = [np.asarray(tensors[f"w_msg.{i}"], dtype=float) for i in range(L)]
        self.w_entity = np.asarray(tensors["w_entity"], dtype=float)
        self.b_entity = np.asarray(tensors["b_entity"], dtype=float).reshape(())
        self.w_evidence = np.asarray(tensors["w_evidence"], dtype=float)
        self.b_evidence = np.asarray(tensors["b_evidence"], dtype=float).reshape(())
        for mat in (*self.w_attn, *self.w_msg, self.w_entity, self.w_evidence):
            if mat.shape != (d, d):
                raise ValueError(f"expected ({d},{d}) tensor, got {mat.shape}")

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "ModelParams":
        """Uniform(-1/sqrt(d), 1/sqrt(d)) init, deterministic in the seed."""
        rng = np.random.default_rng(seed)
        d = config.dim
        bound = 1.0 / np.sqrt(d)

        def mat():
            return rng.uniform(-bound, bound, size=(d, d))

        tensors: dict[str, np.ndarray] = {}
        for i in range(config.layers):
            tensors[f"w_attn.{i}"] = mat()
            tensors[f"w_msg.{i}"] = mat()
        tensors["w_entity"] = mat()
        tensors["b_entity"] = np.zeros(())
        tensors["w_evidence"] = mat()
        tensors["b_evidence"] = np.zeros(())
        return cls(config, tensors)

    def as_dict(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, (wa, wm) in enumerate(zip(self.w_attn, self.w_msg)):
            out[f"w_attn.{i}"] = wa
            out[f"w_msg.{i}"] = wm
        out["w_entity"] = self.w_entity
        out["b_entity"] = self.b_entity
        out["w_evidence"] = self.w_evidence
        out["b_evidence"] = self.b_evidence
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(self.config,
                           {k: v.copy() for k, v in self.as_dict().items()})

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.as_dict().items()}

    # -- persistence ---------------------------------------------------------

    def save(self, path, encoder_info: Optional[dict] = None,
             train_config: Optional[dict] = None) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_json(),
            "encoder": encoder_info,
            "train_config": train_config,
            "tensors": {k: v.tolist() for k, v in self.as_dict().items()},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> tuple["ModelParams", dict]:
        """Returns (params, metadata); metadata holds encoder/train_config."""
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise LoadError(f"not a {CHECKPOINT_FORMAT} checkpoint: {path}")
        config = ModelConfig(**payload["config"])
        tensors = {k: np.asarray(v, dtype=float)
                   for k, v in payload["tensors"].items()}
        meta = {"encoder": payload.get("encoder"),
                "train_config": payload.get("train_config")}
        return cls(config, tensors), meta


class GraphTensors:
    """Edge arrays for one graph: both directions, sorted by destination."""

    def __init__(self, graph: EvidenceGraph):
        self.n_nodes = graph.n_nodes
        ev = np.array([e[0] for e in graph.edges], dtype=np.int64)
        ent = np.array([e[1] for e in graph.edges], dtype=np.int64)
        dst = np.concatenate([ev, ent])
        src = np.concatenate([ent, ev])
        order = np.lexsort((src, dst))
        self.dst = dst[order]
        self.src = src[order]
        self.n_edges = len(self.dst)
        if self.n_edges:
            starts = np.flatnonzero(np.r_[True, self.dst[1:] != self.dst[:-1]])
            self.seg_starts = starts
            self.seg_nodes = self.dst[starts]
            self.seg_sizes = np.diff(np.r_[starts, self.n_edges])
            self.edge_seg = np.repeat(np.arange(len(starts)), self.seg_sizes)
        else:
            self.seg_starts = np.zeros(0, dtype=np.int64)
            self.seg_nodes = np.zeros(0, dtype=np.int64)
            self.seg_sizes = np.zeros(0, dtype=np.int64)
            self.edge_seg = np.zeros(0, dtype=np.int64)
        self.drug_idx = np.array(graph.drug_node_indices, dtype=np.int64)
        self.evidence_idx = np.array(graph.evidence_node_indices, dtype=np.int64)


def _segment_softmax(z: np.ndarray, gt: GraphTensors) -> np.ndarray:
    """Softmax of z within each destination segment."""
    zmax = np.maximum.reduceat(z, gt.seg_starts)
    ez = np.exp(z - zmax[gt.edge_seg])
    denom = np.add.reduceat(ez, gt.seg_starts)
    return ez / denom[gt.edge_seg]


def attention_weights(node_matrix: np.ndarray, patient_vec: np.ndarray,
                      w_attn: np.ndarray, neighbor_idx) -> np.ndarray:
    """Attention over one neighborhood: softmax of (W_a x_j) . p."""
    neighbor_idx = np.asarray(neighbor_idx, dtype=np.int64)
    if neighbor_idx.size == 0:
        return np.zeros(0)
    z = node_matrix[neighbor_idx] @ (w_attn.T @ patient_vec)
    z = z - z.max()
    ez = np.exp(z)
    return ez / ez.sum()


@dataclass
class LayerCache:
    x_prev: np.ndarray     # (N, d) input states
    alpha: np.ndarray      # (E,) per directed edge
    msum: np.ndarray       # (N, d) aggregated messages (zero rows if isolated)
    pre: Optional[np.ndarray] = None   # pre-activation, only when activation != none


def message_pass(gt: GraphTensors, x: np.ndarray, patient_vec: np.ndarray,
                 w_attn: np.ndarray, w_msg: np.ndarray,
                 mode: str = "patient", activation: str = "none"
                 ) -> tuple[np.ndarray, LayerCache]:
    """One synchronous residual update of every node state."""
    n, d = x.shape
    msum = np.zeros((n, d))
    if gt.n_edges == 0:
        return x.copy(), LayerCache(x_prev=x, alpha=np.zeros(0), msum=msum)
    if mode == "uniform":
        alpha = 1.0 / gt.seg_sizes[gt.edge_seg].astype(float)
    else:
        z = (x @ (w_attn.T @ patient_vec))[gt.src]
        alpha = _segment_softmax(z, gt)
    contrib = alpha[:, None] * x[gt.src]
    msum[gt.seg_nodes] = np.add.reduceat(contrib, gt.seg_starts, axis=0)
    pre = x + msum @ w_msg.T
    if activation == "none":
        return pre, LayerCache(x_prev=x, alpha=alpha, msum=msum)
    updated = np.zeros(n, dtype=bool)
    updated[gt.seg_nodes] = True
    out = np.where(updated[:, None],
                   np.maximum(pre, 0.0) if activation == "relu" else np.tanh(pre),
                   x)
    return out, LayerCache(x_prev=x, alpha=alpha, msum=msum, pre=pre)


def _layer_backward(gt: GraphTensors, cache: LayerCache, g_out: np.ndarray,
                    patient_vec: np.ndarray, w_attn: np.ndarray,
                    w_msg: np.ndarray, mode: str, activation: str
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gradient of one layer. Returns (g_in, dW_a, dW_m, dp)."""
    d = w_msg.shape[0]
    if gt.n_edges == 0:
        return g_out.copy(), np.zeros((d, d)), np.zeros((d, d)), np.zeros(d)
    g = g_out
    if activation != "none":
        updated = np.zeros(gt.n_nodes, dtype=bool)
        updated[gt.seg_nodes] = True
        if activation == "relu":
            deriv = (cache.pre > 0).astype(float)
        else:
            deriv = 1.0 - np.tanh(cache.pre) ** 2
        g = np.where(updated[:, None], g_out * deriv, g_out)

    x = cache.x_prev
    dw_msg = g.T @ cache.msum               # sum_n outer(g_n, m_n)
    h = g @ w_msg                           # dL/d msum, (N, d)
    g_in = g.copy()                         # residual path
    h_dst = h[gt.dst]
    np.add.at(g_in, gt.src, cache.alpha[:, None] * h_dst)

    dw_attn = np.zeros((d, d))
    dp = np.zeros(d)
    if mode == "patient":
        dalpha = np.einsum("ed,ed->e", h_dst, x[gt.src])
        inner = np.add.reduceat(cache.alpha * dalpha, gt.seg_starts)
        dz = cache.alpha * (dalpha - inner[gt.edge_seg])
        a = w_attn.T @ patient_vec
        np.add.at(g_in, gt.src, dz[:, None] * a[None, :])
        svec = (dz[:, None] * x[gt.src]).sum(axis=0)   # sum_e dz_e x_src
        dw_attn = np.outer(patient_vec, svec)
        dp = w_attn @ svec
    return g_in, dw_attn, dw_msg, dp


def _softmax(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max())
    return e / e.sum()


@dataclass
class ScoreResult:
    entity_scores: np.ndarray
    entity_probs: np.ndarray
    evidence_scores: np.ndarray
    evidence_probs: np.ndarray


def score_nodes(x: np.ndarray, patient_vec: np.ndarray, params: ModelParams,
                drug_idx, evidence_idx) -> ScoreResult:
    """Bilinear scores + per-family softmax for drug and evidence nodes."""
    drug_idx = np.asarray(drug_idx, dtype=np.int64)
    evidence_idx = np.asarray(evidence_idx, dtype=np.int64)
    if drug_idx.size == 0:
        raise ValueError("no drug nodes to score")
    s_ent = x[drug_idx] @ (params.w_entity @ patient_vec) + float(params.b_entity)
    s_ev = x[evidence_idx] @ (params.w_evidence @ patient_vec) + float(params.b_evidence)
    return ScoreResult(entity_scores=s_ent, entity_probs=_softmax(s_ent),
                       evidence_scores=s_ev,
                       evidence_probs=_softmax(s_ev) if s_ev.size else s_ev)


def _bce(q: np.ndarray, y: np.ndarray, eps: float) -> float:
    qc = np.clip(q, eps, 1.0 - eps)
    return float(-(y * np.log(qc) + (1.0 - y) * np.log(1.0 - qc)).mean())


def multitask_loss(scores: ScoreResult, entity_labels, evidence_labels,
                   weights: tuple[float, float] = DEFAULT_TASK_WEIGHTS,
                   eps: float = EPS) -> tuple[float, dict]:
    """Weighted sum of the two BCE terms. Entity labels must not be all-zero."""
    y_ent = np.asarray(entity_labels, dtype=float)
    y_ev = np.asarray(evidence_labels, dtype=float)
    if y_ent.size == 0 or not y_ent.any():
        raise ValueError("degenerate instance: no positive entity label")
    ent = _bce(scores.entity_probs, y_ent, eps)
    ev = _bce(scores.evidence_probs, y_ev, eps) if y_ev.size else 0.0
    total = weights[0] * ent + weights[1] * ev
    return total, {"entity_bce": ent, "evidence_bce": ev,
                   "weights": list(weights)}


@dataclass
class ForwardState:
    x_layers: list           # states per layer, x_layers[0] is the input
    caches: list             # LayerCache per layer
    scores: ScoreResult


def forward(gt: GraphTensors, node_matrix: np.ndarray, patient_vec: np.ndarray,
            params: ModelParams) -> ForwardState:
    cfg = params.config
    x = np.asarray(node_matrix, dtype=float)
    p = np.asarray(patient_vec, dtype=float)
    x_layers = [x]
    caches = []
    for layer in range(cfg.layers):
        x, cache = message_pass(gt, x, p, params.w_attn[layer],
                                params.w_msg[layer], mode=cfg.attention_mode,
                                activation=cfg.activation)
        x_layers.append(x)
        caches.append(cache)
    scores = score_nodes(x, p, params, gt.drug_idx, gt.evidence_idx)
    return ForwardState(x_layers=x_layers, caches=caches, scores=scores)


def _head_backward(x_final, patient_vec, w, idx, probs, scores, labels,
                   weight, eps):
    """BCE -> softmax -> bilinear head. Returns (dX slice adds, dW, db, dp)."""
    y = np.asarray(labels, dtype=float)
    k = len(idx)
    qc = np.clip(probs, eps, 1.0 - eps)
    dqc = weight * (-(y / qc) + (1.0 - y) / (1.0 - qc)) / k
    inside = (probs > eps) & (probs < 1.0 - eps)
    dq = np.where(inside, dqc, 0.0)
    ds = probs * (dq - float(probs @ dq))
    xg = x_final[idx]
    wp = w @ patient_vec
    dx_rows = np.outer(ds, wp)
    dw = np.outer(xg.T @ ds, patient_vec)
    dp = w.T @ (xg.T @ ds)
    return dx_rows, dw, float(ds.sum()), dp


def loss_and_grads(gt: GraphTensors, node_matrix: np.ndarray,
                   patient_vec: np.ndarray, params: ModelParams,
                   entity_labels, evidence_labels,
                   weights: tuple[float, float] = DEFAULT_TASK_WEIGHTS,
                   eps: float = EPS,
                   want_input_grads: bool = False):
    """Loss and exact parameter gradients for one training instance.

    Returns (loss, grads, state) where grads matches params.as_dict() keys;
    with ``want_input_grads`` the dict also holds "node_matrix" and
    "patient_vec" entries (used by the gradient checks).
    """
    state = forward(gt, node_matrix, patient_vec, params)
    loss, _ = multitask_loss(state.scores, entity_labels, evidence_labels,
                             weights, eps)
    cfg = params.config
    p = np.asarray(patient_vec, dtype=float)
    x_final = state.x_layers[-1]
    grads = params.zero_grads()
    dp = np.zeros_like(p)

    g = np.zeros_like(x_final)
    dx_rows, dw, db, dp_h = _head_backward(
        x_final, p, params.w_entity, gt.drug_idx, state.scores.entity_probs,
        state.scores.entity_scores, entity_labels, weights[0], eps)
    np.add.at(g, gt.drug_idx, dx_rows)
    grads["w_entity"] += dw
    grads["b_entity"] += db
    dp += dp_h
    if gt.evidence_idx.size:
        dx_rows, dw, db, dp_h = _head_backward(
            x_final, p, params.w_evidence, gt.evidence_idx,
            state.scores.evidence_probs, state.scores.evidence_scores,
            evidence_labels, weights[1], eps)
        np.add.at(g, gt.evidence_idx, dx_rows)
        grads["w_evidence"] += dw
        grads["b_evidence"] += db
        dp += dp_h

    for layer in range(cfg.layers - 1, -1, -1):
        g, dw_attn, dw_msg, dp_l = _layer_backward(
            gt, state.caches[layer], g, p, params.w_attn[layer],
            params.w_msg[layer], cfg.attention_mode, cfg.activation)
        grads[f"w_attn.{layer}"] += dw_attn
        grads[f"w_msg.{layer}"] += dw_msg
        dp += dp_l

    if want_input_grads:
        grads["node_matrix"] = g
        grads["patient_vec"] = dp
    return loss, grads, state
