"""Text -> vector encoders and patient serialization.

The built-in encoder is a deterministic signed feature hasher: every token
is hashed (keyed blake2b) to a bucket and a sign, counts are accumulated and
the result is L2-normalized. It is seed-stable across processes, needs no
model download, and keeps identical tokens in identical buckets -- which is
what the bilinear scorers exploit to relate patient text to evidence text.

A remote embedding service can be swapped in through ExternalEncoder, which
speaks a tiny JSON protocol:

    GET  /info            -> {"dim": int, ...}
    POST /encode          {"texts": [...]} -> {"vectors": [[...], ...]}
"""

from __future__ import annotations

import hashlib
from typing import Optional, Sequence

import numpy as np
import requests

from .errors import LoadError
from .graph import EvidenceGraph
from .kg import KGStore, population_tag_sort_key
from .patient import PatientEHR
from .tokenize import tokenize

FIELD_SEP = "‖"  # ‖


def serialize_patient(patient: PatientEHR, store: Optional[KGStore] = None) -> str:
    """Render a patient as one delimited line of eight fields.

    Order: age, sex, population tags, allergies, current disease, symptoms,
    past diseases, concomitant drugs. Within a field, values are
    comma-joined; empty fields stay empty. Ids are resolved to labels when a
    store is given and falls back to the raw id otherwise.
    """
    def name(entity_id: str) -> str:
        if store is not None:
            try:
                return store.label_of(entity_id)
            except Exception:
                return entity_id
        return entity_id

    tags = sorted(patient.population_tags, key=population_tag_sort_key)
    fields = [
        str(patient.age),
        patient.sex,
        ", ".join(tags),
        ", ".join(name(a) for a in patient.allergies),
        name(patient.current_disease),
        ", ".join(patient.symptoms),
        ", ".join(name(d) for d in patient.past_diseases),
        ", ".join(name(d) for d in patient.concomitant_drugs),
    ]
    return FIELD_SEP.join(fields)


class HashingEncoder:
    """Signed feature hashing into ``dim`` buckets, L2-normalized."""

    kind = "hashing"

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim <= 0:
            raise ValueError("encoder dim must be positive")
        self.dim = int(dim)
        self.seed = int(seed)
        self._key = str(self.seed).encode("utf-8")
        self._cache: dict[str, tuple[int, float]] = {}

    def _slot(self, token: str) -> tuple[int, float]:
        hit = self._cache.get(token)
        if hit is None:
            h = hashlib.blake2b(token.encode("utf-8"), digest_size=8,
                                key=self._key).digest()
            value = int.from_bytes(h, "little")
            hit = (value % self.dim, 1.0 if value >> 63 & 1 else -1.0)
            self._cache[token] = hit
        return hit

    def encode_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in tokenize(text):
            bucket, sign = self._slot(token)
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self.encode_one(t) for t in texts]) if len(texts) \
            else np.zeros((0, self.dim))

    def info(self) -> dict:
        return {"type": self.kind, "dim": self.dim, "seed": self.seed}


class ExternalEncoder:
    """Client for a remote embedding service (see module docstring)."""

    kind = "external"

    def __init__(self, base_url: str, timeout: float = 30.0,
                 batch_size: int = 64, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.batch_size = batch_size
        self._session = session or requests.Session()
        try:
            resp = self._session.get(self.base_url + "/info", timeout=self.timeout)
            resp.raise_for_status()
            self.dim = int(resp.json()["dim"])
        except Exception as exc:
            raise LoadError(f"encoder service handshake failed at "
                            f"{self.base_url}/info: {exc}") from exc

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        rows: list[list[float]] = []
        texts = list(texts)
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start:start + self.batch_size]
            resp = self._session.post(self.base_url + "/encode",
                                      json={"texts": batch}, timeout=self.timeout)
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
            if len(vectors) != len(batch):
                raise LoadError("encoder service returned "
                                f"{len(vectors)} vectors for {len(batch)} texts")
            rows.extend(vectors)
        out = np.asarray(rows, dtype=float)
        if out.size and out.shape[1] != self.dim:
            raise LoadError(f"encoder service dim changed: expected {self.dim}, "
                            f"got {out.shape[1]}")
        return out.reshape((len(texts), self.dim)) if len(texts) else \
            np.zeros((0, self.dim))

    def info(self) -> dict:
        return {"type": self.kind, "dim": self.dim, "base_url": self.base_url}


def make_encoder(spec: dict) -> HashingEncoder | ExternalEncoder:
    """Build an encoder from its info/config dict (checkpoint round-trip)."""
    kind = spec.get("type", "hashing")
    if kind == "hashing":
        return HashingEncoder(dim=int(spec.get("dim", 64)),
                              seed=int(spec.get("seed", 0)))
    if kind == "external":
        return ExternalEncoder(spec["base_url"])
    raise LoadError(f"unknown encoder type: {kind!r}")


def encode_graph(graph: EvidenceGraph, patient: PatientEHR, encoder,
                 store: Optional[KGStore] = None) -> tuple[np.ndarray, np.ndarray]:
    """(patient_vec, node_matrix) for one evidence graph.

    Node rows follow graph node order. Raises on NaN/Inf so that a bad
    external encoder fails loudly instead of corrupting training.
    """
    texts = [serialize_patient(patient, store)] + [n.text for n in graph.nodes]
    vectors = encoder.encode(texts)
    if not np.isfinite(vectors).all():
        raise LoadError("encoder produced non-finite values")
    return vectors[0], vectors[1:]
