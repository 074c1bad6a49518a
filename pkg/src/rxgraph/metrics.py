"""Set-overlap metrics, interaction-rate, and batch evaluation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .kg import KGStore
from .patient import PatientEHR

EVAL_COLUMNS = ("patient_id", "n_candidates", "jaccard", "precision", "recall",
                "f1", "ddi_rate", "hit_at_1", "avg_precision")


def set_metrics(predicted: Iterable[str], truth: Iterable[str]) -> dict:
    """Jaccard / precision / recall / F1 between two drug-id sets.

    F1 is 0 when precision + recall is 0; truth must be non-empty.
    """
    pred = set(predicted)
    ref = set(truth)
    if not ref:
        raise ValueError("truth set must not be empty")
    inter = len(pred & ref)
    jaccard = inter / len(pred | ref)
    precision = inter / len(pred) if pred else 0.0
    recall = inter / len(ref)
    f1 = 0.0 if precision + recall == 0 else \
        2 * precision * recall / (precision + recall)
    return {"jaccard": jaccard, "precision": precision,
            "recall": recall, "f1": f1}


def ddi_rate(predicted: Iterable[str], concomitant: Iterable[str],
             store: KGStore) -> float:
    """Fraction of unordered pairs in predicted+concomitant that interact.

    0.0 when fewer than two distinct drugs are involved.
    """
    pool = sorted(set(predicted) | set(concomitant))
    n = len(pool)
    if n < 2:
        return 0.0
    violations = 0
    for i in range(n):
        for j in range(i + 1, n):
            if store.has_ddi(pool[i], pool[j]):
                violations += 1
    return violations / (n * (n - 1) // 2)


def hit_at_1(ranked: Sequence[str], truth: Iterable[str]) -> float:
    ref = set(truth)
    return 1.0 if ranked and ranked[0] in ref else 0.0


def average_precision(ranked: Sequence[str], truth: Iterable[str]) -> float:
    """AP over the full ranking, normalized by |truth|."""
    ref = set(truth)
    if not ref:
        raise ValueError("truth set must not be empty")
    hits = 0
    total = 0.0
    for pos, drug_id in enumerate(ranked, start=1):
        if drug_id in ref:
            hits += 1
            total += hits / pos
    return total / len(ref)


@dataclass
class EvalResult:
    rows: list[dict]
    means: dict
    k: int

    def to_json(self) -> dict:
        return {"k": self.k, "n_patients": len(self.rows),
                "means": self.means, "per_patient": self.rows}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=EVAL_COLUMNS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({c: row[c] for c in EVAL_COLUMNS})

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)


def read_csv_means(path) -> dict:
    """Recompute column means from a per-patient CSV (consistency checks)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"empty evaluation csv: {path}")
    numeric = [c for c in EVAL_COLUMNS if c != "patient_id"]
    return {c: sum(float(r[c]) for r in rows) / len(rows) for c in numeric}


def evaluate(patients: Sequence[PatientEHR],
             rank_fn: Callable[[PatientEHR], Sequence[str]],
             store: KGStore, k: int = 5) -> EvalResult:
    """Score a ranking function over a patient set.

    ``rank_fn`` returns the full candidate ranking (best first); metrics use
    its top-k prefix except average precision, which uses the whole list.
    """
    rows = []
    for patient in patients:
        ranked = list(rank_fn(patient))
        top = ranked[:k]
        row = {"patient_id": patient.patient_id, "n_candidates": len(ranked)}
        row.update(set_metrics(top, patient.ground_truth_drugs))
        row["ddi_rate"] = ddi_rate(top, patient.concomitant_drugs, store)
        row["hit_at_1"] = hit_at_1(ranked, patient.ground_truth_drugs)
        row["avg_precision"] = average_precision(ranked, patient.ground_truth_drugs)
        rows.append(row)
    if not rows:
        raise ValueError("no patients to evaluate")
    numeric = [c for c in EVAL_COLUMNS if c != "patient_id"]
    means = {c: sum(r[c] for r in rows) / len(rows) for c in numeric}
    return EvalResult(rows=rows, means=means, k=k)
