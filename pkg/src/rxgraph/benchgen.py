"""Benchmark generator: demographically structured synthetic patients.

Sampling order per patient (all from one seeded generator, so a run is
reproducible from (store, config.seed)):

1. age from a banded age table, sex ~ Bernoulli(0.5);
2. population tags -- pregnancy/breastfeeding only for women in the
   configured age windows (mutually exclusive, via a single draw), reduced
   liver/renal function for adults, each with the conditional probability
   that makes the *unconditional* rate hit the configured quota; derived
   age tags (child/elderly) come straight from age;
3. a current disease drawn among demographically applicable diseases that
   still have capacity (at most ``max_per_disease`` patients each);
4. allergies (presence decided by quota, identities bound after the
   disease so a configurable share is drawn from candidate-drug
   ingredients and can actually disqualify a candidate);
5. concomitant drugs: 1-3 drugs outside the treating set that interact
   with at least one safe candidate and are themselves safe for the
   patient; past diseases are diseases treated by those drugs;
6. ground truth: treating drugs minus safe-use violations minus DDI
   conflicts with the concomitants.

Steps with unsatisfiable constraints retry with a fresh patient up to
``max_attempts_per_patient`` times before the whole run fails.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
import requests

from .errors import AuditError, GenerationError
from .kg import KGStore
from .patient import PatientEHR

#: (age_lo, age_hi, weight) rows; ages are sampled uniformly inside a band.
DEFAULT_AGE_TABLE = (
    (0, 4, 0.055), (5, 11, 0.080), (12, 17, 0.075), (18, 29, 0.160),
    (30, 44, 0.200), (45, 64, 0.255), (65, 79, 0.130), (80, 100, 0.045),
)

CHILD_AGE = 12
ELDERLY_AGE = 65


class AgeTable:
    def __init__(self, rows=DEFAULT_AGE_TABLE):
        self.rows = [(int(lo), int(hi), float(w)) for lo, hi, w in rows]
        total = sum(w for _, _, w in self.rows)
        if abs(total - 1.0) > 1e-9:
            raise GenerationError(f"age table weights sum to {total}, not 1")
        for lo, hi, _ in self.rows:
            if lo > hi:
                raise GenerationError(f"bad age band [{lo}, {hi}]")
        self._weights = np.array([w for _, _, w in self.rows])

    @property
    def max_age(self) -> int:
        return max(hi for _, hi, _ in self.rows)

    def sample(self, rng: np.random.Generator) -> int:
        band = int(rng.choice(len(self.rows), p=self._weights))
        lo, hi, _ = self.rows[band]
        return int(rng.integers(lo, hi + 1))

    def prob_range(self, lo: int, hi: int) -> float:
        """P(lo <= age <= hi) under band-uniform integer ages."""
        mass = 0.0
        for blo, bhi, w in self.rows:
            left, right = max(blo, lo), min(bhi, hi)
            if left <= right:
                mass += w * (right - left + 1) / (bhi - blo + 1)
        return mass


@dataclass
class GenConfig:
    n_patients: int = 1000
    seed: int = 0
    quota_pregnant: float = 0.035
    quota_breastfeeding: float = 0.054
    quota_reduced_liver: float = 0.029
    quota_reduced_renal: float = 0.094
    quota_allergy: float = 0.20
    pregnant_age: tuple[int, int] = (18, 45)
    breastfeeding_age: tuple[int, int] = (18, 50)
    organ_age_min: int = 18
    max_per_disease: int = 2
    concomitant_range: tuple[int, int] = (1, 3)
    allergy_count_range: tuple[int, int] = (1, 3)
    relevant_allergy_p: float = 0.5
    past_disease_cap: int = 4
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    max_attempts_per_patient: int = 20
    age_table: tuple = DEFAULT_AGE_TABLE

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise GenerationError("split ratios must sum to 1")
        if self.n_patients <= 0:
            raise GenerationError("n_patients must be positive")

    def to_json(self) -> dict:
        out = asdict(self)
        for key in ("pregnant_age", "breastfeeding_age", "concomitant_range",
                    "allergy_count_range", "split"):
            out[key] = list(out[key])
        out["age_table"] = [list(r) for r in self.age_table]
        return out

    def quota_targets(self) -> dict[str, float]:
        return {"pregnant": self.quota_pregnant,
                "breastfeeding": self.quota_breastfeeding,
                "reduced_liver": self.quota_reduced_liver,
                "reduced_renal": self.quota_reduced_renal,
                "allergy": self.quota_allergy}


def planted_config(n_patients: int = 200, seed: int = 0, **overrides) -> GenConfig:
    """Denser-signal profile for small training corpora: every safety
    channel fires often enough for a model to pick it up."""
    base = dict(n_patients=n_patients, seed=seed, quota_pregnant=0.12,
                quota_breastfeeding=0.06, quota_reduced_liver=0.05,
                quota_reduced_renal=0.12, quota_allergy=0.30,
                relevant_allergy_p=0.8)
    base.update(overrides)
    return GenConfig(**base)


# -- optional LLM hooks ------------------------------------------------------

FILTER_DEMOS = [
    ("female, 29, pregnant", "acute nasal inflammation", "yes"),
    ("male, 7", "juvenile dermal dermatitis", "yes"),
    ("male, 41", "primary pelvic syndrome (female patients)", "no"),
    ("female, 83, reduced_renal", "senile articular lesion", "yes"),
    ("male, 3", "degenerative lumbar stenosis of adults", "no"),
    ("female, 55", "chronic gastric ulceration", "yes"),
    ("male, 19", "infantile bronchial spasm", "no"),
    ("female, 36, breastfeeding", "recurrent hepatic edema", "yes"),
]

SYMPTOM_DEMOS = [
    ("acute bronchial inflammation", "cough, wheezing, chest tightness"),
    ("chronic gastric ulceration", "stomach pain, nausea, loss of appetite"),
    ("recurrent articular lesion", "joint pain, swelling, stiffness"),
    ("severe nasal syndrome", "congestion, sneezing, runny nose"),
    ("persistent dermal dermatitis", "itching, redness, flaking skin"),
    ("focal neural neuropathy", "tingling, numbness, burning pain"),
    ("mild ocular edema", "blurred vision, eye pressure, tearing"),
    ("toxic hepatic insufficiency", "fatigue, jaundice, dark urine"),
]


class LLMClient:
    """Minimal JSON completion client: POST {base}/generate."""

    def __init__(self, base_url: str, timeout: float = 30.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def complete(self, task: str, prompt: str) -> str:
        resp = self._session.post(self.base_url + "/generate",
                                  json={"task": task, "prompt": prompt},
                                  timeout=self.timeout)
        resp.raise_for_status()
        return str(resp.json()["text"])


class LLMApplicabilityFilter:
    """Refines the rule-based demographic filter with an LLM yes/no call.

    Always runs *after* the rule filter; any transport or parse failure
    degrades to accepting the rule filter's verdict (counted by the caller).
    """

    def __init__(self, client: LLMClient):
        self.client = client

    def build_prompt(self, summary: str, disease_label: str) -> str:
        lines = ["Decide if the disease plausibly applies to the patient.",
                 "Answer yes or no.", ""]
        for demo_summary, demo_disease, verdict in FILTER_DEMOS:
            lines.append(f"Patient: {demo_summary}")
            lines.append(f"Disease: {demo_disease}")
            lines.append(f"Answer: {verdict}")
            lines.append("")
        lines.append(f"Patient: {summary}")
        lines.append(f"Disease: {disease_label}")
        lines.append("Answer:")
        return "\n".join(lines)

    def judge(self, summary: str, disease_label: str) -> Optional[bool]:
        try:
            text = self.client.complete(
                "disease_filter", self.build_prompt(summary, disease_label))
        except Exception:
            return None
        head = text.strip().lower()
        if head.startswith("yes"):
            return True
        if head.startswith("no"):
            return False
        return None


_SYMPTOM_POOL = [
    "fatigue", "fever", "chills", "nausea", "vomiting", "dizziness",
    "headache", "joint pain", "muscle aches", "swelling", "stiffness",
    "rash", "itching", "redness", "cough", "wheezing", "shortness of breath",
    "chest tightness", "palpitations", "stomach pain", "bloating",
    "loss of appetite", "weight loss", "night sweats", "insomnia",
    "blurred vision", "tearing", "congestion", "sneezing", "sore throat",
    "back pain", "numbness", "tingling", "cramping", "weakness",
    "dry mouth", "frequent urination", "constipation", "diarrhea", "tremor",
]


class TemplateSymptomGenerator:
    """Deterministic per-disease symptom lists drawn from a fixed pool."""

    def __init__(self, seed: int = 0, count_range: tuple[int, int] = (2, 4)):
        self.seed = seed
        self.count_range = count_range

    def generate(self, disease_id: str, disease_label: str,
                 patient: Optional[PatientEHR] = None) -> list[str]:
        digest = hashlib.blake2b(f"{self.seed}:{disease_id}".encode("utf-8"),
                                 digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        count = int(rng.integers(self.count_range[0], self.count_range[1] + 1))
        picks = rng.choice(len(_SYMPTOM_POOL), size=count, replace=False)
        return [_SYMPTOM_POOL[i] for i in sorted(picks)]


class LLMSymptomGenerator:
    """LLM-backed symptom writer with template fallback."""

    def __init__(self, client: LLMClient, seed: int = 0):
        self.client = client
        self.fallback = TemplateSymptomGenerator(seed=seed)
        self.fallback_count = 0

    def build_prompt(self, disease_label: str, patient: PatientEHR) -> str:
        lines = ["Write 2-4 short symptoms a patient with the disease would",
                 "report, comma separated.", ""]
        for demo_disease, demo_symptoms in SYMPTOM_DEMOS:
            lines.append(f"Disease: {demo_disease}")
            lines.append(f"Symptoms: {demo_symptoms}")
            lines.append("")
        lines.append(f"Disease: {disease_label} "
                     f"(patient: {patient.sex}, {patient.age})")
        lines.append("Symptoms:")
        return "\n".join(lines)

    def generate(self, disease_id: str, disease_label: str,
                 patient: Optional[PatientEHR] = None) -> list[str]:
        if patient is not None:
            try:
                text = self.client.complete(
                    "symptoms", self.build_prompt(disease_label, patient))
                items = [s.strip() for s in text.split(",")]
                items = [s for s in items if s][:4]
                if items:
                    return items
            except Exception:
                pass
        self.fallback_count += 1
        return self.fallback.generate(disease_id, disease_label, patient)


# -- sampling ----------------------------------------------------------------

def _cond_prob(quota: float, mass: float, name: str) -> float:
    if quota <= 0:
        return 0.0
    if mass <= 0 or quota / mass > 1.0 + 1e-12:
        raise GenerationError(
            f"{name} quota {quota} is unreachable: eligible mass {mass:.4f}")
    return min(1.0, quota / mass)


def gen_patient_base(config: GenConfig, table: AgeTable,
                     rng: np.random.Generator) -> tuple[PatientEHR, int]:
    """Age, sex, population tags, and the number of allergies to bind later."""
    age = table.sample(rng)
    sex = "female" if rng.random() < 0.5 else "male"
    tags: list[str] = []

    p_lo, p_hi = config.pregnant_age
    b_lo, b_hi = config.breastfeeding_age
    p_preg = _cond_prob(config.quota_pregnant,
                        0.5 * table.prob_range(p_lo, p_hi), "pregnant")
    p_bf = _cond_prob(config.quota_breastfeeding,
                      0.5 * table.prob_range(b_lo, b_hi), "breastfeeding")
    if p_preg + p_bf > 1.0 + 1e-12:
        raise GenerationError("pregnant+breastfeeding quotas exceed the "
                              "eligible population")
    if sex == "female" and b_lo <= age <= b_hi:
        u = rng.random()
        if p_lo <= age <= p_hi and u < p_preg:
            tags.append("pregnant")
        elif u < p_preg + p_bf:
            tags.append("breastfeeding")

    adult_mass = table.prob_range(config.organ_age_min, table.max_age)
    if age >= config.organ_age_min:
        if rng.random() < _cond_prob(config.quota_reduced_liver, adult_mass,
                                     "reduced_liver"):
            tags.append("reduced_liver")
        if rng.random() < _cond_prob(config.quota_reduced_renal, adult_mass,
                                     "reduced_renal"):
            tags.append("reduced_renal")
    if age < CHILD_AGE:
        tags.append(f"child_below_age({CHILD_AGE})")
    if age >= ELDERLY_AGE:
        tags.append(f"elderly_above_age({ELDERLY_AGE})")

    n_allergies = 0
    if rng.random() < config.quota_allergy:
        lo, hi = config.allergy_count_range
        n_allergies = int(rng.integers(lo, hi + 1))
    patient = PatientEHR(age=age, sex=sex, current_disease="",
                         population_tags=tags)
    return patient, n_allergies


class _DiseaseSampler:
    """Vectorized demographic + capacity filter over all diseases."""

    def __init__(self, store: KGStore, max_per_disease: int):
        self.ids = sorted(store.diseases)
        self.max_per_disease = max_per_disease
        n = len(self.ids)
        self.sex_req = np.zeros(n, dtype=np.int8)   # 0 any, 1 female, 2 male
        self.age_min = np.zeros(n, dtype=np.int64)
        self.age_max = np.full(n, 10 ** 6, dtype=np.int64)
        for i, did in enumerate(self.ids):
            demo = store.diseases[did].demographics or {}
            if demo.get("sex") == "female":
                self.sex_req[i] = 1
            elif demo.get("sex") == "male":
                self.sex_req[i] = 2
            self.age_min[i] = demo.get("age_min", 0)
            self.age_max[i] = demo.get("age_max", 10 ** 6)
        self.usage = np.zeros(n, dtype=np.int64)
        self._pos = {d: i for i, d in enumerate(self.ids)}

    def eligible(self, sex: str, age: int) -> np.ndarray:
        want = 1 if sex == "female" else 2
        mask = ((self.usage < self.max_per_disease)
                & ((self.sex_req == 0) | (self.sex_req == want))
                & (self.age_min <= age) & (age <= self.age_max))
        return np.flatnonzero(mask)

    def draw(self, sex: str, age: int, rng: np.random.Generator) -> Optional[str]:
        pool = self.eligible(sex, age)
        if pool.size == 0:
            return None
        return self.ids[int(rng.choice(pool))]

    def commit(self, disease_id: str) -> None:
        self.usage[self._pos[disease_id]] += 1

    def usage_counts(self) -> dict[str, int]:
        return {d: int(self.usage[i]) for i, d in enumerate(self.ids)
                if self.usage[i] > 0}


def _bind_allergies(patient: PatientEHR, n_allergies: int, candidates: list[str],
                    store: KGStore, config: GenConfig,
                    rng: np.random.Generator) -> None:
    if n_allergies == 0:
        return
    global_pool = store.allergen_pool()
    local_pool = sorted({ing for drug_id in candidates
                         for ing in store.drugs[drug_id].ingredients
                         if ing in store.ingredients
                         and store.ingredients[ing].is_allergen})
    chosen: list[str] = []
    for _ in range(n_allergies):
        pool = local_pool if (local_pool and
                              rng.random() < config.relevant_allergy_p) \
            else global_pool
        if not pool:
            break
        pick = pool[int(rng.integers(len(pool)))]
        if pick not in chosen:
            chosen.append(pick)
    patient.allergies = chosen


def _history_and_truth(patient: PatientEHR, store: KGStore, config: GenConfig,
                       rng: np.random.Generator) -> bool:
    """Fill concomitants, past diseases and ground truth. False = retry."""
    treating = store.drugs_treating(patient.current_disease)
    safe = [d for d in treating if not store.violates_safe_use(d, patient)]
    if not safe:
        return False
    treating_set = set(treating)
    partner_pool = sorted({q for d in safe
                           for q in store.drugs[d].interactions
                           if q in store.drugs and q not in treating_set
                           and not store.violates_safe_use(q, patient)})
    if not partner_pool:
        return False
    lo, hi = config.concomitant_range
    want = int(rng.integers(lo, hi + 1))
    take = min(want, len(partner_pool))
    picks = rng.choice(len(partner_pool), size=take, replace=False)
    concomitant = [partner_pool[i] for i in sorted(picks)]

    truth = [d for d in safe
             if not any(store.has_ddi(d, q) for q in concomitant)]
    if not truth:
        return False

    past: list[str] = []
    for q in concomitant:
        for disease_id in store.drugs[q].treatments:
            if disease_id == patient.current_disease or disease_id in past:
                continue
            if disease_id not in store.diseases:
                continue
            if not store.diseases[disease_id].allows(patient.sex, patient.age):
                continue
            past.append(disease_id)
            if len(past) >= config.past_disease_cap:
                break
        if len(past) >= config.past_disease_cap:
            break

    patient.concomitant_drugs = concomitant
    patient.past_diseases = past
    patient.ground_truth_drugs = truth
    return True


def generate_dataset(store: KGStore, config: GenConfig,
                     symptom_gen=None, llm_filter=None
                     ) -> tuple[list[PatientEHR], dict]:
    """Generate ``config.n_patients`` patients; returns (patients, genlog)."""
    rng = np.random.default_rng(config.seed)
    table = AgeTable(config.age_table)
    sampler = _DiseaseSampler(store, config.max_per_disease)
    symptom_gen = symptom_gen or TemplateSymptomGenerator(seed=config.seed)

    patients: list[PatientEHR] = []
    retries = 0
    llm_rejects = 0
    llm_fallbacks = 0
    while len(patients) < config.n_patients:
        for attempt in range(config.max_attempts_per_patient):
            patient, n_allergies = gen_patient_base(config, table, rng)
            disease_id = sampler.draw(patient.sex, patient.age, rng)
            if disease_id is None:
                retries += 1
                continue
            if llm_filter is not None:
                summary = f"{patient.sex}, {patient.age}" + \
                    ("".join(f", {t}" for t in patient.population_tags))
                verdict = llm_filter.judge(summary,
                                           store.diseases[disease_id].label)
                if verdict is None:
                    llm_fallbacks += 1
                elif verdict is False:
                    llm_rejects += 1
                    retries += 1
                    continue
            patient.current_disease = disease_id
            _bind_allergies(patient, n_allergies,
                            store.drugs_treating(disease_id), store, config, rng)
            if not _history_and_truth(patient, store, config, rng):
                retries += 1
                continue
            patient.symptoms = symptom_gen.generate(
                disease_id, store.diseases[disease_id].label, patient)
            patient.patient_id = f"P{len(patients):06d}"
            sampler.commit(disease_id)
            patients.append(patient)
            break
        else:
            raise GenerationError(
                f"gave up after {config.max_attempts_per_patient} attempts "
                f"for patient {len(patients)} (corpus too constrained)")

    genlog = {"n_patients": len(patients), "retries": retries,
              "llm_rejects": llm_rejects, "llm_fallbacks": llm_fallbacks,
              "diseases_used": len(sampler.usage_counts()),
              "config": config.to_json()}
    return patients, genlog


def split_dataset(patients: Sequence[PatientEHR],
                  split: tuple[float, float, float] = (0.6, 0.2, 0.2)
                  ) -> dict[str, list[PatientEHR]]:
    """Deterministic contiguous split; dev/test floor, train keeps the rest."""
    n = len(patients)
    n_dev = int(n * split[1])
    n_test = int(n * split[2])
    n_train = n - n_dev - n_test
    return {"train": list(patients[:n_train]),
            "dev": list(patients[n_train:n_train + n_dev]),
            "test": list(patients[n_train + n_dev:])}


# -- auditing ----------------------------------------------------------------

def audit_dataset(patients: Sequence[PatientEHR], store: KGStore,
                  config: GenConfig, quota_tolerance: float = 0.015) -> dict:
    """Recheck every generator contract on the emitted dataset.

    Violations (must be empty): ground truth or concomitants breaking
    safe-use rules; truth drugs interacting with a concomitant; empty
    truth; demographic mismatch of the current disease; any disease used
    more than ``max_per_disease`` times. Quota deviations are reported
    against ``quota_tolerance`` (meaningful for large n).
    """
    violations: dict[str, list] = {"safe_use": [], "ddi": [], "empty_truth": [],
                                   "demographics": [], "disease_overuse": []}
    usage: dict[str, int] = {}
    tag_counts = {"pregnant": 0, "breastfeeding": 0, "reduced_liver": 0,
                  "reduced_renal": 0}
    n_allergic = 0
    n_children = 0
    n_elderly = 0
    n_female = 0
    internal_ddi_pairs = 0

    for patient in patients:
        pid = patient.patient_id
        usage[patient.current_disease] = usage.get(patient.current_disease, 0) + 1
        if not patient.ground_truth_drugs:
            violations["empty_truth"].append(pid)
        disease = store.diseases.get(patient.current_disease)
        if disease is None or not disease.allows(patient.sex, patient.age):
            violations["demographics"].append(pid)
        for drug_id in (*patient.ground_truth_drugs, *patient.concomitant_drugs):
            if store.violates_safe_use(drug_id, patient):
                violations["safe_use"].append((pid, drug_id))
        for drug_id in patient.ground_truth_drugs:
            for q in patient.concomitant_drugs:
                if store.has_ddi(drug_id, q):
                    violations["ddi"].append((pid, drug_id, q))
        truth = sorted(set(patient.ground_truth_drugs))
        for i in range(len(truth)):
            for j in range(i + 1, len(truth)):
                if store.has_ddi(truth[i], truth[j]):
                    internal_ddi_pairs += 1
        for tag in tag_counts:
            if tag in patient.population_tags:
                tag_counts[tag] += 1
        n_allergic += bool(patient.allergies)
        n_children += patient.age < CHILD_AGE
        n_elderly += patient.age >= ELDERLY_AGE
        n_female += patient.sex == "female"

    violations["disease_overuse"] = sorted(
        d for d, c in usage.items() if c > config.max_per_disease)

    n = max(1, len(patients))
    targets = config.quota_targets()
    measured = {tag: tag_counts[tag] / n for tag in tag_counts}
    measured["allergy"] = n_allergic / n
    quotas = {key: {"target": targets[key], "measured": measured[key],
                    "within_tolerance": abs(targets[key] - measured[key])
                    <= quota_tolerance}
              for key in targets}

    return {
        "n_patients": len(patients),
        "ok": all(not v for v in violations.values()),
        "violations": violations,
        "quotas": quotas,
        "quota_tolerance": quota_tolerance,
        "counts": {"female": n_female, "male": len(patients) - n_female,
                   "children": n_children, "elderly": n_elderly,
                   "allergic": n_allergic,
                   "internal_truth_ddi_pairs": internal_ddi_pairs},
        "disease_usage_histogram": {
            str(k): sum(1 for c in usage.values() if c == k)
            for k in sorted(set(usage.values()))},
    }


def emit_benchmark(store: KGStore, config: GenConfig, out_dir,
                   symptom_gen=None, llm_filter=None,
                   strict: bool = True) -> dict:
    """Generate, split, audit, and write a benchmark to ``out_dir``.

    Writes train/dev/test JSONL files plus ``audit_report.json`` and
    ``generation_log.json``. With ``strict`` (default) an audit violation
    raises :class:`AuditError`.
    """
    from pathlib import Path
    from .patient import dump_dataset

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    patients, genlog = generate_dataset(store, config, symptom_gen=symptom_gen,
                                        llm_filter=llm_filter)
    splits = split_dataset(patients, config.split)
    audit = audit_dataset(patients, store, config)
    audit["split_sizes"] = {name: len(group) for name, group in splits.items()}

    for name, group in splits.items():
        dump_dataset(group, out / f"{name}.jsonl")
    with open(out / "audit_report.json", "w", encoding="utf-8") as fh:
        json.dump(audit, fh, indent=2)
    with open(out / "generation_log.json", "w", encoding="utf-8") as fh:
        json.dump(genlog, fh, indent=2)

    if strict and not audit["ok"]:
        bad = {k: v[:5] for k, v in audit["violations"].items() if v}
        raise AuditError(f"benchmark audit failed: {bad}")
    return {"splits": splits, "audit": audit, "genlog": genlog,
            "patients": patients}
