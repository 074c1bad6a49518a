"""Synthetic knowledge-graph builder.

Produces a KGStore with controllable size and a structure that mirrors what
the pipeline has to cope with on real data:

* every disease is treated by several drugs (default 8-11), so top-5
  retrieval alone cannot be exact;
* disease labels are three-token compounds ("chronic hepatic inflammation")
  drawn from small adjective/organ/pathology pools: distinct diseases share
  tokens, so retrieval and ranking face realistic partial-overlap
  distractors while the overall vocabulary stays small enough for
  desk-scale hashed encoders;
* drug-drug interactions come in clusters: all members of an "interaction
  group" pairwise interact and share a marker ingredient, so a DDI is
  always visible in the evidence graph as a shared ingredient node;
* a fraction of drugs carries population rules (forbid/caution), which
  surface in the verbalized contraindication section;
* some diseases are demographically restricted (sex- or age-bound);
* every drug lists a few inactive excipients drawn from a tiny shared pool
  (lactose, starch, ...). They carry no safety signal but show up in the
  evidence text and graph exactly like real ingredients, so models have to
  learn to look past high-degree filler nodes.

Deterministic in (sizes, seed).
"""

from __future__ import annotations

import numpy as np

from .kg import DiseaseRecord, DrugRecord, IngredientRecord, KGStore, SafeUseRule

_ONS = ["bar", "cel", "dor", "fen", "gal", "hex", "jol", "kam", "lim", "mer",
        "nov", "pex", "quil", "ras", "sol", "tav", "ux", "vor", "wix", "zan"]
_MID = ["a", "e", "i", "o", "u", "ar", "en", "il", "or", "ut"]
_END = ["bex", "cin", "dol", "fex", "gam", "lin", "mab", "nex", "pril", "rix",
        "sal", "tan", "vir", "zol"]
_DIS_ADJ = ["acute", "chronic", "recurrent", "persistent", "severe",
            "mild", "focal", "diffuse", "primary", "secondary"]
_DIS_ORGAN = ["hepatic", "renal", "cardiac", "gastric", "dermal", "ocular",
              "neural", "bronchial", "articular", "vascular", "pelvic",
              "lumbar"]
_DIS_PATH = ["inflammation", "fibrosis", "stenosis", "neuropathy",
             "dermatitis", "edema", "lesion", "ulceration", "spasm",
             "insufficiency"]
_DOSE_FORMS = ["tablets", "capsules", "oral solution", "granules", "injection"]
_ADVERSE = ["nausea", "dizziness", "headache", "rash", "dry mouth", "fatigue",
            "constipation", "insomnia"]

#: inactive fillers; real-world names on purpose so they never collide with
#: the generated stem vocabulary
_EXCIPIENTS = ["lactose", "starch", "cellulose", "povidone"]

#: disease-label repeats beyond the adjective/organ/pathology combo space
_TYPE_SUFFIX = ["ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x"]

_N_STEMS = len(_ONS) * len(_MID) * len(_MID) * len(_END)


def _stem(i: int) -> str:
    i, e = divmod(i, len(_END))
    i, m2 = divmod(i, len(_MID))
    o, m1 = divmod(i, len(_MID))
    return _ONS[o] + _MID[m1] + _MID[m2] + _END[e]


def make_synth_kg(n_diseases: int = 100, seed: int = 0,
                  treating_range: tuple[int, int] = (8, 11),
                  drugs_per_disease: float = 3.0,
                  p_forbid_rule: float = 0.25, p_caution_rule: float = 0.10,
                  p_disease_contra: float = 0.15,
                  p_allergen: float = 0.30,
                  routed_per_disease: int = 2,
                  excipient_range: tuple[int, int] = (1, 3)) -> KGStore:
    rng = np.random.default_rng(seed)
    n_drugs = int(round(n_diseases * drugs_per_disease))
    n_markers = max(1, n_drugs // 8)
    n_combos = len(_DIS_ADJ) * len(_DIS_ORGAN) * len(_DIS_PATH)
    max_diseases = n_combos * (1 + len(_TYPE_SUFFIX))
    if n_drugs + n_markers > _N_STEMS or n_diseases > max_diseases:
        raise ValueError("requested corpus exceeds the label space")

    stem_ids = rng.permutation(_N_STEMS)[: n_drugs + n_markers]
    drug_stems = stem_ids[:n_drugs]
    marker_stems = stem_ids[n_drugs:]
    if n_diseases <= n_combos:
        combo_ids = rng.choice(n_combos, size=n_diseases, replace=False)
    else:
        # cycle the combo space; repeats get a "type ii"-style suffix below
        rounds = -(-n_diseases // n_combos)
        combo_ids = np.concatenate(
            [rng.permutation(n_combos) for _ in range(rounds)])[:n_diseases]

    disease_ids = [f"DIS{i:05d}" for i in range(n_diseases)]
    drug_ids = [f"DRG{i:05d}" for i in range(n_drugs)]

    diseases: dict[str, DiseaseRecord] = {}
    combo_seen: dict[int, int] = {}
    for pos, did in enumerate(disease_ids):
        demo = None
        roll = rng.random()
        if roll < 0.08:
            demo = {"sex": "female"}
        elif roll < 0.14:
            demo = {"sex": "male"}
        elif roll < 0.19:
            demo = {"age_max": 12}
        elif roll < 0.24:
            demo = {"age_min": 65}
        cid = int(combo_ids[pos])
        combo, path_i = divmod(cid, len(_DIS_PATH))
        adj_i, organ_i = divmod(combo, len(_DIS_ORGAN))
        label = f"{_DIS_ADJ[adj_i]} {_DIS_ORGAN[organ_i]} {_DIS_PATH[path_i]}"
        rep = combo_seen.get(cid, 0)
        combo_seen[cid] = rep + 1
        if rep:
            label = f"{label} type {_TYPE_SUFFIX[rep - 1]}"
        diseases[did] = DiseaseRecord(id=did, label=label, demographics=demo)

    # treating sets; drug.treatments accumulates the reverse direction
    treatments: dict[str, list[str]] = {d: [] for d in drug_ids}
    treating: dict[str, list[str]] = {}
    lo, hi = treating_range
    for did in disease_ids:
        size = int(rng.integers(lo, hi + 1))
        picks = rng.choice(n_drugs, size=min(size, n_drugs), replace=False)
        treating[did] = [drug_ids[j] for j in sorted(picks)]
        for drug in treating[did]:
            treatments[drug].append(did)

    # interaction groups: pairwise DDIs + one shared marker ingredient each.
    # Seed with random members, then route `routed_per_disease` treating
    # drugs of every disease into random groups so each candidate set can
    # reach a partner outside itself.
    groups: list[set[str]] = [set() for _ in range(n_markers)]
    for group in groups:
        for j in rng.choice(n_drugs, size=3, replace=False):
            group.add(drug_ids[j])
    for did in disease_ids:
        members = treating[did]
        size = min(routed_per_disease, len(members))
        picked = rng.choice(len(members), size=size, replace=False)
        for j in picked:
            groups[int(rng.integers(n_markers))].add(members[j])

    partners: dict[str, set[str]] = {d: set() for d in drug_ids}
    marker_of_drug: dict[str, list[str]] = {d: [] for d in drug_ids}
    marker_ids = [f"MRK{i:04d}" for i in range(n_markers)]
    for gi, group in enumerate(groups):
        members = sorted(group)
        if len(members) < 2:
            continue
        for a_pos in range(len(members)):
            for b_pos in range(a_pos + 1, len(members)):
                partners[members[a_pos]].add(members[b_pos])
                partners[members[b_pos]].add(members[a_pos])
        for member in members:
            marker_of_drug[member].append(marker_ids[gi])

    ingredients: dict[str, IngredientRecord] = {}
    for gi, mid in enumerate(marker_ids):
        label = _stem(int(marker_stems[gi])) + "ium"
        ingredients[mid] = IngredientRecord(
            id=mid, label=label, is_allergen=bool(rng.random() < 0.10))
    # excipients are never allergens: they must stay pure filler, or they
    # would prune ground truth through the allergy rule
    excipient_ids = []
    if excipient_range[1] > 0:
        for pos, label in enumerate(_EXCIPIENTS):
            eid = f"EXC{pos:04d}"
            ingredients[eid] = IngredientRecord(id=eid, label=label,
                                                is_allergen=False)
            excipient_ids.append(eid)

    drugs: dict[str, DrugRecord] = {}
    tag_pool = ["pregnant", "breastfeeding", "reduced_liver", "reduced_renal",
                "child_below_age(12)", "elderly_above_age(65)"]
    tag_weights = np.array([0.30, 0.15, 0.15, 0.20, 0.12, 0.08])
    for pos, drg in enumerate(drug_ids):
        stem = _stem(int(drug_stems[pos]))
        label = f"{stem.capitalize()} {_DOSE_FORMS[int(rng.integers(len(_DOSE_FORMS)))]}"
        ing_id = f"ING{pos:05d}"
        # the active compound carries the drug's stem, so the same token
        # identifies both (drugs are conventionally named after the compound)
        ingredients[ing_id] = IngredientRecord(
            id=ing_id, label=stem,
            is_allergen=bool(rng.random() < p_allergen))
        rules = []
        if rng.random() < p_forbid_rule:
            tag = str(rng.choice(tag_pool, p=tag_weights))
            rules.append(SafeUseRule(tag, "forbid"))
        if rng.random() < p_caution_rule:
            tag = str(rng.choice(tag_pool, p=tag_weights))
            if tag not in [r.population_tag for r in rules]:
                rules.append(SafeUseRule(tag, "caution"))
        contra: list[str] = []
        if rng.random() < p_disease_contra:
            contra.append(disease_ids[int(rng.integers(n_diseases))])
        fillers: list[str] = []
        if excipient_ids:
            e_lo, e_hi = excipient_range
            n_exc = int(rng.integers(e_lo, e_hi + 1))
            fillers = [excipient_ids[j] for j in
                       sorted(rng.choice(len(excipient_ids), size=n_exc,
                                         replace=False))]
        drugs[drg] = DrugRecord(
            id=drg, label=label,
            treatments=list(treatments[drg]),
            ingredients=[ing_id] + marker_of_drug[drg] + fillers,
            contraindications=contra,
            interactions=sorted(partners[drg]),
            usage=f"Take {int(rng.integers(1, 4))} {label.split()[-1]} daily.",
            adverse_reactions=", ".join(
                str(x) for x in rng.choice(_ADVERSE, size=2, replace=False)),
            population_rules=rules,
        )

    return KGStore(drugs=drugs, diseases=diseases, ingredients=ingredients)


def find_twin_fixtures(store: KGStore) -> list[dict]:
    """All diseases suited to the pregnancy contrast scenario.

    Wanted: a disease (open to adult women) with a pregnancy-forbidden
    treating drug g, and a concomitant drug q outside the treating set that
    interacts with at least one other treating drug but not with g. For
    such a patient pair (identical except for the pregnant tag) the
    expected truth sets differ exactly by g.
    """
    out: list[dict] = []
    for did in sorted(store.diseases):
        if not store.diseases[did].allows("female", 30):
            continue
        treating = store.drugs_treating(did)
        preg = [d for d in treating
                if any(r.population_tag == "pregnant" and r.action == "forbid"
                       for r in store.drugs[d].population_rules)]
        for g in preg:
            partners = sorted({q for other in treating if other != g
                               for q in store.drugs[other].interactions
                               if q in store.drugs and q not in treating
                               and not store.has_ddi(q, g)})
            for q in partners:
                out.append({"disease": did, "pregnancy_drug": g,
                            "concomitant": q, "treating": treating})
    return out


def find_twin_fixture(store: KGStore) -> dict | None:
    """First match of :func:`find_twin_fixtures`, or None."""
    fixtures = find_twin_fixtures(store)
    return fixtures[0] if fixtures else None
