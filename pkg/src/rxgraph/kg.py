"""Medical knowledge graph store: records, loading, verbalization, safety queries.

The store is loaded once from a JSONL file (one record per line, ``kind``
discriminator in ``{drug, disease, ingredient}``) and is immutable
afterwards, so it is safe for any number of concurrent readers.

JSONL schema (see README for the full field table):

    {"kind": "drug", "id": "...", "label": "...", "treatments": [...],
     "ingredients": [...], "contraindications": [...], "interactions": [...],
     "usage": "...", "adverse_reactions": "...",
     "population_rules": [{"tag": "pregnant", "action": "forbid"}, ...]}
    {"kind": "disease", "id": "...", "label": "...",
     "demographics": {"sex": "female", "age_min": 18, "age_max": 45} | null}
    {"kind": "ingredient", "id": "...", "label": "...", "is_allergen": false}

Drug-drug interactions are symmetrized at load time: if A lists B, then B
gains A. Contraindication condition ids may reference either a disease or a
population tag from the closed enumeration in :data:`SIMPLE_POPULATION_TAGS`
plus the parameterized ``child_below_age(n)`` / ``elderly_above_age(n)``
forms.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

from .errors import LoadError, NotFoundError, ParseError

if TYPE_CHECKING:
    from .patient import PatientEHR

SIMPLE_POPULATION_TAGS = ("pregnant", "breastfeeding", "reduced_liver", "reduced_renal")
_AGE_TAG = re.compile(r"^(child_below_age|elderly_above_age)\((\d+)\)$")


def is_population_tag(tag: str) -> bool:
    """True iff ``tag`` belongs to the closed population-tag enumeration."""
    return tag in SIMPLE_POPULATION_TAGS or bool(_AGE_TAG.match(tag))


def population_tag_sort_key(tag: str) -> tuple[int, str]:
    """Canonical ordering used when emitting tag sets as text."""
    if tag in SIMPLE_POPULATION_TAGS:
        return (SIMPLE_POPULATION_TAGS.index(tag), tag)
    m = _AGE_TAG.match(tag)
    if m:
        return (4 if m.group(1) == "child_below_age" else 5, tag)
    return (6, tag)


@dataclass(frozen=True)
class SafeUseRule:
    """Population-conditional restriction attached to a drug.

    ``action`` is ``forbid`` (disqualifies the drug for matching patients)
    or ``caution`` (surfaced in evidence text, never prunes).
    """

    population_tag: str
    action: str

    def __post_init__(self):
        if not is_population_tag(self.population_tag):
            raise LoadError(f"unknown population tag: {self.population_tag!r}")
        if self.action not in ("forbid", "caution"):
            raise LoadError(f"unknown rule action: {self.action!r}")

    def matches(self, age: int, population_tags: Iterable[str]) -> bool:
        """Whether a patient with this age / tag set falls under the rule.

        Age-band tags are evaluated against the patient's age directly, so a
        ``child_below_age(10)`` rule does not depend on which derived tags
        the patient record happens to carry.
        """
        m = _AGE_TAG.match(self.population_tag)
        if m:
            threshold = int(m.group(2))
            if m.group(1) == "child_below_age":
                return age < threshold
            return age >= threshold
        return self.population_tag in set(population_tags)

    def to_json(self) -> dict:
        return {"tag": self.population_tag, "action": self.action}


@dataclass
class DrugRecord:
    id: str
    label: str
    treatments: list[str] = field(default_factory=list)
    ingredients: list[str] = field(default_factory=list)
    contraindications: list[str] = field(default_factory=list)
    interactions: list[str] = field(default_factory=list)
    usage: str = ""
    adverse_reactions: str = ""
    population_rules: list[SafeUseRule] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": "drug",
            "id": self.id,
            "label": self.label,
            "treatments": list(self.treatments),
            "ingredients": list(self.ingredients),
            "contraindications": list(self.contraindications),
            "interactions": list(self.interactions),
            "usage": self.usage,
            "adverse_reactions": self.adverse_reactions,
            "population_rules": [r.to_json() for r in self.population_rules],
        }


@dataclass
class DiseaseRecord:
    id: str
    label: str
    #: optional dict with keys ``sex`` ("male"/"female"), ``age_min``, ``age_max``
    demographics: dict | None = None

    def allows(self, sex: str, age: int) -> bool:
        """Rule-based demographic applicability used by the benchmark generator."""
        if not self.demographics:
            return True
        d = self.demographics
        if d.get("sex") and d["sex"] != sex:
            return False
        if "age_min" in d and age < d["age_min"]:
            return False
        if "age_max" in d and age > d["age_max"]:
            return False
        return True

    def to_json(self) -> dict:
        return {"kind": "disease", "id": self.id, "label": self.label,
                "demographics": self.demographics}


@dataclass
class IngredientRecord:
    id: str
    label: str
    is_allergen: bool = False

    def to_json(self) -> dict:
        return {"kind": "ingredient", "id": self.id, "label": self.label,
                "is_allergen": self.is_allergen}


@dataclass(frozen=True)
class EvidenceText:
    """Deterministic verbalization of one drug's KG facts.

    ``mentioned_entities`` lists every entity id whose label was emitted into
    ``text``, in emission order, deduplicated. Population tags count as
    (pseudo-)entities whether they come from the condition list or from a
    population rule.
    """

    drug_id: str
    text: str
    mentioned_entities: tuple[str, ...]


def _require(cond, msg, line_no=None):
    if not cond:
        raise ParseError(msg, line_no)


def _parse_record(obj: dict, line_no: int):
    kind = obj.get("kind")
    _require(isinstance(obj.get("id"), str) and obj["id"], "missing or empty 'id'", line_no)
    _require(isinstance(obj.get("label"), str), "missing 'label'", line_no)
    if kind == "drug":
        for key in ("treatments", "ingredients", "contraindications", "interactions"):
            val = obj.get(key, [])
            _require(isinstance(val, list) and all(isinstance(x, str) for x in val),
                     f"'{key}' must be a list of ids", line_no)
        rules = []
        for r in obj.get("population_rules", []):
            _require(isinstance(r, dict) and "tag" in r and "action" in r,
                     "population rule needs 'tag' and 'action'", line_no)
            try:
                rules.append(SafeUseRule(r["tag"], r["action"]))
            except LoadError as exc:
                raise ParseError(str(exc), line_no) from exc
        return DrugRecord(
            id=obj["id"], label=obj["label"],
            treatments=list(obj.get("treatments", [])),
            ingredients=list(obj.get("ingredients", [])),
            contraindications=list(obj.get("contraindications", [])),
            interactions=list(obj.get("interactions", [])),
            usage=obj.get("usage", ""),
            adverse_reactions=obj.get("adverse_reactions", ""),
            population_rules=rules,
        )
    if kind == "disease":
        demo = obj.get("demographics")
        _require(demo is None or isinstance(demo, dict), "'demographics' must be an object", line_no)
        return DiseaseRecord(id=obj["id"], label=obj["label"], demographics=demo)
    if kind == "ingredient":
        return IngredientRecord(id=obj["id"], label=obj["label"],
                                is_allergen=bool(obj.get("is_allergen", False)))
    raise ParseError(f"unknown record kind: {kind!r}", line_no)


class KGStore:
    """Indexed, immutable view of the knowledge graph."""

    def __init__(self, drugs: dict[str, DrugRecord], diseases: dict[str, DiseaseRecord],
                 ingredients: dict[str, IngredientRecord]):
        self.drugs = drugs
        self.diseases = diseases
        self.ingredients = ingredients
        self._symmetrize_ddi()
        self.dangling_references = self._scan_dangling()
        # secondary indexes, built once
        self.ids_by_label: dict[str, list[str]] = {}
        for rec in self._all_records():
            self.ids_by_label.setdefault(rec.label.lower(), []).append(rec.id)
        self._treated_by: dict[str, list[str]] = {}
        for drug in self.drugs.values():
            for disease_id in drug.treatments:
                self._treated_by.setdefault(disease_id, []).append(drug.id)
        for lst in self._treated_by.values():
            lst.sort()

    # -- construction ------------------------------------------------------

    @classmethod
    def load(cls, path) -> "KGStore":
        """Load a JSONL knowledge graph file.

        Raises :class:`ParseError` (with the line number) on malformed lines
        and :class:`LoadError` on duplicate ids. Dangling references do not
        fail the load; they are collected in ``store.dangling_references``.
        """
        drugs: dict[str, DrugRecord] = {}
        diseases: dict[str, DiseaseRecord] = {}
        ingredients: dict[str, IngredientRecord] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
                _require(isinstance(obj, dict), "record must be a JSON object", line_no)
                rec = _parse_record(obj, line_no)
                bucket = {DrugRecord: drugs, DiseaseRecord: diseases,
                          IngredientRecord: ingredients}[type(rec)]
                if rec.id in drugs or rec.id in diseases or rec.id in ingredients:
                    raise LoadError(f"duplicate id {rec.id!r} (line {line_no})")
                bucket[rec.id] = rec
        if not (drugs or diseases or ingredients):
            raise LoadError(f"no records found in {path}")
        return cls(drugs, diseases, ingredients)

    def dump(self, path) -> None:
        """Write the store back to JSONL, order-normalized (kind, then id)."""
        with open(path, "w", encoding="utf-8") as fh:
            for group in (self.diseases, self.ingredients, self.drugs):
                for rec_id in sorted(group):
                    fh.write(json.dumps(group[rec_id].to_json(), ensure_ascii=False,
                                        sort_keys=True) + "\n")

    def _all_records(self):
        yield from self.diseases.values()
        yield from self.ingredients.values()
        yield from self.drugs.values()

    def _symmetrize_ddi(self):
        pairs = set()
        for drug in self.drugs.values():
            for other in drug.interactions:
                if other in self.drugs and other != drug.id:
                    pairs.add(frozenset((drug.id, other)))
        partners: dict[str, set[str]] = {d: set() for d in self.drugs}
        for pair in pairs:
            a, b = tuple(pair)
            partners[a].add(b)
            partners[b].add(a)
        for drug in self.drugs.values():
            # keep any dangling partner ids so they still show in the report
            dangling = [x for x in drug.interactions if x not in self.drugs]
            drug.interactions = sorted(partners[drug.id] | set(dangling))

    def _scan_dangling(self) -> list[tuple[str, str]]:
        report = []
        for drug in self.drugs.values():
            for disease_id in drug.treatments:
                if disease_id not in self.diseases:
                    report.append(("drug", disease_id))
            for ing_id in drug.ingredients:
                if ing_id not in self.ingredients:
                    report.append(("drug", ing_id))
            for cond_id in drug.contraindications:
                if cond_id not in self.diseases and not is_population_tag(cond_id):
                    report.append(("drug", cond_id))
            for other in drug.interactions:
                if other not in self.drugs:
                    report.append(("drug", other))
        return sorted(set(report))

    # -- lookups -----------------------------------------------------------

    def label_of(self, entity_id: str) -> str:
        """Label for any entity id; population tags label as themselves."""
        for group in (self.drugs, self.diseases, self.ingredients):
            if entity_id in group:
                return group[entity_id].label
        if is_population_tag(entity_id):
            return entity_id
        raise NotFoundError(f"unknown entity id: {entity_id!r}")

    def entity_kind(self, entity_id: str) -> str:
        if entity_id in self.drugs:
            return "drug"
        if entity_id in self.diseases:
            return "disease"
        if entity_id in self.ingredients:
            return "ingredient"
        if is_population_tag(entity_id):
            return "contraindication"
        raise NotFoundError(f"unknown entity id: {entity_id!r}")

    def lookup_label(self, label: str) -> list[str]:
        return list(self.ids_by_label.get(label.lower(), []))

    def drug(self, drug_id: str) -> DrugRecord:
        try:
            return self.drugs[drug_id]
        except KeyError:
            raise NotFoundError(f"unknown drug id: {drug_id!r}") from None

    def drugs_treating(self, disease_id: str) -> list[str]:
        if disease_id not in self.diseases:
            raise NotFoundError(f"unknown disease id: {disease_id!r}")
        return list(self._treated_by.get(disease_id, []))

    def allergen_pool(self) -> list[str]:
        """Ids usable as patient allergies: flagged ingredients, sorted."""
        return sorted(i.id for i in self.ingredients.values() if i.is_allergen)

    # -- queries -----------------------------------------------------------

    def verbalize(self, drug_id: str) -> EvidenceText:
        """Render a drug's facts into the fixed three-section evidence text.

        Layout: ``Treatments: ... | Contraindications: ... | Ingredients: ...``
        with entity labels joined by ", ". Population rules append to the
        contraindication section (caution rules get a "(use with caution)"
        suffix); a rule whose tag already appears among the condition ids is
        not repeated. Output is a pure function of the drug record.
        """
        drug = self.drug(drug_id)
        mentioned: list[str] = []

        def emit(entity_ids):
            labels = []
            for eid in entity_ids:
                labels.append(self.label_of(eid) if self._resolves(eid) else eid)
                if self._resolves(eid) and eid not in mentioned:
                    mentioned.append(eid)
            return labels

        treat_labels = emit(drug.treatments)
        contra_labels = emit(drug.contraindications)
        listed_tags = set(drug.contraindications)
        for rule in drug.population_rules:
            if rule.population_tag in listed_tags:
                continue
            text = rule.population_tag
            if rule.action == "caution":
                text += " (use with caution)"
            contra_labels.append(text)
            if rule.population_tag not in mentioned:
                mentioned.append(rule.population_tag)
        ing_labels = emit(drug.ingredients)

        text = (f"Treatments: {', '.join(treat_labels)} | "
                f"Contraindications: {', '.join(contra_labels)} | "
                f"Ingredients: {', '.join(ing_labels)}")
        return EvidenceText(drug_id=drug_id, text=text, mentioned_entities=tuple(mentioned))

    def _resolves(self, entity_id: str) -> bool:
        return (entity_id in self.drugs or entity_id in self.diseases
                or entity_id in self.ingredients or is_population_tag(entity_id))

    def has_ddi(self, drug_a: str, drug_b: str) -> bool:
        """True iff the two distinct drugs are declared interaction partners."""
        a, b = self.drug(drug_a), self.drug(drug_b)
        if drug_a == drug_b:
            return False
        return drug_b in a.interactions or drug_a in b.interactions

    def violates_safe_use(self, drug_id: str, patient: "PatientEHR") -> bool:
        """Whether the drug is disqualified for this patient.

        True iff a ``forbid`` rule matches the patient's age/population tags,
        or the patient is allergic to the drug itself or any of its
        ingredients. ``caution`` rules never disqualify.
        """
        drug = self.drug(drug_id)
        for rule in drug.population_rules:
            if rule.action == "forbid" and rule.matches(patient.age, patient.population_tags):
                return True
        allergies = set(patient.allergies)
        if drug_id in allergies:
            return True
        return bool(allergies.intersection(drug.ingredients))

    def stats(self) -> dict:
        return {
            "drugs": len(self.drugs),
            "diseases": len(self.diseases),
            "ingredients": len(self.ingredients),
            "ddi_pairs": sum(len(d.interactions) for d in self.drugs.values()) // 2,
            "dangling_references": len(self.dangling_references),
        }
