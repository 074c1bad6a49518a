import numpy as np
import pytest

from rxgraph.kg import (DiseaseRecord, DrugRecord, IngredientRecord, KGStore,
                        SafeUseRule)
from rxgraph.patient import PatientEHR


@pytest.fixture
def toy_store() -> KGStore:
    """Small hand-built knowledge graph with every relation kind present.

    D001/D002 treat gout and share a DDI; D002 carries a pregnancy rule and
    an allergenic ingredient; D003 treats hypertension only.
    """
    drugs = {
        "D001": DrugRecord(
            id="D001", label="colchinol tablets",
            treatments=["dis_gout"], contraindications=["dis_ulcer"],
            ingredients=["ing_colchinol"],
            population_rules=[SafeUseRule("child_below_age(12)", "forbid")],
            interactions=["D002"],
        ),
        "D002": DrugRecord(
            id="D002", label="uratex capsules",
            treatments=["dis_gout", "dis_hyperuricemia"],
            ingredients=["ing_uratex", "ing_lactose"],
            population_rules=[SafeUseRule("pregnant", "forbid"),
                              SafeUseRule("reduced_liver", "caution")],
            # asymmetric on purpose: load/init must symmetrize
            interactions=[],
        ),
        "D003": DrugRecord(
            id="D003", label="pressurol mix",
            treatments=["dis_hypertension"],
            ingredients=["ing_pressurol"],
        ),
    }
    diseases = {
        "dis_gout": DiseaseRecord("dis_gout", "gout"),
        "dis_hyperuricemia": DiseaseRecord("dis_hyperuricemia", "hyperuricemia"),
        "dis_hypertension": DiseaseRecord("dis_hypertension", "hypertension"),
        "dis_ulcer": DiseaseRecord("dis_ulcer", "peptic ulcer"),
        "dis_preg_only": DiseaseRecord(
            "dis_preg_only", "gestational reflux",
            demographics={"sex": "female", "age_min": 18, "age_max": 50}),
    }
    ingredients = {
        "ing_colchinol": IngredientRecord("ing_colchinol", "colchinol"),
        "ing_uratex": IngredientRecord("ing_uratex", "uratex", is_allergen=True),
        "ing_lactose": IngredientRecord("ing_lactose", "lactose", is_allergen=True),
        "ing_pressurol": IngredientRecord("ing_pressurol", "pressurol"),
    }
    return KGStore(drugs=drugs, diseases=diseases, ingredients=ingredients)


@pytest.fixture
def toy_patient() -> PatientEHR:
    return PatientEHR(
        patient_id="p0", age=30, sex="female", current_disease="dis_gout",
        population_tags=["pregnant"], allergies=[],
        symptoms=["joint pain"], past_diseases=[],
        concomitant_drugs=[], ground_truth_drugs=["D001"],
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
