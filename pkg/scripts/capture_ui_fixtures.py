"""Regenerate frontend/tests/fixtures/twin.json from a real service run.

Trains the planted-corpus model (same recipe the acceptance suite freezes),
finds a disease whose treatment options contain a gestation-contraindicated
drug that the model ranks in the top-5 for a non-pregnant patient but not
for her otherwise-identical pregnant twin, then POSTs both patients to the
live FastAPI app and stores the two verbatim response bodies.

Run from the repo root:  PYTHONPATH=src python3 scripts/capture_ui_fixtures.py
"""
import json
import pathlib
import sys

from fastapi.testclient import TestClient

from rxgraph.benchgen import generate_dataset, planted_config, split_dataset
from rxgraph.encoders import HashingEncoder
from rxgraph.pipeline import Recommender
from rxgraph.retrieval import build_index
from rxgraph.service import create_app
from rxgraph.synthkg import find_twin_fixtures, make_synth_kg
from rxgraph.train import preset_config, train

TOP_K = 5
OUT = pathlib.Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures"


def main() -> int:
    store = make_synth_kg(n_diseases=100, seed=7)
    config = planted_config(n_patients=1200, seed=3, max_per_disease=100,
                            past_disease_cap=0)
    patients, _ = generate_dataset(store, config)
    parts = split_dataset(patients, config.split)
    index = build_index(store)

    tc = preset_config("desk", epochs=50, warmup_steps=50, retrieve_k=30, seed=0)
    encoder = HashingEncoder(dim=tc.dim, seed=tc.seed)
    print("training ...", flush=True)
    params, _ = train(store, index, parts["train"], tc,
                      dev_patients=parts["dev"], encoder=encoder)
    rec = Recommender(store, index, params, encoder, retrieve_k=tc.retrieve_k)

    app = create_app(store, rec)
    client = TestClient(app)

    def post(tags):
        body = {"patient": {"patient_id": "ui_fixture", "age": 30,
                            "sex": "female", "current_disease": fix["disease"],
                            "population_tags": tags,
                            "concomitant_drugs": [fix["concomitant"]]},
                "top_k": TOP_K, "top_evidence": 3}
        resp = client.post("/v1/recommend", json=body)
        resp.raise_for_status()
        return resp.json()

    for fix in find_twin_fixtures(store):
        plain = post([])
        pregnant = post(["pregnant"])
        top_plain = [d["drug_id"] for d in plain["recommendations"]]
        top_preg = [d["drug_id"] for d in pregnant["recommendations"]]
        drug = fix["pregnancy_drug"]
        if drug in top_plain and drug not in top_preg:
            OUT.mkdir(parents=True, exist_ok=True)
            out = OUT / "twin.json"
            out.write_text(json.dumps(
                {"plain": plain, "pregnant": pregnant, "contraindicated": drug},
                indent=2, sort_keys=True) + "\n", encoding="utf-8")
            print(f"wrote {out} (drug {drug}, disease {fix['disease']})")
            return 0
    print("no contrasting scenario found", file=sys.stderr)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
