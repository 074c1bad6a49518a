"""Command line interface.

Subcommands: generate, index, train, evaluate, recommend, serve.
Usage errors exit 2 (argparse), operational failures exit 1 with the error
on stderr, success exits 0. Report-producing paths (generate, train,
evaluate) render PNG figures next to their JSONL/CSV outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import benchgen, report, synthkg
from .encoders import HashingEncoder
from .errors import RxGraphError
from .gnn import ModelParams
from .kg import KGStore
from .metrics import evaluate
from .patient import load_dataset, patient_from_json
from .pipeline import Recommender
from .retrieval import BM25Index, build_index
from .train import TrainConfig, preset_config, train


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_generate(args) -> int:
    if bool(args.kg) == bool(args.synth_diseases):
        raise RxGraphError("pass exactly one of --kg or --synth-diseases")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.synth_diseases:
        store = synthkg.make_synth_kg(n_diseases=args.synth_diseases,
                                      seed=args.seed or 0)
        store.dump(out / "kg.jsonl")
    else:
        store = KGStore.load(args.kg)

    cfg_values = {}
    if args.config:
        cfg_values.update(_read_json(args.config))
    if args.planted:
        base = benchgen.planted_config(**cfg_values)
    else:
        base = benchgen.GenConfig(**cfg_values)
    if args.n is not None:
        base.n_patients = args.n
    if args.seed is not None:
        base.seed = args.seed

    llm_filter = None
    symptom_gen = None
    if args.llm:
        client = benchgen.LLMClient(args.llm)
        llm_filter = benchgen.LLMApplicabilityFilter(client)
        symptom_gen = benchgen.LLMSymptomGenerator(client, seed=base.seed)

    result = benchgen.emit_benchmark(store, base, out, symptom_gen=symptom_gen,
                                     llm_filter=llm_filter, strict=args.strict)
    audit = result["audit"]
    report.render_all(out, audit=audit, patients=result["patients"])
    print(json.dumps({"out": str(out), "n_patients": audit["n_patients"],
                      "split_sizes": audit["split_sizes"],
                      "audit_ok": audit["ok"],
                      "counts": audit["counts"]}, indent=2))
    return 0


def cmd_index(args) -> int:
    store = KGStore.load(args.kg)
    index = build_index(store)
    index.save(args.out)
    print(json.dumps({"out": args.out, "documents": index.n_docs,
                      "k1": index.k1, "b": index.b}))
    return 0


def cmd_train(args) -> int:
    values = {}
    if args.config:
        values.update(_read_json(args.config))
    for flag in ("epochs", "lr", "seed", "dim", "layers"):
        val = getattr(args, flag)
        if val is not None:
            values[flag] = val
    if args.attention is not None:
        values["attention_mode"] = args.attention
    config = preset_config(args.preset, **values) if args.preset \
        else TrainConfig(**values)
    print("config: " + json.dumps(config.to_json(), sort_keys=True))

    store = KGStore.load(args.kg)
    index = BM25Index.load_file(args.index)
    train_patients = load_dataset(args.train)
    dev_patients = load_dataset(args.dev) if args.dev else None
    encoder = HashingEncoder(dim=config.dim, seed=config.seed)
    params, log = train(store, index, train_patients, config,
                        dev_patients=dev_patients, encoder=encoder,
                        log_path=args.log, quiet=False)
    params.save(args.out, encoder_info=encoder.info(),
                train_config=config.to_json())
    if args.figures:
        report.render_all(args.figures, train_log=log)
    summary = {"out": args.out, "best_epoch": log["best_epoch"],
               "n_train_instances": log["n_train_instances"],
               "skipped_training_instances": log["skipped_training_instances"]}
    if "best_dev_f1" in log:
        summary["best_dev_f1"] = log["best_dev_f1"]
    print(json.dumps(summary))
    return 0


def _load_recommender(args) -> tuple[KGStore, Recommender]:
    store = KGStore.load(args.kg)
    rec = Recommender.load(store, args.index, args.model)
    return store, rec


def cmd_evaluate(args) -> int:
    store, rec = _load_recommender(args)
    patients = load_dataset(args.data)
    result = evaluate(patients, rec.rank, store, k=args.k)
    out_csv = args.out_csv or "evaluation.csv"
    result.write_csv(out_csv)
    if args.out_json:
        result.write_json(args.out_json)
    if args.figures:
        report.render_all(args.figures, eval_result=result)
    print(json.dumps({"k": result.k, "n_patients": len(result.rows),
                      "means": result.means, "csv": out_csv}, indent=2))
    return 0


def cmd_recommend(args) -> int:
    store, rec = _load_recommender(args)
    patient = patient_from_json(_read_json(args.patient), require_truth=False)
    recommendation = rec.recommend(patient, top_k=args.top_k,
                                   top_evidence=args.top_evidence)
    if args.json:
        print(json.dumps(recommendation.to_json(), ensure_ascii=False, indent=2))
        return 0
    for drug in recommendation.drugs:
        print(f"{drug.rank}. {drug.label} [{drug.drug_id}] "
              f"score={drug.score:.4f}")
        for ev in drug.evidence:
            print(f"     - ({ev.score:.4f}) {ev.text}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app

    store, rec = _load_recommender(args)
    app = create_app(store, rec, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rxgraph",
        description="Traceable drug recommendation over a medical knowledge graph")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic patient benchmark")
    p.add_argument("--kg", help="knowledge graph JSONL")
    p.add_argument("--synth-diseases", type=int,
                   help="build a synthetic KG of this many diseases instead")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="GenConfig JSON file")
    p.add_argument("--n", type=int, help="number of patients")
    p.add_argument("--seed", type=int)
    p.add_argument("--planted", action="store_true",
                   help="use the dense-signal generation profile")
    p.add_argument("--llm", help="base URL of an LLM service for "
                                 "filtering/symptoms")
    p.add_argument("--no-strict", dest="strict", action="store_false",
                   help="do not fail on audit violations")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("index", help="build the BM25 retrieval index")
    p.add_argument("--kg", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("train", help="train the recommendation model")
    p.add_argument("--kg", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--train", required=True, help="training patients JSONL")
    p.add_argument("--dev", help="dev patients JSONL (best-epoch selection)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--preset", choices=["paper", "desk"])
    p.add_argument("--config", help="TrainConfig JSON file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--attention", choices=["patient", "uniform"])
    p.add_argument("--log", help="write the training log JSON here")
    p.add_argument("--figures", help="directory for training figures")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a patient set")
    p.add_argument("--kg", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.add_argument("--figures", help="directory for evaluation figures")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("recommend", help="recommend drugs for one patient")
    p.add_argument("--kg", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--patient", required=True, help="patient JSON file")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--top-evidence", type=int, default=3)
    p.add_argument("--json", action="store_true", help="print the full payload")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--kg", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", help="static directory to mount at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RxGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
