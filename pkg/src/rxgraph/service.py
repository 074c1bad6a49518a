"""HTTP service (FastAPI) exposing the recommender under /v1.

Request bodies are validated by hand so clients get field-level messages:
a bad patient payload returns 400 with ``{"error": {"message", "fields"}}``.
Valid requests the pipeline cannot serve (e.g. no retrieval hit at all)
return 422; unknown resource ids on GET return 404.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import NotFoundError, RxGraphError, ValidationError
from .kg import KGStore
from .patient import patient_from_json
from .pipeline import Recommender

MAX_TOP_K = 50


def _error(status: int, message: str, fields: Optional[dict] = None) -> JSONResponse:
    body: dict = {"error": {"message": message}}
    if fields:
        body["error"]["fields"] = fields
    return JSONResponse(body, status_code=status)


def create_app(store: KGStore, recommender: Recommender,
               ui_dir=None) -> FastAPI:
    app = FastAPI(title="rxgraph", docs_url=None, redoc_url=None)

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/meta")
    def meta():
        return {
            "kg": store.stats(),
            "model": recommender.params.config.to_json(),
            "encoder": recommender.encoder.info(),
            "retrieve_k": recommender.retrieve_k,
        }

    @app.get("/v1/drugs/{drug_id}")
    def drug_detail(drug_id: str):
        try:
            record = store.drug(drug_id)
        except NotFoundError as exc:
            return _error(404, str(exc))
        payload = record.to_json()
        payload["evidence_text"] = store.verbalize(drug_id).text
        payload["treatment_labels"] = [
            store.label_of(t) if t in store.diseases else t
            for t in record.treatments]
        return payload

    @app.post("/v1/recommend")
    async def recommend(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be valid JSON")
        if not isinstance(body, dict) or not isinstance(body.get("patient"), dict):
            return _error(400, "body must be an object with a 'patient' object",
                          fields={"patient": "required object"})

        fields: dict[str, str] = {}
        top_k = body.get("top_k", 5)
        top_evidence = body.get("top_evidence", 3)
        if not isinstance(top_k, int) or isinstance(top_k, bool) \
                or not 1 <= top_k <= MAX_TOP_K:
            fields["top_k"] = f"must be an integer in [1, {MAX_TOP_K}]"
        if not isinstance(top_evidence, int) or isinstance(top_evidence, bool) \
                or not 0 <= top_evidence <= MAX_TOP_K:
            fields["top_evidence"] = f"must be an integer in [0, {MAX_TOP_K}]"

        patient = None
        try:
            patient = patient_from_json(body["patient"], require_truth=False)
        except ValidationError as exc:
            fields.update({f"patient.{k}": v for k, v in exc.fields.items()})
        if fields:
            return _error(400, "invalid request", fields=fields)

        try:
            rec = recommender.recommend(patient, top_k=top_k,
                                        top_evidence=top_evidence)
        except NotFoundError as exc:
            return _error(400, "invalid request",
                          fields={"patient.concomitant_drugs": str(exc)})
        except RxGraphError as exc:
            return _error(422, str(exc))
        return rec.to_json()

    if ui_dir:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")
    return app
