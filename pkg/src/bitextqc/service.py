"""HTTP+JSON review service over a CurationStore.

API (paths and field names are a stable contract consumed by the review UI):
  GET  /api/queue/next?reviewer=<id>  200 {pair_id, src, tgt, score?, lease_expiry} | 204
  POST /api/decision                  200 {ok} | 404 unknown pair | 409 conflict
  GET  /api/stats                     200 {pending, leased, decided, per_label, defect_rate}
  GET  /api/export?limit=<n>&order=<decision|score>   200 JSONL stream
  GET  /                              review UI static bundle
"""
from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.responses import HTMLResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .curation import CurationStore, Decision, Verdict, utc_now_iso
from .errors import BitextError, ConflictError, UnknownPairError
from .model import DiscrepancyLabel

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>bitextqc review</title></head>
<body><p>Review UI bundle not found. Build the frontend and pass --ui-dir,
or use the JSON API under /api/.</p></body></html>
"""


class DecisionBody(BaseModel):
    pair_id: str
    verdict: Verdict
    reviewer: str
    label: DiscrepancyLabel | None = None
    note: str | None = None


def create_app(store: CurationStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="bitextqc curation service")

    @app.get("/api/queue/next")
    def queue_next(reviewer: str = Query(min_length=1)):
        leased = store.next_pending(reviewer)
        if leased is None:
            return Response(status_code=204)
        record, expiry = leased
        body = {"pair_id": record["pair_id"], "src": record["src"], "tgt": record["tgt"]}
        if "score" in record:
            body["score"] = record["score"]
        body["lease_expiry"] = expiry
        return body

    @app.post("/api/decision")
    def post_decision(body: DecisionBody):
        decision = Decision(
            pair_id=body.pair_id,
            verdict=body.verdict,
            reviewer=body.reviewer,
            timestamp=utc_now_iso(),
            label=body.label,
            note=body.note,
        )
        try:
            store.record_decision(decision)
        except UnknownPairError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"ok": True}

    @app.get("/api/stats")
    def get_stats():
        return store.stats()

    @app.get("/api/export")
    def export(limit: int | None = None, order: str = "decision"):
        try:
            records = store.export_gold(limit=limit, order=order)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except BitextError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

        def lines():
            for record in records:
                obj = {"id": record["pair_id"], "src": record["src"], "tgt": record["tgt"]}
                if "score" in record:
                    obj["score"] = record["score"]
                yield json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n"

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return _PLACEHOLDER_PAGE

    return app
