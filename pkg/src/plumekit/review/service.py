"""HTTP facade over the review store.

Read endpoints expose the granule list, the ranked alert queue, individual
candidates, and the notification export; write endpoints record analyst
decisions. Ingest is deliberately not exposed over HTTP: granules enter
through the library or CLI, the service only reviews them. Authentication
is a single optional bearer token.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .store import ConflictError, ReviewStore, TransitionError

API_SCHEMA_ID = "plumekit.review_api.v1"


class ReviewRequest(BaseModel):
    action: Literal["validate", "validate_with_redraw", "reject"]
    actor: str = "analyst"
    polygon: list[list[tuple[float, float]]] | None = None


class BulkDeleteRequest(BaseModel):
    actor: str = "analyst"


class MonitoringSiteRequest(BaseModel):
    candidate_id: str
    square: tuple[float, float, float, float] = Field(
        description="lon_min, lat_min, lon_max, lat_max")
    actor: str = "analyst"


def create_app(store: ReviewStore, token: str | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="plume review service", version=API_SCHEMA_ID)

    async def require_token(request: Request) -> None:
        if token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or bad bearer token")

    auth = Depends(require_token)

    @app.get("/granules", dependencies=[auth])
    def granules() -> dict:
        return {"schema": API_SCHEMA_ID, "granules": store.granules()}

    @app.get("/queue", dependencies=[auth])
    def queue(sensor: str | None = None,
              date_from: str | None = None,
              date_to: str | None = None,
              bbox: str | None = Query(None, description="lon0,lat0,lon1,lat1"),
              min_score: float | None = None,
              page: int = 0, page_size: int = 50) -> dict:
        box = None
        if bbox is not None:
            parts = bbox.split(",")
            if len(parts) != 4:
                raise HTTPException(status_code=422, detail="bbox needs 4 numbers")
            box = tuple(float(p) for p in parts)
        try:
            result = store.queue(sensor=sensor, date_from=date_from,
                                 date_to=date_to, bbox=box,
                                 min_score=min_score, page=page,
                                 page_size=page_size)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        result["schema"] = API_SCHEMA_ID
        return result

    @app.get("/candidates/{candidate_id}", dependencies=[auth])
    def candidate(candidate_id: str) -> dict:
        try:
            cand = store.get_candidate(candidate_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no candidate {candidate_id!r}")
        return {"schema": API_SCHEMA_ID, "candidate": cand}

    @app.post("/candidates/{candidate_id}/review", dependencies=[auth])
    def review(candidate_id: str, body: ReviewRequest) -> dict:
        try:
            event = store.apply_review(action=body.action, actor=body.actor,
                                       candidate_id=candidate_id,
                                       polygon=body.polygon)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no candidate {candidate_id!r}")
        except TransitionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"schema": API_SCHEMA_ID, "event_id": event.event_id,
                "candidate": store.get_candidate(candidate_id)}

    @app.post("/granules/{granule_id}/bulk-delete", dependencies=[auth])
    def bulk_delete(granule_id: str, body: BulkDeleteRequest) -> dict:
        try:
            event = store.apply_review(action="bulk_delete_unvalidated",
                                       actor=body.actor, granule_id=granule_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no granule {granule_id!r}")
        return {"schema": API_SCHEMA_ID, "event_id": event.event_id,
                "rejected": event.payload["rejected"]}

    @app.post("/monitoring-sites", dependencies=[auth])
    def monitoring_site(body: MonitoringSiteRequest) -> dict:
        try:
            event = store.apply_review(action="create_monitoring_site",
                                       actor=body.actor,
                                       candidate_id=body.candidate_id,
                                       square=body.square)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"no candidate {body.candidate_id!r}")
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"schema": API_SCHEMA_ID, "event_id": event.event_id,
                "site": event.payload}

    @app.get("/monitoring-sites", dependencies=[auth])
    def monitoring_sites() -> dict:
        return {"schema": API_SCHEMA_ID, "sites": store.monitoring_sites()}

    @app.get("/export/notifications", dependencies=[auth])
    def export_notifications(sensor: str | None = None,
                             date_from: str | None = None,
                             date_to: str | None = None) -> dict:
        return {"schema": API_SCHEMA_ID,
                "notifications": store.export_notifications(
                    sensor=sensor, date_from=date_from, date_to=date_to)}

    assets = store.root / "assets"
    if assets.is_dir():
        app.mount("/assets", StaticFiles(directory=assets), name="assets")
    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
