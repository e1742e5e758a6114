"""HTTP service for the rating-study protocol and agreement reports.

Thin JSON layer over the study module: study creation, per-rater item
sequencing, rating capture (with conflict rejection), and report
generation.  Can also serve a static single-page client from `/`. All
study mutations go through a StudyStore, which serializes writers per
study.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import (
    CanineLabError,
    ConflictingRating,
    DuplicateStudyId,
    GeometryError,
    LabelSpaceMismatch,
    OutOfOrderRating,
    PhaseNotOpen,
    StudyError,
)
from .geometry import Space
from .study import StudyStore, rated_count, study_status

# Error classes with a fixed HTTP status; anything else from the domain
# surfaces as 400 (create) or 404 (lookup paths) below.
_ERROR_STATUS = (
    (DuplicateStudyId, 409),
    (ConflictingRating, 409),
    (OutOfOrderRating, 409),
    (PhaseNotOpen, 409),
    (LabelSpaceMismatch, 400),
    (GeometryError, 400),
)


class CreateStudyBody(BaseModel):
    study_id: str
    cases: list[str]
    raters: dict[str, str]
    space: str = "THREE"
    seed: int = 0
    trainer_id: str = "trainer"
    trainer_labels: dict[str, str] | None = None
    assets: dict[str, str] | None = None


class RatingBody(BaseModel):
    case: str
    label: str
    elapsed_s: float | None = None


def create_app(studies_dir=None, static_dir=None, store: StudyStore | None = None) -> FastAPI:
    """Build the service around a studies directory (or an existing store)."""
    if store is None:
        if studies_dir is None:
            raise ValueError("need studies_dir or store")
        store = StudyStore(studies_dir)

    app = FastAPI(title="canine-lab", version="0.1.0")
    app.state.store = store

    for exc_type, status in _ERROR_STATUS:
        def handler(request: Request, exc: Exception, status=status) -> JSONResponse:
            return JSONResponse({"detail": str(exc)}, status_code=status)

        app.add_exception_handler(exc_type, handler)

    def get_study(study_id: str):
        try:
            return store.get(study_id)
        except StudyError as exc:
            raise HTTPException(404, str(exc))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/studies")
    def list_studies() -> dict:
        return {"studies": store.list_ids()}

    @app.post("/studies", status_code=201)
    def create_study_endpoint(body: CreateStudyBody) -> dict:
        try:
            space = Space(body.space.upper())
        except ValueError:
            raise HTTPException(400, f"unknown label space {body.space!r}")
        try:
            study = store.create(
                study_id=body.study_id,
                cases=body.cases,
                raters=body.raters,
                space=space,
                seed=body.seed,
                trainer_id=body.trainer_id,
                trainer_labels=body.trainer_labels,
                assets=body.assets,
            )
        except (DuplicateStudyId, ConflictingRating, LabelSpaceMismatch, GeometryError):
            raise
        except CanineLabError as exc:
            raise HTTPException(400, str(exc))
        return {"manifest": study.manifest_dict(), "status": study_status(study)}

    @app.get("/studies/{study_id}")
    def get_study_endpoint(study_id: str) -> dict:
        study = get_study(study_id)
        return {"manifest": study.manifest_dict(), "status": study_status(study)}

    @app.get("/studies/{study_id}/raters/{rater}/phases/{phase}/next")
    def next_endpoint(study_id: str, rater: str, phase: str) -> dict:
        get_study(study_id)
        try:
            case, study = store.next_item(study_id, rater, phase)
        except PhaseNotOpen:
            raise
        except StudyError as exc:
            raise HTTPException(404, str(exc))
        if case is None:
            return {"done": True, "total": len(study.cases)}
        return {
            "case": case,
            "asset_ref": study.asset_ref(case),
            "position": rated_count(study, rater, phase) + 1,
            "total": len(study.cases),
        }

    @app.post("/studies/{study_id}/raters/{rater}/phases/{phase}/ratings", status_code=201)
    def rate_endpoint(study_id: str, rater: str, phase: str, body: RatingBody) -> dict:
        get_study(study_id)
        try:
            record = store.record(
                study_id, rater, phase, body.case, body.label, elapsed_s=body.elapsed_s
            )
        except (ConflictingRating, OutOfOrderRating, PhaseNotOpen,
                LabelSpaceMismatch, GeometryError):
            raise
        except StudyError as exc:
            raise HTTPException(404, str(exc))
        return record.to_json_dict()

    @app.get("/studies/{study_id}/report")
    def report_endpoint(
        study_id: str, b: int = Query(1000, ge=2, le=100_000)
    ) -> dict:
        get_study(study_id)
        return store.report(study_id, bootstrap_b=b)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
