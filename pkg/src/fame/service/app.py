"""HTTP/JSON front end for :class:`PhaseService`."""

from __future__ import annotations

from fastapi import Body, FastAPI, File, Header, HTTPException, Query, UploadFile
from fastapi.responses import JSONResponse

from ..errors import FameError
from ..submission import BundleLayout, ScoringKeys
from .config import PhaseConfig
from .store import AuthError, PhaseService

STATUS_BY_REASON = {
    "outside_window": 403,
    "daily_limit": 429,
    "total_limit": 429,
    "keys_not_loaded": 503,
}


def _bearer(authorization: str | None) -> str | None:
    if not authorization:
        return None
    scheme, _, token = authorization.partition(" ")
    return token.strip() if scheme.lower() == "bearer" else None


def create_app(service: PhaseService) -> FastAPI:
    app = FastAPI(title="FAME scoring service", version="1")
    app.state.service = service

    @app.exception_handler(AuthError)
    def _auth_error(request, exc):
        return JSONResponse({"error": str(exc)}, status_code=401)

    @app.post("/api/v1/submissions")
    def submit(archive: UploadFile = File(...), authorization: str | None = Header(None)):
        record = service.submit(_bearer(authorization), archive.file.read())
        if record.status == "scored":
            status = 201
        elif record.reason and record.reason.startswith("invalid"):
            status = 422
        else:
            status = STATUS_BY_REASON.get(record.reason, 400)
        return JSONResponse(record.to_dict(), status_code=status)

    @app.get("/api/v1/submissions/{submission_id}")
    def get_submission(submission_id: str, authorization: str | None = Header(None),
                       x_admin_token: str | None = Header(None)):
        try:
            record = service.get_submission(submission_id, credential=_bearer(authorization),
                                            admin_token=x_admin_token)
        except KeyError:
            raise HTTPException(404, "no such submission") from None
        return record.to_dict()

    @app.get("/api/v1/leaderboard")
    def leaderboard(phase: str = Query("progress")):
        try:
            return service.leaderboard(phase)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None

    @app.get("/api/v1/phases")
    def phases():
        return service.phase_configs()

    @app.post("/api/v1/admin/teams")
    def register_team(payload: dict = Body(...), authorization: str | None = Header(None)):
        try:
            token = service.register_team(payload["team_id"], payload.get("display_name", payload["team_id"]),
                                          _bearer(authorization), token=payload.get("token"))
        except (KeyError, ValueError) as exc:
            raise HTTPException(400, str(exc)) from None
        return JSONResponse({"team_id": payload["team_id"], "token": token}, status_code=201)

    @app.post("/api/v1/admin/keys")
    def load_keys(payload: dict = Body(...), authorization: str | None = Header(None)):
        token = _bearer(authorization)
        service._check_admin(token)
        try:
            layout = BundleLayout(tuple(payload["languages"]))
            keys = ScoringKeys.from_texts(payload["configurations"], layout)
            digest = service.load_keys(payload["phase"], keys, layout, token)
        except (KeyError, TypeError, ValueError, FameError) as exc:
            raise HTTPException(400, f"malformed keys: {exc}") from None
        return {"phase": payload["phase"], "digest": digest}

    @app.post("/api/v1/admin/phase")
    def set_phase(payload: dict = Body(...), authorization: str | None = Header(None)):
        token = _bearer(authorization)
        service._check_admin(token)
        try:
            cfg = PhaseConfig.from_dict(payload["phase"], payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(400, str(exc)) from None
        service.set_phase_config(cfg, token)
        return cfg.to_dict()

    @app.get("/api/v1/admin/audit")
    def audit(authorization: str | None = Header(None)):
        return service.export_audit(_bearer(authorization))

    return app


def serve(config) -> None:  # pragma: no cover - exercised via subprocess tests
    import uvicorn

    service = PhaseService(config.data_dir, admin_token=config.admin_token, phases=config.phases,
                           snapshot_every=config.snapshot_every)
    uvicorn.run(create_app(service), host=config.host, port=config.port, log_level="warning")
