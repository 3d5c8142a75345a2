"""HTTP service for operator-driven campaigns.

A session wraps one campaign. With an automatic oracle the service runs
the same code path as a headless campaign, so the trace it serves is
identical (timestamps aside) to the file a CLI run would write. With the
``manual`` oracle the service proposes scenarios and waits for the
operator to submit each measured response; the pending proposal survives
restarts because every mutation snapshots the session to disk.

Endpoints (JSON bodies; floats serialized with 17 significant digits):

    POST   /sessions                      create from a config document
    GET    /sessions                      list session ids
    GET    /sessions/{id}                 session summary
    GET    /sessions/{id}/proposal        next scenario (202 while computing)
    POST   /sessions/{id}/observations    submit {x, y}
    GET    /sessions/{id}/estimate        latest estimate
    GET    /sessions/{id}/field           posterior grids (2-D only)
    GET    /sessions/{id}/trace           step records
    DELETE /sessions/{id}

Errors are ``{code, message, field_path?}`` with appropriate status.
"""

import json
import threading
import time
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response

from . import jsonio
from .acquisition import CandidateScore
from .campaign import (
    CampaignConfig,
    CampaignState,
    config_from_dict,
    estimate_for_step,
    eval_omegas,
    initial_points,
    initialize_with_responses,
    select_next,
)
from .errors import DuplicateDesignPointError, InvalidConfigurationError
from .estimator import exceedance_from_moments
from .gp import build_design, extend, posterior_batch

PROPOSAL_MATCH_TOL = 1e-9
_RETRY_HINT_MS = 250


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 field_path: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.field_path = field_path


def _json_response(payload, status: int = 200) -> Response:
    return Response(content=jsonio.dumps(payload) + "\n", status_code=status,
                    media_type="application/json")


class Session:
    """One campaign plus the operator-facing proposal state."""

    def __init__(self, sid: str, config: CampaignConfig, config_doc: dict):
        self.id = sid
        self.config = config
        self.config_doc = config_doc
        self.state: CampaignState | None = None
        self.pending_proposal: dict | None = None
        self.pending_initial: list | None = None  # points awaiting responses
        self.initial_collected: list = []
        self.last_observation: tuple | None = None  # (body, response payload)
        self.created = time.time()
        self.updated = self.created
        self.lock = threading.Lock()
        self._proposal_job: threading.Thread | None = None
        self._proposal_error: Exception | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self, initial_responses=None):
        pts = initial_points(self.config)
        if self.config.oracle.fn is not None:
            responses = [float(self.config.oracle.fn(p)) for p in pts]
            self.state = initialize_with_responses(self.config, pts, responses)
        elif initial_responses is not None:
            if len(initial_responses) != pts.shape[0]:
                raise ApiError(400, "invalid-config",
                               f"expected {pts.shape[0]} initial responses, "
                               f"got {len(initial_responses)}",
                               "initial_responses")
            self.state = initialize_with_responses(
                self.config, pts, [float(y) for y in initial_responses])
        else:
            # operator runs the seed experiments one by one
            self.pending_initial = [np.asarray(p, dtype=float) for p in pts]
            self.initial_collected = []

    def summary(self) -> dict:
        out = {
            "id": self.id,
            "oracle": self.config.oracle.id,
            "dim": self.config.env.dim,
            "step": self.state.step if self.state else 0,
            "sequential_steps": (self.state.sequential_steps
                                 if self.state else 0),
            "initial_count": self.config.initial_count,
            "gamma": self.config.gamma,
            "bounds": [list(map(float, b)) for b in self.config.initial_bounds],
            "pending_proposal": self.pending_proposal,
            "pending_initial": ([list(map(float, p)) for p in self.pending_initial]
                                if self.pending_initial else None),
            "created": self.created,
            "updated": self.updated,
        }
        if self.state:
            est = self.state.estimates[-1]
            out["estimate"] = est.value
            out["std_error"] = est.std_error
        return out

    # -- proposal ----------------------------------------------------------

    def _compute_proposal(self):
        try:
            x, score, sa_iters = select_next(self.state, self.config)
            self.pending_proposal = {
                "x": [float(v) for v in x],
                "info_gain": score.info_gain,
                "lpi": score.lpi,
                "sa_iterations_used": sa_iters,
                "step": self.state.sequential_steps + 1,
            }
        except Exception as exc:  # surfaced on the next poll
            self._proposal_error = exc

    def proposal(self, persist) -> tuple:
        with self.lock:
            if self.state is None:
                raise ApiError(409, "initial-design-pending",
                               "initial design responses not yet complete")
            if self.pending_proposal is not None:
                return self.pending_proposal, 200
            if self._proposal_error is not None:
                exc, self._proposal_error = self._proposal_error, None
                self._proposal_job = None
                raise ApiError(500, "proposal-failed", str(exc))
            if self._proposal_job is None:
                self._proposal_job = threading.Thread(
                    target=self._compute_proposal, daemon=True)
                self._proposal_job.start()
        self._proposal_job.join(timeout=0.15)
        with self.lock:
            if self.pending_proposal is not None:
                self._proposal_job = None
                self.updated = time.time()
                persist(self)
                return self.pending_proposal, 200
        return {"code": "computing", "message": "proposal is being computed",
                "retry_after_ms": _RETRY_HINT_MS}, 202

    # -- observations ------------------------------------------------------

    def _apply_initial_observation(self, body: dict) -> dict:
        x = np.asarray(body.get("x"), dtype=float)
        expected = self.pending_initial[len(self.initial_collected)]
        if x.shape != expected.shape or \
                float(np.max(np.abs(x - expected))) > PROPOSAL_MATCH_TOL:
            raise ApiError(409, "observation-mismatch",
                           f"expected initial design point "
                           f"{[float(v) for v in expected]}")
        if "y" not in body:
            raise ApiError(400, "missing-response", "manual oracle needs y",
                           "y")
        self.initial_collected.append(float(body["y"]))
        if len(self.initial_collected) == len(self.pending_initial):
            pts = np.asarray(self.pending_initial)
            self.state = initialize_with_responses(self.config, pts,
                                                   self.initial_collected)
            self.pending_initial = None
            est = self.state.estimates[-1]
            return {"step": 0, "estimate": est.value,
                    "std_error": est.std_error, "initial_complete": True}
        return {"initial_remaining":
                len(self.pending_initial) - len(self.initial_collected)}

    def observe(self, body: dict, persist) -> dict:
        with self.lock:
            if self.last_observation is not None and \
                    self.last_observation[0] == body:
                return self.last_observation[1]  # exactly-once replay
            if self.pending_initial is not None:
                result = self._apply_initial_observation(body)
                self.last_observation = (body, result)
                self.updated = time.time()
                persist(self)
                return result
            if self.state is None:
                raise ApiError(409, "not-ready", "session not initialized")
            x = np.asarray(body.get("x"), dtype=float)
            if x.shape != (self.config.env.dim,):
                raise ApiError(400, "invalid-observation",
                               "x must match the scenario dimension", "x")
            free_form = self.config.free_form_observations
            if not free_form:
                if self.pending_proposal is None:
                    raise ApiError(409, "no-pending-proposal",
                                   "request a proposal before observing")
                expected = np.asarray(self.pending_proposal["x"], dtype=float)
                if float(np.max(np.abs(x - expected))) > PROPOSAL_MATCH_TOL:
                    raise ApiError(409, "observation-mismatch",
                                   "x does not match the pending proposal")
            if "y" in body and body["y"] is not None:
                y = float(body["y"])
            elif self.config.oracle.fn is not None:
                y = float(self.config.oracle.fn(x))
            else:
                raise ApiError(400, "missing-response",
                               "manual oracle needs y", "y")

            k = self.state.sequential_steps + 1
            score = self.pending_proposal or {}
            try:
                design = extend(self.state.design, x, y, self.config.params)
            except DuplicateDesignPointError as exc:
                raise ApiError(422, "duplicate-design-point", str(exc))
            est = estimate_for_step(self.config, design, k)
            record = {
                "step": k,
                "x_star": [float(v) for v in x],
                "y_star": y,
                "info_gain": float(score.get("info_gain", 0.0)),
                "lpi": float(score.get("lpi", 0.0)),
                "estimate": est.value,
                "std_error": est.std_error,
                "sa_iterations_used": int(score.get("sa_iterations_used", 0)),
                "wall_ms": 0.0,
            }
            self.state = CampaignState(
                design=design,
                estimates=self.state.estimates + [est],
                proposals=self.state.proposals + [CandidateScore(
                    point=x, info_gain=record["info_gain"],
                    lpi=record["lpi"])],
                records=self.state.records + [record],
                initial_count=self.state.initial_count,
            )
            self.pending_proposal = None
            self._proposal_job = None
            result = {"step": k, "estimate": est.value,
                      "std_error": est.std_error}
            self.last_observation = (body, result)
            self.updated = time.time()
            persist(self)
            return result

    # -- read models ---------------------------------------------------------

    def field(self, nx: int, ny: int, cloud: int) -> dict:
        if self.config.env.dim != 2:
            raise ApiError(422, "not-2d",
                           "field rendering requires a 2-D scenario space")
        if self.state is None:
            raise ApiError(409, "not-ready", "session not initialized")
        if not (1 <= nx <= 512 and 1 <= ny <= 512):
            raise ApiError(400, "invalid-grid", "nx and ny must be in [1, 512]")
        b = self.config.initial_bounds
        xs = np.linspace(b[0, 0], b[0, 1], nx)
        ys = np.linspace(b[1, 0], b[1, 1], ny)
        XX, YY = np.meshgrid(xs, ys)
        grid = np.column_stack([XX.ravel(), YY.ravel()])
        means, variances = posterior_batch(grid, self.state.design,
                                           self.config.params)
        p = exceedance_from_moments(means, variances, self.config.gamma,
                                    self.config.params)
        cloud = max(0, min(int(cloud), self.config.eval_samples))
        omegas = eval_omegas(self.config, 0)[:cloud]
        gamma = self.config.gamma
        return {
            "nx": nx, "ny": ny,
            "x": [float(v) for v in xs],
            "y": [float(v) for v in ys],
            "mean": [float(v) for v in means],
            "variance": [float(v) for v in variances],
            "exceedance": [float(v) for v in p],
            "design": {
                "points": [list(map(float, q))
                           for q in self.state.design.points],
                "responses": [float(v) for v in self.state.design.responses],
                "exceeds": [bool(v > gamma)
                            for v in self.state.design.responses],
            },
            "omega_cloud": [list(map(float, q)) for q in omegas],
        }

    # -- persistence ---------------------------------------------------------

    def snapshot(self) -> dict:
        out = {
            "id": self.id,
            "config": self.config_doc,
            "created": self.created,
            "updated": self.updated,
            "pending_proposal": self.pending_proposal,
            "pending_initial": ([list(map(float, p))
                                 for p in self.pending_initial]
                                if self.pending_initial is not None else None),
            "initial_collected": list(self.initial_collected),
            "last_observation": (list(self.last_observation)
                                 if self.last_observation else None),
            "state": None,
        }
        if self.state is not None:
            out["state"] = {
                "points": [list(map(float, p))
                           for p in self.state.design.points],
                "responses": [float(v) for v in self.state.design.responses],
                "initial_count": self.state.initial_count,
                "estimates": [e.as_dict() for e in self.state.estimates],
                "records": self.state.records,
            }
        return out

    @classmethod
    def from_snapshot(cls, doc: dict) -> "Session":
        config = config_from_dict(doc["config"])
        s = cls(doc["id"], config, doc["config"])
        s.created = doc["created"]
        s.updated = doc["updated"]
        s.pending_proposal = doc.get("pending_proposal")
        pi = doc.get("pending_initial")
        s.pending_initial = ([np.asarray(p, dtype=float) for p in pi]
                             if pi is not None else None)
        s.initial_collected = list(doc.get("initial_collected", []))
        lo = doc.get("last_observation")
        s.last_observation = (lo[0], lo[1]) if lo else None
        st = doc.get("state")
        if st is not None:
            from .estimator import ProbabilityEstimate

            design = build_design(np.asarray(st["points"], dtype=float),
                                  st["responses"], config.params)
            s.state = CampaignState(
                design=design,
                estimates=[ProbabilityEstimate(**e) for e in st["estimates"]],
                proposals=[],
                records=list(st["records"]),
                initial_count=int(st["initial_count"]),
            )
        return s


def create_app(state_dir=None) -> FastAPI:
    """Build the service; sessions snapshot into ``state_dir`` if given."""
    app = FastAPI(title="krigseq", docs_url=None, redoc_url=None)
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions
    state_path = Path(state_dir) if state_dir else None

    def persist(session: Session):
        if state_path is None:
            return
        state_path.mkdir(parents=True, exist_ok=True)
        tmp = state_path / f".{session.id}.tmp"
        tmp.write_text(jsonio.dumps(session.snapshot()))
        tmp.replace(state_path / f"{session.id}.json")

    if state_path is not None and state_path.exists():
        for f in sorted(state_path.glob("*.json")):
            try:
                doc = json.loads(f.read_text())
                sessions[doc["id"]] = Session.from_snapshot(doc)
            except Exception:  # unreadable snapshot; skip, don't crash
                continue

    def get_session(sid: str) -> Session:
        s = sessions.get(sid)
        if s is None:
            raise ApiError(404, "unknown-session", f"no session {sid!r}")
        return s

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        payload = {"code": exc.code, "message": exc.message}
        if exc.field_path:
            payload["field_path"] = exc.field_path
        return _json_response(payload, exc.status)

    @app.exception_handler(InvalidConfigurationError)
    async def _config_error(_req: Request, exc: InvalidConfigurationError):
        payload = {"code": "invalid-config", "message": str(exc)}
        if exc.field_path:
            payload["field_path"] = exc.field_path
        return _json_response(payload, 400)

    @app.post("/sessions")
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "invalid-json", "request body is not JSON")
        if isinstance(body, dict) and "config" in body:
            config_doc = body["config"]
            initial_responses = body.get("initial_responses")
            extra = set(body) - {"config", "initial_responses"}
            if extra:
                raise ApiError(400, "invalid-config",
                               f"unknown field {sorted(extra)[0]!r}",
                               sorted(extra)[0])
        else:
            config_doc = body
            initial_responses = None
        config = config_from_dict(config_doc)
        sid = uuid.uuid4().hex
        session = Session(sid, config, config_doc)
        session.start(initial_responses)
        sessions[sid] = session
        persist(session)
        payload = {"id": sid, **session.summary()}
        if session.state is not None:
            payload["initial_design"] = session.state.records[0]["initial_design"]
        return _json_response(payload, 201)

    @app.get("/sessions")
    async def list_sessions():
        return _json_response({"sessions": sorted(sessions)})

    @app.get("/sessions/{sid}")
    async def session_summary(sid: str):
        return _json_response(get_session(sid).summary())

    @app.get("/sessions/{sid}/proposal")
    async def get_proposal(sid: str):
        payload, status = get_session(sid).proposal(persist)
        return _json_response(payload, status)

    @app.post("/sessions/{sid}/observations")
    async def submit_observation(sid: str, request: Request):
        try:
            body = await request.json()
        except Exception:
            raise ApiError(400, "invalid-json", "request body is not JSON")
        if not isinstance(body, dict) or "x" not in body:
            raise ApiError(400, "invalid-observation", "body needs x", "x")
        return _json_response(get_session(sid).observe(body, persist))

    @app.get("/sessions/{sid}/estimate")
    async def get_estimate(sid: str):
        s = get_session(sid)
        if s.state is None:
            raise ApiError(409, "not-ready", "session not initialized")
        est = s.state.estimates[-1]
        return _json_response({"step": s.state.sequential_steps,
                               "estimate": est.value,
                               "std_error": est.std_error,
                               "sample_count": est.sample_count})

    @app.get("/sessions/{sid}/field")
    async def get_field(sid: str, nx: int = 64, ny: int = 64,
                        cloud: int = 500):
        return _json_response(get_session(sid).field(nx, ny, cloud))

    @app.get("/sessions/{sid}/trace")
    async def get_trace(sid: str):
        s = get_session(sid)
        if s.state is None:
            raise ApiError(409, "not-ready", "session not initialized")
        return _json_response({"records": s.state.records})

    @app.delete("/sessions/{sid}")
    async def delete_session(sid: str):
        get_session(sid)
        del sessions[sid]
        if state_path is not None:
            f = state_path / f"{sid}.json"
            if f.exists():
                f.unlink()
        return _json_response({"deleted": True})

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.exists():  # serve the operator UI when it has been built
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
