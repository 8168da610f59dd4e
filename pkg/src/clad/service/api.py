"""HTTP API for the scoring and decision-recording service.

Endpoints (all JSON; field-level schemas in docs/api.md):

    GET  /healthz
    GET  /models
    POST /models/train                 -> async job, poll the id
    GET  /models/train/{job_id}
    POST /sessions
    GET  /sessions/{id}
    GET  /sessions/{id}/queue
    POST /sessions/{id}/decisions
    GET  /sessions/{id}/agreement
    GET  /sessions/{id}/whatif?alpha=
    POST /sessions/{id}/close

Money fields are 2-decimal strings, timestamps RFC 3339. When the app is
created with a token, every route except /healthz requires it in the
``X-API-Token`` header.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Header
from pydantic import BaseModel, Field

from .. import gbdt, mlp
from ..cost import CostParams, FpVariant, bayes_threshold, cost_weights, dataset_costs, decide, instance_costs, money_str
from ..data import CladRecord, CreditRating, Dataset
from ..errors import CladError, ConflictError, DegenerateAgreementError, NotFoundError, ValidationError
from ..model_io import load_model, model_fingerprint, save_model
from ..evaluation import agreement_matrix
from ..service.store import DecisionEntry, SessionStore, session_agreement, utc_now


class OpenSessionRequest(BaseModel):
    alpha: float = Field(ge=0)
    model: str
    case_ids: list[str]
    blind: bool = False


class DecisionRequest(BaseModel):
    record_id: str
    decision: int = Field(ge=0, le=1)
    note: Optional[str] = None


class TrainRequest(BaseModel):
    name: str
    family: str
    params: dict = Field(default_factory=dict)
    alpha: float = Field(default=0.2, ge=0)


class ModelRegistry:
    """Lazy, fingerprint-checked access to the model files on disk."""

    def __init__(self, models_dir: str | Path):
        self.models_dir = Path(models_dir)
        self.models_dir.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, tuple[object, str]] = {}
        self._lock = threading.Lock()

    def path_of(self, name: str) -> Path:
        return self.models_dir / f"{name}.json"

    def names(self) -> list[str]:
        return sorted(p.stem for p in self.models_dir.glob("*.json"))

    def get(self, name: str) -> tuple[object, str]:
        with self._lock:
            path = self.path_of(name)
            if not path.exists():
                self._cache.pop(name, None)
                raise NotFoundError(f"unknown model {name!r}")
            if name not in self._cache:
                blob = path.read_bytes()
                self._cache[name] = (load_model(path), model_fingerprint(blob))
            return self._cache[name]

    def put(self, name: str, model) -> str:
        with self._lock:
            save_model(model, self.path_of(name))
            blob = self.path_of(name).read_bytes()
            self._cache[name] = (model, model_fingerprint(blob))
            return self._cache[name][1]


def _entry_view(entry: DecisionEntry, blind: bool) -> dict:
    features = dict(entry.features)
    rating = features.get("rating")
    view = {
        "record_id": entry.record_id,
        "features": {
            **{k: (money_str(v) if k in ("limit_before", "outstanding_balance") else v) for k, v in features.items()},
            "rating": str(CreditRating(int(rating))) if rating is not None else None,
        },
        "decided": entry.decided,
        "committee_decision": entry.committee_decision,
        "committee_note": entry.committee_note,
        "decided_at": entry.decided_at,
    }
    if blind and not entry.decided:
        view["model"] = None
    else:
        view["model"] = {
            "probability": entry.probability,
            "threshold": entry.threshold,
            "decision": entry.model_decision,
            "recommendation": "give" if entry.model_decision == 1 else "deny",
            "c_fp": money_str(entry.c_fp),
            "c_fn": money_str(entry.c_fn),
            "scored_at": entry.scored_at,
        }
    return view


def _session_view(state) -> dict:
    return {
        "session_id": state.session_id,
        "created_at": state.created_at,
        "alpha": state.alpha,
        "model": {"name": state.model_name, "fingerprint": state.model_fingerprint},
        "cost_params": state.cost_params,
        "blind": state.blind,
        "status": state.status,
        "counts": state.counts(),
    }


def create_app(
    *,
    store: SessionStore,
    registry: ModelRegistry,
    cases: dict[str, CladRecord],
    dataset: Dataset | None = None,
    mr: float = 0.05,
    admin_cost: float = 10.0,
    fp_variant: str = "full_limit",
    token: str | None = None,
) -> FastAPI:
    """Wire the service together. ``cases`` is the scoring universe;
    ``dataset`` (labeled) additionally enables async training jobs."""

    app = FastAPI(title="clad scoring service")
    jobs: dict[str, dict] = {}
    jobs_lock = threading.Lock()

    def cost_params_for(alpha: float) -> CostParams:
        return CostParams(alpha=alpha, mr=mr, admin_cost=admin_cost, fp_variant=FpVariant(fp_variant))

    async def require_token(x_api_token: Optional[str] = Header(default=None)) -> None:
        if token is not None and x_api_token != token:
            raise HTTPException(status_code=401, detail="missing or invalid API token")

    guarded = [Depends(require_token)]

    def _http(exc: CladError) -> HTTPException:
        if isinstance(exc, NotFoundError):
            return HTTPException(status_code=404, detail=str(exc))
        if isinstance(exc, ConflictError):
            return HTTPException(status_code=409, detail=str(exc))
        return HTTPException(status_code=400, detail=str(exc))

    def _get_state(session_id: str):
        try:
            return store.get(session_id)
        except CladError as exc:
            raise _http(exc) from None

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"status": "ok", "sessions": len(store.list_ids()), "models": len(registry.names())}

    @app.get("/models", dependencies=guarded)
    async def list_models() -> dict:
        out = []
        for name in registry.names():
            model, fingerprint = registry.get(name)
            family = "gbdt" if isinstance(model, gbdt.GbdtModel) else "mlp"
            out.append({"name": name, "family": family, "fingerprint": fingerprint})
        return {"models": out}

    @app.post("/models/train", dependencies=guarded, status_code=202)
    async def train_model(req: TrainRequest) -> dict:
        if dataset is None or not dataset.has_labels:
            raise HTTPException(status_code=400, detail="service has no labeled dataset to train on")
        if req.family not in ("gbdt", "mlp"):
            raise HTTPException(status_code=400, detail=f"unknown family {req.family!r}")
        job_id = "J-" + uuid.uuid4().hex[:12]
        with jobs_lock:
            jobs[job_id] = {"job_id": job_id, "status": "running", "model": req.name, "submitted_at": utc_now()}

        def run() -> None:
            try:
                params_cls = gbdt.GbdtParams if req.family == "gbdt" else mlp.MlpParams
                params = params_cls(**req.params)
                weights = cost_weights(dataset.labels(), dataset_costs(dataset, cost_params_for(req.alpha)))
                trainer = gbdt.train if req.family == "gbdt" else mlp.train
                model = trainer(dataset, params, weights)
                fingerprint = registry.put(req.name, model)
                with jobs_lock:
                    jobs[job_id].update(status="done", fingerprint=fingerprint, finished_at=utc_now())
            except (CladError, TypeError) as exc:
                with jobs_lock:
                    jobs[job_id].update(status="failed", error=str(exc), finished_at=utc_now())

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job_id, "status": "running"}

    @app.get("/models/train/{job_id}", dependencies=guarded)
    async def job_status(job_id: str) -> dict:
        with jobs_lock:
            if job_id not in jobs:
                raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
            return dict(jobs[job_id])

    @app.post("/sessions", dependencies=guarded, status_code=201)
    async def open_session(req: OpenSessionRequest) -> dict:
        try:
            model, fingerprint = registry.get(req.model)
        except CladError as exc:
            raise _http(exc) from None
        missing = [cid for cid in req.case_ids if cid not in cases]
        if missing:
            raise HTTPException(status_code=404, detail=f"unknown case ids: {missing[:5]}")
        try:
            params = cost_params_for(req.alpha)
            entries = []
            now = utc_now()
            for cid in req.case_ids:
                rec = cases[cid]
                p = model.predict_proba(rec)
                ic = instance_costs(rec, params)
                t = bayes_threshold(ic)
                entries.append(
                    DecisionEntry(
                        record_id=cid,
                        features=rec.feature_map(),
                        scored_at=now,
                        probability=p,
                        threshold=t,
                        c_fp=ic.c_fp,
                        c_fn=ic.c_fn,
                        model_decision=decide(p, t),
                    )
                )
            state = store.open_session(
                alpha=req.alpha,
                model_name=req.model,
                model_fingerprint=fingerprint,
                cost_params={"alpha": req.alpha, "mr": mr, "admin_cost": admin_cost, "fp_variant": fp_variant},
                entries=entries,
                blind=req.blind,
            )
        except CladError as exc:
            raise _http(exc) from None
        return _session_view(state)

    @app.get("/sessions/{session_id}", dependencies=guarded)
    async def get_session(session_id: str) -> dict:
        return _session_view(_get_state(session_id))

    @app.get("/sessions/{session_id}/queue", dependencies=guarded)
    async def get_queue(session_id: str) -> dict:
        state = _get_state(session_id)
        model, _ = registry.get(state.model_name)
        importances = None
        if isinstance(model, gbdt.GbdtModel):
            scores = model.feature_importance()
            order = scores.argsort()[::-1][:5]
            importances = [
                {"feature": model.schema[i], "share": float(scores[i])} for i in order if scores[i] > 0
            ]
        items = [_entry_view(e, state.blind) for e in state.entries.values()]
        return {"session": _session_view(state), "importances": importances, "items": items}

    @app.post("/sessions/{session_id}/decisions", dependencies=guarded, status_code=201)
    async def record_decision(session_id: str, req: DecisionRequest) -> dict:
        try:
            entry = store.record_decision(session_id, req.record_id, req.decision, req.note)
        except CladError as exc:
            raise _http(exc) from None
        return _entry_view(entry, blind=False)

    @app.get("/sessions/{session_id}/agreement", dependencies=guarded)
    async def get_agreement(session_id: str) -> dict:
        state = _get_state(session_id)
        decided = state.decided_entries()
        if not decided:
            raise HTTPException(status_code=400, detail="no decided entries yet; agreement report is empty")
        try:
            report = session_agreement(state)
            payload = report.as_dict()
        except DegenerateAgreementError as exc:
            # counts still flow to the dashboard; kappa itself is undefined
            cm = agreement_matrix(
                [e.committee_decision for e in decided], [e.model_decision for e in decided]
            )
            payload = {
                "matrix": cm.as_dict(),
                "p0": (cm.tp + cm.tn) / cm.n,
                "p1": None,
                "p2": None,
                "pe": 1.0,
                "kappa": None,
                "band": None,
                "degenerate": str(exc),
            }
        except CladError as exc:
            raise _http(exc) from None
        return {"session_id": state.session_id, "counts": state.counts(), **payload}

    @app.get("/sessions/{session_id}/whatif", dependencies=guarded)
    async def whatif(session_id: str, alpha: float) -> dict:
        if alpha < 0:
            raise HTTPException(status_code=400, detail="alpha must be >= 0")
        state = _get_state(session_id)
        if not state.open:
            raise HTTPException(status_code=409, detail="session is closed")
        try:
            params = cost_params_for(alpha)
        except CladError as exc:
            raise _http(exc) from None
        out = []
        flips = 0
        for entry in state.entries.values():
            f = entry.features
            rec = CladRecord(
                record_id=entry.record_id,
                rating=CreditRating(int(f["rating"])),
                label=None,
                **{k: v for k, v in f.items() if k != "rating"},
            )
            ic = instance_costs(rec, params)
            t = bayes_threshold(ic)
            decision = decide(entry.probability, t)
            flipped = decision != entry.model_decision
            flips += flipped
            out.append(
                {
                    "record_id": entry.record_id,
                    "c_fp": money_str(ic.c_fp),
                    "c_fn": money_str(ic.c_fn),
                    "threshold": t,
                    "decision": decision,
                    "recommendation": "give" if decision == 1 else "deny",
                    "flipped": flipped,
                }
            )
        return {"session_id": state.session_id, "alpha": alpha, "flips": flips, "cases": out}

    @app.post("/sessions/{session_id}/close", dependencies=guarded)
    async def close_session(session_id: str) -> dict:
        try:
            state = store.close_session(session_id)
        except CladError as exc:
            raise _http(exc) from None
        return _session_view(state)

    return app
