"""Append-only session persistence.

Each meeting session is one JSONL event log; session state is a pure
fold over its events, so replaying a log reconstructs the live state
exactly. Appends are serialized through a per-session lock and a
decision can be recorded at most once per entry.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from ..errors import ConflictError, NotFoundError, ValidationError
from ..evaluation import AgreementReport, agreement_matrix, cohen_kappa


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def new_session_id() -> str:
    return "S-" + uuid.uuid4().hex[:12]


@dataclass
class DecisionEntry:
    record_id: str
    features: dict[str, float]
    scored_at: str
    probability: float
    threshold: float
    c_fp: float
    c_fn: float
    model_decision: int
    committee_decision: int | None = None
    committee_note: str | None = None
    decided_at: str | None = None

    @property
    def decided(self) -> bool:
        return self.committee_decision is not None

    def as_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "features": self.features,
            "scored_at": self.scored_at,
            "probability": self.probability,
            "threshold": self.threshold,
            "c_fp": self.c_fp,
            "c_fn": self.c_fn,
            "model_decision": self.model_decision,
            "committee_decision": self.committee_decision,
            "committee_note": self.committee_note,
            "decided_at": self.decided_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionEntry":
        return cls(**d)


@dataclass
class SessionState:
    session_id: str
    created_at: str
    alpha: float
    model_name: str
    model_fingerprint: str
    cost_params: dict
    blind: bool
    status: str  # "open" | "closed"
    entries: dict[str, DecisionEntry] = field(default_factory=dict)

    @property
    def open(self) -> bool:
        return self.status == "open"

    def decided_entries(self) -> list[DecisionEntry]:
        return [e for e in self.entries.values() if e.decided]

    def counts(self) -> dict[str, int]:
        decided = len(self.decided_entries())
        return {"cases": len(self.entries), "decided": decided, "remaining": len(self.entries) - decided}


def _apply(state: SessionState | None, event: dict) -> SessionState:
    kind = event["type"]
    if kind == "session_opened":
        if state is not None:
            raise ValidationError("duplicate session_opened event")
        return SessionState(
            session_id=event["session_id"],
            created_at=event["ts"],
            alpha=event["alpha"],
            model_name=event["model"]["name"],
            model_fingerprint=event["model"]["fingerprint"],
            cost_params=event["cost_params"],
            blind=event["blind"],
            status="open",
            entries={e["record_id"]: DecisionEntry.from_dict(e) for e in event["entries"]},
        )
    if state is None:
        raise ValidationError(f"event {kind!r} before session_opened")
    if kind == "decision_recorded":
        entry = state.entries[event["record_id"]]
        entry.committee_decision = event["decision"]
        entry.committee_note = event["note"]
        entry.decided_at = event["ts"]
        return state
    if kind == "session_closed":
        state.status = "closed"
        return state
    raise ValidationError(f"unknown event type {kind!r}")


def session_agreement(state: SessionState) -> AgreementReport:
    """Kappa over decided entries, committee-vs-model convention."""
    decided = state.decided_entries()
    if not decided:
        raise ValidationError("no decided entries yet; agreement report is empty")
    committee = [e.committee_decision for e in decided]
    model = [e.model_decision for e in decided]
    return cohen_kappa(agreement_matrix(committee, model))


class SessionStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self._states: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> dict:
        """Persist and return the canonical (as-stored) form of the event,
        so in-memory state is always built from exactly what the log holds."""
        line = json.dumps(event, sort_keys=True)
        with self._path(session_id).open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return json.loads(line)

    def replay(self, session_id: str) -> SessionState:
        """Rebuild state purely from the on-disk log."""
        path = self._path(session_id)
        if not path.exists():
            raise NotFoundError(f"unknown session {session_id!r}")
        state: SessionState | None = None
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    state = _apply(state, json.loads(line))
        if state is None:
            raise ValidationError(f"session log {path} is empty")
        return state

    def get(self, session_id: str) -> SessionState:
        with self._lock(session_id):
            if session_id not in self._states:
                self._states[session_id] = self.replay(session_id)
            return self._states[session_id]

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.sessions_dir.glob("*.jsonl"))

    def open_session(
        self,
        *,
        alpha: float,
        model_name: str,
        model_fingerprint: str,
        cost_params: dict,
        entries: list[DecisionEntry],
        blind: bool = False,
        session_id: str | None = None,
    ) -> SessionState:
        session_id = session_id or new_session_id()
        with self._lock(session_id):
            if self._path(session_id).exists():
                raise ConflictError(f"session {session_id!r} already exists")
            event = {
                "type": "session_opened",
                "session_id": session_id,
                "ts": utc_now(),
                "alpha": alpha,
                "model": {"name": model_name, "fingerprint": model_fingerprint},
                "cost_params": cost_params,
                "blind": blind,
                "entries": [e.as_dict() for e in entries],
            }
            stored = self._append(session_id, event)
            self._states[session_id] = _apply(None, stored)
            return self._states[session_id]

    def record_decision(
        self, session_id: str, record_id: str, decision: int, note: str | None = None
    ) -> DecisionEntry:
        if decision not in (0, 1):
            raise ValidationError(f"decision must be 0 or 1, got {decision!r}")
        with self._lock(session_id):
            if session_id not in self._states:
                self._states[session_id] = self.replay(session_id)
            state = self._states[session_id]
            if not state.open:
                raise ConflictError(f"session {session_id!r} is closed")
            entry = state.entries.get(record_id)
            if entry is None:
                raise NotFoundError(f"no case {record_id!r} in session {session_id!r}")
            if entry.decided:
                raise ConflictError(f"case {record_id!r} already decided in this session")
            event = {
                "type": "decision_recorded",
                "record_id": record_id,
                "decision": decision,
                "note": note,
                "ts": utc_now(),
            }
            stored = self._append(session_id, event)
            _apply(state, stored)
            return entry

    def close_session(self, session_id: str) -> SessionState:
        with self._lock(session_id):
            if session_id not in self._states:
                self._states[session_id] = self.replay(session_id)
            state = self._states[session_id]
            if not state.open:
                raise ConflictError(f"session {session_id!r} is already closed")
            stored = self._append(session_id, {"type": "session_closed", "ts": utc_now()})
            _apply(state, stored)
            return state
