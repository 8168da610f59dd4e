from .api import ModelRegistry, create_app
from .store import DecisionEntry, SessionState, SessionStore, session_agreement

__all__ = [
    "ModelRegistry",
    "create_app",
    "DecisionEntry",
    "SessionState",
    "SessionStore",
    "session_agreement",
]
