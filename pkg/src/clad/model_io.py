"""Versioned on-disk model format shared by both learner families.

A model file is canonical JSON (sorted keys, UTF-8) with a magic
``format`` tag, a schema ``version``, and a ``family`` discriminator;
the remaining fields are the family payload documented field-by-field in
docs/model-format.md. Floats round-trip exactly through JSON.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ModelFormatError

MAGIC = "clad-model"
VERSION = 1

FAMILIES = ("gbdt", "mlp")


def encode_model(family: str, payload: dict) -> bytes:
    if family not in FAMILIES:
        raise ModelFormatError(f"unknown model family {family!r}")
    doc = {"format": MAGIC, "version": VERSION, "family": family, **payload}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_model(blob: bytes, expect_family: str | None = None) -> dict:
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt or truncated model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MAGIC:
        raise ModelFormatError(f"not a model file (magic header missing or {doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}, expected {VERSION}")
    family = doc.get("family")
    if family not in FAMILIES:
        raise ModelFormatError(f"unknown model family {family!r}")
    if expect_family is not None and family != expect_family:
        raise ModelFormatError(f"expected a {expect_family} model, found {family}")
    return doc


def model_fingerprint(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()[:12]


def save_model(model, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(model.to_bytes())
    return path


def load_model(path: str | Path):
    """Load either family from disk, dispatching on the family tag."""
    blob = Path(path).read_bytes()
    doc = decode_model(blob)
    if doc["family"] == "gbdt":
        from .gbdt import GbdtModel

        return GbdtModel.from_payload(doc)
    from .mlp import MlpModel

    return MlpModel.from_payload(doc)
