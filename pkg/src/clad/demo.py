"""Deterministic committee-review replay fixture.

A 153-case queue, a hand-built single-split model, and a committee vote
script whose agreement counts land on tp=113, fp=3, fn=7, tn=30
(committee-vs-model convention), i.e. kappa = 0.81, "almost perfect".
Used by the test suite, the console contract fixtures, and the docs
walkthrough.
"""

from __future__ import annotations

import numpy as np

from .data import EXTRA_FEATURES, FEATURE_NAMES, CladRecord, CreditRating, Dataset, Provenance
from .gbdt import GbdtModel, GbdtParams, Tree

#: Agreement cells the vote script produces: both give, committee-only
#: give, model-only give, both deny.
DEMO_AGREEMENT = {"tp": 113, "fp": 3, "fn": 7, "tn": 30}

_MODEL_POSITIVE = DEMO_AGREEMENT["tp"] + DEMO_AGREEMENT["fn"]  # 120
_MODEL_NEGATIVE = DEMO_AGREEMENT["fp"] + DEMO_AGREEMENT["tn"]  # 33

#: The model grants exactly the cases rated BBB or better.
_RATING_CUT = float(CreditRating.BBB) - 0.5


def demo_model() -> GbdtModel:
    """One tree splitting on the rating ordinal with saturating leaves,
    so its probabilities clear any realistic cost threshold."""
    tree = Tree(
        feature=[2, -1, -1],  # schema index of "rating"
        threshold=[_RATING_CUT, 0.0, 0.0],
        left=[1, -1, -1],
        right=[2, -1, -1],
        weight=[0.0, -12.0, 12.0],
        gain=[1.0, 0.0, 0.0],
    )
    return GbdtModel(
        trees=(tree,),
        base_score=0.0,
        schema=FEATURE_NAMES,
        params=GbdtParams(max_depth=1, n_rounds=1, learning_rate=1.0, seed=0),
    )


def demo_cases(seed: int = 2024) -> Dataset:
    """153 unlabeled cases: 120 rated BBB+ (model grants), 33 below."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(_MODEL_POSITIVE + _MODEL_NEGATIVE):
        granted = i < _MODEL_POSITIVE
        rating = CreditRating(int(rng.integers(6, 10) if granted else rng.integers(0, 6)))
        limit = float(np.floor(rng.uniform(200, 5000) * 100) / 100)
        balance = float(np.floor(rng.uniform(0, 0.9) * limit * 100) / 100)
        extras = {name: float(np.round(rng.uniform(0, 1), 6)) for name in EXTRA_FEATURES}
        records.append(
            CladRecord(
                record_id=f"OCT-{i + 1:03d}",
                limit_before=limit,
                outstanding_balance=balance,
                rating=rating,
                account_age_years=float(np.round(rng.uniform(2, 22), 3)),
                label=None,
                **extras,
            )
        )
    return Dataset(FEATURE_NAMES, tuple(records), Provenance("synthetic", f"demo seed={seed}"))


def demo_votes() -> dict[str, int]:
    """Committee verdict per record id, in queue order."""
    votes: dict[str, int] = {}
    for i in range(_MODEL_POSITIVE):
        votes[f"OCT-{i + 1:03d}"] = 1 if i < DEMO_AGREEMENT["tp"] else 0
    for j in range(_MODEL_NEGATIVE):
        votes[f"OCT-{_MODEL_POSITIVE + j + 1:03d}"] = 1 if j < DEMO_AGREEMENT["fp"] else 0
    return votes
