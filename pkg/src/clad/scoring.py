"""Batch scoring glue: run a model over a dataset under one cost
configuration, producing per-case decisions and evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cost import CostParams, InstanceCosts, bayes_threshold, dataset_costs, decide, total_cost
from .data import Dataset
from .errors import ValidationError
from .evaluation import EvalReport, confusion


@dataclass(frozen=True)
class ScoredCase:
    record_id: str
    probability: float
    threshold: float
    costs: InstanceCosts
    decision: int


def score_dataset(ds: Dataset, model, cost_params: CostParams) -> list[ScoredCase]:
    """Score every case: probability, per-instance threshold, decision."""
    if not ds.records:
        return []
    probs = model.predict_proba_matrix(ds.matrix())
    costs = dataset_costs(ds, cost_params)
    out = []
    for rec, p, ic in zip(ds.records, probs, costs):
        t = bayes_threshold(ic)
        out.append(
            ScoredCase(
                record_id=rec.record_id,
                probability=float(p),
                threshold=t,
                costs=ic,
                decision=decide(float(p), t),
            )
        )
    return out


def fixed_threshold_decisions(scored: Sequence[ScoredCase], threshold: float) -> list[int]:
    return [decide(c.probability, threshold) for c in scored]


def evaluate_model(
    label: str,
    ds: Dataset,
    model,
    cost_params: CostParams,
    threshold: float | None = None,
) -> tuple[EvalReport, list[ScoredCase]]:
    """Score and grade a labeled dataset.

    ``threshold=None`` applies the per-instance cost-minimizing cutoff;
    a float applies one fixed cutoff to every case (e.g. 0.5 for a
    cost-blind baseline).
    """
    if not ds.has_labels:
        raise ValidationError("evaluation requires a labeled dataset")
    scored = score_dataset(ds, model, cost_params)
    if threshold is None:
        decisions = [c.decision for c in scored]
    else:
        decisions = fixed_threshold_decisions(scored, threshold)
    y = ds.labels()
    cm = confusion(y, decisions)
    cost = total_cost(y, decisions, [c.costs for c in scored])
    report = EvalReport(
        label=label,
        dataset_fingerprint=ds.fingerprint(),
        matrix=cm,
        accuracy=(cm.tp + cm.tn) / cm.n,
        total_cost=cost,
    )
    return report, scored


def majority_class_report(label: str, ds: Dataset, cost_params: CostParams) -> EvalReport:
    """Baseline that hands every case the majority-class decision."""
    y = ds.labels()
    majority = int(np.sum(y == 1) >= np.sum(y == 0))
    decisions = [majority] * len(y)
    costs = dataset_costs(ds, cost_params)
    cm = confusion(y, decisions)
    return EvalReport(
        label=label,
        dataset_fingerprint=ds.fingerprint(),
        matrix=cm,
        accuracy=(cm.tp + cm.tn) / cm.n,
        total_cost=total_cost(y, decisions, costs),
    )
