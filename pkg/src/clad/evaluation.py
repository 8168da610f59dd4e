"""Confusion matrices, accuracy/cost reporting, model comparison, and
two-rater agreement via Cohen's kappa.

Two conventions share the ConfusionMatrix type:

* model vs. outcome — standard supervised counts (fp = model granted,
  outcome was bad);
* committee vs. model agreement — fp = committee granted but the model
  did not, fn = the model granted but the committee did not. Kappa is
  invariant under swapping the raters, so only the drill-down labels
  depend on the convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cost import money_str, round_money
from .data import CladRecord
from .errors import ConflictError, DegenerateAgreementError, ParseError, ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion(truth: Sequence[int], predicted: Sequence[int]) -> ConfusionMatrix:
    """Exact 2x2 counts of predictions against ground truth."""
    y = np.asarray(truth, dtype=np.int64)
    p = np.asarray(predicted, dtype=np.int64)
    if len(y) != len(p):
        raise ValidationError(f"length mismatch: truth={len(y)}, predicted={len(p)}")
    if len(y) == 0:
        raise ValidationError("empty vectors")
    return ConfusionMatrix(
        tp=int(np.sum((y == 1) & (p == 1))),
        fp=int(np.sum((y == 0) & (p == 1))),
        fn=int(np.sum((y == 1) & (p == 0))),
        tn=int(np.sum((y == 0) & (p == 0))),
    )


def agreement_matrix(committee: Sequence[int], model: Sequence[int]) -> ConfusionMatrix:
    """Committee-vs-model counts: fp = committee granted, model did not;
    fn = model granted, committee did not."""
    return confusion(truth=model, predicted=committee)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.n == 0:
        raise ValidationError("accuracy undefined for an empty matrix")
    return (cm.tp + cm.tn) / cm.n


# Interpretation bands, half-open [lower, upper); the top band is closed.
KAPPA_BANDS = (
    (-1.0, 0.0, "poor (worse than chance)"),
    (0.0, 0.2, "slight"),
    (0.2, 0.4, "fair"),
    (0.4, 0.6, "moderate"),
    (0.6, 0.8, "substantial"),
    (0.8, 1.0 + 1e-12, "almost perfect"),
)


def interpret_kappa(kappa: float) -> str:
    for lo, hi, label in KAPPA_BANDS:
        if lo <= kappa < hi:
            return label
    raise ValidationError(f"kappa out of range [-1, 1]: {kappa}")


@dataclass(frozen=True)
class AgreementReport:
    matrix: ConfusionMatrix
    p0: float
    p1: float
    p2: float
    pe: float
    kappa: float
    band: str

    def as_dict(self) -> dict:
        return {
            "matrix": self.matrix.as_dict(),
            "p0": self.p0,
            "p1": self.p1,
            "p2": self.p2,
            "pe": self.pe,
            "kappa": self.kappa,
            "band": self.band,
        }

    def lines(self) -> list[str]:
        m = self.matrix
        return [
            f"n                {m.n}",
            f"tp/fp/fn/tn      {m.tp}/{m.fp}/{m.fn}/{m.tn}",
            f"observed (P0)    {self.p0:.4f}",
            f"chance (Pe)      {self.pe:.4f}  (P1={self.p1:.4f}, P2={self.p2:.4f})",
            f"kappa            {self.kappa:.2f}  ({self.band})",
        ]


def cohen_kappa(cm: ConfusionMatrix) -> AgreementReport:
    """Chance-corrected two-rater agreement.

    P0 = (tp+tn)/N, P1 = (tp+fn)(tp+fp)/N^2, P2 = (tn+fn)(tn+fp)/N^2,
    Pe = P1+P2, kappa = (P0-Pe)/(1-Pe). Degenerate marginals (Pe = 1)
    leave kappa undefined and raise.
    """
    n = cm.n
    if n == 0:
        raise ValidationError("kappa undefined for an empty matrix")
    p0 = (cm.tp + cm.tn) / n
    p1 = (cm.tp + cm.fn) * (cm.tp + cm.fp) / (n * n)
    p2 = (cm.tn + cm.fn) * (cm.tn + cm.fp) / (n * n)
    pe = p1 + p2
    if pe >= 1.0:
        raise DegenerateAgreementError(
            "both raters are constant (chance agreement is 1); kappa is undefined"
        )
    kappa = (p0 - pe) / (1.0 - pe)
    return AgreementReport(matrix=cm, p0=p0, p1=p1, p2=p2, pe=pe, kappa=kappa, band=interpret_kappa(kappa))


def parse_matrix(text: str) -> ConfusionMatrix:
    """Parse the 4-field ``tp,fp,fn,tn`` record used for standalone runs."""
    parts = [p.strip() for p in text.strip().split(",")]
    if len(parts) != 4:
        raise ParseError(f"expected 4 comma-separated counts tp,fp,fn,tn, got {text!r}")
    try:
        tp, fp, fn, tn = (int(p) for p in parts)
    except ValueError:
        raise ParseError(f"non-integer count in {text!r}") from None
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class ReviewedCase:
    """One case carrying both verdicts, for disagreement drill-down."""

    record: CladRecord
    model_probability: float
    threshold: float
    model_decision: int
    committee_decision: int

    @property
    def margin(self) -> float:
        return abs(self.model_probability - self.threshold)


@dataclass(frozen=True)
class DisagreementReport:
    """Itemized committee/model disagreements, nearest-to-threshold first.

    false_positives: committee granted, model did not.
    false_negatives: model granted, committee did not.
    """

    false_positives: tuple[ReviewedCase, ...]
    false_negatives: tuple[ReviewedCase, ...]

    def lines(self) -> list[str]:
        out = [f"disagreements    {len(self.false_positives)} FP, {len(self.false_negatives)} FN"]
        for tag, cases in (("FP", self.false_positives), ("FN", self.false_negatives)):
            for c in cases:
                r = c.record
                out.append(
                    f"  {tag} {r.record_id}: p={c.model_probability:.4f} t={c.threshold:.4f} "
                    f"rating={r.rating} limit={money_str(r.limit_before)}"
                )
        return out


def disagreement_report(cases: Sequence[ReviewedCase]) -> DisagreementReport:
    fps = sorted(
        (c for c in cases if c.committee_decision == 1 and c.model_decision == 0),
        key=lambda c: (c.margin, c.record.record_id),
    )
    fns = sorted(
        (c for c in cases if c.committee_decision == 0 and c.model_decision == 1),
        key=lambda c: (c.margin, c.record.record_id),
    )
    return DisagreementReport(false_positives=tuple(fps), false_negatives=tuple(fns))


@dataclass(frozen=True)
class EvalReport:
    """Scored-dataset evaluation: counts, accuracy, and total cost."""

    label: str
    dataset_fingerprint: str
    matrix: ConfusionMatrix
    accuracy: float
    total_cost: float

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "dataset_fingerprint": self.dataset_fingerprint,
            "matrix": self.matrix.as_dict(),
            "accuracy": self.accuracy,
            "total_cost": money_str(self.total_cost),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            label=d["label"],
            dataset_fingerprint=d["dataset_fingerprint"],
            matrix=ConfusionMatrix(**d["matrix"]),
            accuracy=float(d["accuracy"]),
            total_cost=float(d["total_cost"]),
        )


@dataclass(frozen=True)
class ComparisonSummary:
    """Deltas of report A relative to report B (positive = A larger)."""

    label_a: str
    label_b: str
    accuracy_delta: float
    cost_delta: float
    fp_delta: int
    winner_by_cost: str
    winner_by_accuracy: str

    def lines(self) -> list[str]:
        return [
            f"accuracy         {self.label_a} - {self.label_b} = {self.accuracy_delta:+.4f}",
            f"total cost       {self.label_a} - {self.label_b} = {money_str(self.cost_delta)} BS",
            f"false positives  {self.label_a} - {self.label_b} = {self.fp_delta:+d}",
            f"winner by cost      {self.winner_by_cost}",
            f"winner by accuracy  {self.winner_by_accuracy}",
        ]


def compare_models(report_a: EvalReport, report_b: EvalReport) -> ComparisonSummary:
    """Exact metric deltas between two reports over the same dataset.

    The cheaper and the more accurate model may differ; both winners are
    reported.
    """
    if report_a.dataset_fingerprint != report_b.dataset_fingerprint:
        raise ConflictError(
            "reports were computed over different datasets "
            f"({report_a.dataset_fingerprint} vs {report_b.dataset_fingerprint})"
        )
    cost_delta = round_money(report_a.total_cost - report_b.total_cost)
    if report_a.total_cost == report_b.total_cost:
        by_cost = "tie"
    else:
        by_cost = report_a.label if report_a.total_cost < report_b.total_cost else report_b.label
    if report_a.accuracy == report_b.accuracy:
        by_acc = "tie"
    else:
        by_acc = report_a.label if report_a.accuracy > report_b.accuracy else report_b.label
    return ComparisonSummary(
        label_a=report_a.label,
        label_b=report_b.label,
        accuracy_delta=report_a.accuracy - report_b.accuracy,
        cost_delta=cost_delta,
        fp_delta=report_a.matrix.fp - report_b.matrix.fp,
        winner_by_cost=by_cost,
        winner_by_accuracy=by_acc,
    )
