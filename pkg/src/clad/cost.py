"""Adjustment arithmetic, instance-dependent misclassification costs, and
the cost-minimizing decision rule.

Cost semantics
--------------
Granting an adjustment to a client who then defaults costs the bank the
adjusted limit (``full_limit`` variant) or the adjusted limit net of the
balance already drawn (``incremental_exposure`` variant). Denying a good
client forfeits the first-month minimum payment on the increment plus a
fixed administrative cost. Correct decisions cost nothing.

Money is rounded half-up to cents at output boundaries only; sums and
intermediate quantities keep full float precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DegenerateCostError, ValidationError

if TYPE_CHECKING:
    from .data import CladRecord, Dataset

_CENT = Decimal("0.01")


def round_money(x: float) -> float:
    """Round to 2 decimals, half-up (0.005 -> 0.01), via decimal text."""
    return float(Decimal(str(x)).quantize(_CENT, rounding=ROUND_HALF_UP))


def money_str(x: float) -> str:
    """Render money as a 2-decimal string after half-up rounding."""
    return f"{round_money(x):.2f}"


class FpVariant(str, Enum):
    """How much exposure a false positive writes off."""

    FULL_LIMIT = "full_limit"
    INCREMENTAL_EXPOSURE = "incremental_exposure"


@dataclass(frozen=True)
class CostParams:
    """Session-level cost knobs: adjustment rate, minimum-payment rate,
    administrative cost, and the false-positive exposure variant."""

    alpha: float
    mr: float
    admin_cost: float
    fp_variant: FpVariant = FpVariant.FULL_LIMIT

    def __post_init__(self) -> None:
        if not (self.alpha >= 0):
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if not (0 < self.mr < 1):
            raise ValidationError(f"mr must be in (0, 1), got {self.mr}")
        if not (self.admin_cost >= 0):
            raise ValidationError(f"admin_cost must be >= 0, got {self.admin_cost}")
        if not isinstance(self.fp_variant, FpVariant):
            object.__setattr__(self, "fp_variant", FpVariant(self.fp_variant))


@dataclass(frozen=True)
class InstanceCosts:
    """Realized per-case misclassification costs, in BS.

    ``fp_clamped`` flags the defensive clamp of a negative incremental
    exposure to zero (unreachable for valid records and alpha >= 0).
    """

    c_fp: float
    c_fn: float
    fp_clamped: bool = False

    def __post_init__(self) -> None:
        if self.c_fp < 0 or self.c_fn < 0:
            raise ValidationError(f"costs must be >= 0, got c_fp={self.c_fp}, c_fn={self.c_fn}")


def adjusted_limit(limit_before: float, alpha: float) -> float:
    """The post-adjustment credit limit: ``limit * (1 + alpha)``, in cents."""
    if not (limit_before > 0):
        raise ValidationError(f"limit_before must be > 0, got {limit_before}")
    if not (alpha >= 0):
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    exact = Decimal(str(limit_before)) * (Decimal(1) + Decimal(str(alpha)))
    return float(exact.quantize(_CENT, rounding=ROUND_HALF_UP))


def instance_costs(rec: "CladRecord", params: CostParams) -> InstanceCosts:
    """Realize both misclassification costs for one case under ``params``."""
    cla = adjusted_limit(rec.limit_before, params.alpha)
    if params.fp_variant is FpVariant.FULL_LIMIT:
        c_fp = cla
        clamped = False
    else:
        c_fp = round_money(cla - rec.outstanding_balance)
        clamped = c_fp < 0
        if clamped:
            c_fp = 0.0
    c_fn = round_money(params.mr * (cla - rec.limit_before) + params.admin_cost)
    return InstanceCosts(c_fp=c_fp, c_fn=c_fn, fp_clamped=clamped)


def dataset_costs(ds: "Dataset", params: CostParams) -> list[InstanceCosts]:
    return [instance_costs(rec, params) for rec in ds.records]


def total_cost(
    labels: Sequence[int] | np.ndarray,
    decisions: Sequence[int] | np.ndarray,
    costs: Sequence[InstanceCosts],
) -> float:
    """Total misclassification cost: false negatives pay ``c_fn``, false
    positives pay ``c_fp``, correct decisions pay nothing."""
    y = np.asarray(labels, dtype=np.int64)
    c = np.asarray(decisions, dtype=np.int64)
    if not (len(y) == len(c) == len(costs)):
        raise ValidationError(
            f"length mismatch: labels={len(y)}, decisions={len(c)}, costs={len(costs)}"
        )
    c_fn = np.array([ic.c_fn for ic in costs])
    c_fp = np.array([ic.c_fp for ic in costs])
    return float(np.sum(y * (1 - c) * c_fn + c * (1 - y) * c_fp))


def bayes_threshold(costs: InstanceCosts) -> float:
    """The probability cutoff above which granting beats denying in
    expected cost: ``c_fp / (c_fp + c_fn)``."""
    denom = costs.c_fp + costs.c_fn
    if denom <= 0:
        raise DegenerateCostError("both misclassification costs are zero; threshold undefined")
    return costs.c_fp / denom


def decide(probability: float, threshold: float) -> int:
    """Grant iff the predicted probability strictly exceeds the threshold.

    Ties deny: holding the adjustment back from a good client is the more
    tolerable error.
    """
    return int(probability > threshold)


def weight_vector(labels: np.ndarray, c_fp: np.ndarray, c_fn: np.ndarray) -> np.ndarray:
    """Training weights for cost-sensitive learning, from raw cost arrays.

    Positives weigh their false-negative cost, negatives their
    false-positive cost, normalized to mean 1 (so uniformly scaled costs
    train identical models). Zero costs are floored to keep weights
    strictly positive.
    """
    y = np.asarray(labels, dtype=np.int64)
    w = np.where(y == 1, np.asarray(c_fn, dtype=float), np.asarray(c_fp, dtype=float))
    if len(w) != len(y):
        raise ValidationError("length mismatch between labels and costs")
    w = np.maximum(w, 1e-9)
    return w / w.mean()


def cost_weights(labels: np.ndarray, costs: Sequence[InstanceCosts]) -> np.ndarray:
    """``weight_vector`` over a list of realized InstanceCosts."""
    y = np.asarray(labels, dtype=np.int64)
    if len(y) != len(costs):
        raise ValidationError(f"length mismatch: labels={len(y)}, costs={len(costs)}")
    return weight_vector(y, np.array([ic.c_fp for ic in costs]), np.array([ic.c_fn for ic in costs]))
