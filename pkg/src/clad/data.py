"""Case schema, synthetic data generation, and tabular ingestion.

A limit-adjustment case carries 13 performance-based features (no
demographic attributes, ever) plus an optional binary outcome label:
1 = adjustment given, 0 = denied. Files are UTF-8 CSV with an exact
header row; money columns carry two fractional digits.

The synthetic generator is calibrated so its defaults land on the
published portfolio statistics (mean limit, positive ratio, rating
median, account-age range). Labels come from a documented latent score
(see docs/schema.md for the coefficients) thresholded at a dataset
quantile, then flipped class-wise at the configured noise rate, so
learners can get close to, but never past, ``1 - label_noise`` accuracy.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ParseError, SchemaError, ValidationError


class CreditRating(IntEnum):
    """Agency rating grades on a strict ordinal scale, D=0 .. AAA=9."""

    D = 0
    C = 1
    CC = 2
    CCC = 3
    B = 4
    BB = 5
    BBB = 6
    A = 7
    AA = 8
    AAA = 9

    @classmethod
    def from_text(cls, text: str) -> "CreditRating":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown credit rating {text!r}") from None

    def __str__(self) -> str:  # round-trips with from_text
        return self.name


#: The nine schema-named performance features beyond the four headline ones.
#: All are unitless reals; see docs/schema.md for definitions and ranges.
EXTRA_FEATURES = (
    "payments_on_time_rate",
    "min_payment_coverage",
    "utilization_6m_avg",
    "utilization_peak_12m",
    "cash_advance_share",
    "merchant_diversity",
    "balance_volatility",
    "delinquency_free_share",
    "relationship_score",
)

FEATURE_NAMES: tuple[str, ...] = (
    "limit_before",
    "outstanding_balance",
    "rating",
    "account_age_years",
) + EXTRA_FEATURES

LABEL_COLUMN = "label"
ID_COLUMN = "record_id"

#: Column index of each feature inside ``CladRecord.features()`` vectors.
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

_MONEY_FIELDS = {"limit_before", "outstanding_balance"}


@dataclass(frozen=True)
class CladRecord:
    """One limit-adjustment case: 13 features plus an optional outcome."""

    record_id: str
    limit_before: float
    outstanding_balance: float
    rating: CreditRating
    account_age_years: float
    payments_on_time_rate: float
    min_payment_coverage: float
    utilization_6m_avg: float
    utilization_peak_12m: float
    cash_advance_share: float
    merchant_diversity: float
    balance_volatility: float
    delinquency_free_share: float
    relationship_score: float
    label: int | None = None

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValidationError("record_id must be non-empty")
        if not (self.limit_before > 0):
            raise ValidationError(f"limit_before must be > 0, got {self.limit_before}")
        if not (self.outstanding_balance >= 0):
            raise ValidationError(
                f"outstanding_balance must be >= 0, got {self.outstanding_balance}"
            )
        if self.outstanding_balance > self.limit_before:
            raise ValidationError(
                "outstanding_balance exceeds limit_before "
                f"({self.outstanding_balance} > {self.limit_before})"
            )
        if not isinstance(self.rating, CreditRating):
            raise ValidationError(f"rating must be a CreditRating, got {self.rating!r}")
        if not (0 <= self.account_age_years <= 100):
            raise ValidationError(
                f"account_age_years must be within [0, 100], got {self.account_age_years}"
            )
        for name in EXTRA_FEATURES:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"{name} must be a finite number, got {value!r}")
        if self.label is not None and self.label not in (0, 1):
            raise ValidationError(f"label must be 0, 1, or absent, got {self.label!r}")

    def features(self) -> np.ndarray:
        """The record's 13 feature values, rating encoded ordinally."""
        return np.array(
            [float(self.rating) if n == "rating" else float(getattr(self, n)) for n in FEATURE_NAMES]
        )

    def feature_map(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(FEATURE_NAMES, self.features())}


@dataclass(frozen=True)
class Provenance:
    kind: str  # "synthetic" | "ingested"
    detail: str


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of cases sharing one feature schema.

    Equality compares schema and records only; provenance is metadata.
    """

    schema: tuple[str, ...]
    records: tuple[CladRecord, ...]
    provenance: Provenance = field(compare=False, default=Provenance("ingested", "<memory>"))

    def __post_init__(self) -> None:
        if tuple(self.schema) != FEATURE_NAMES:
            raise SchemaError(f"dataset schema must be {FEATURE_NAMES}, got {self.schema}")
        seen: set[str] = set()
        for rec in self.records:
            if rec.record_id in seen:
                raise ValidationError(f"duplicate record_id {rec.record_id!r}")
            seen.add(rec.record_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CladRecord]:
        return iter(self.records)

    @property
    def has_labels(self) -> bool:
        return bool(self.records) and all(r.label is not None for r in self.records)

    def matrix(self) -> np.ndarray:
        """(n, 13) float matrix in schema order."""
        if not self.records:
            return np.empty((0, len(FEATURE_NAMES)))
        return np.stack([r.features() for r in self.records])

    def labels(self) -> np.ndarray:
        if not self.has_labels:
            raise ValidationError("dataset has unlabeled records")
        return np.array([r.label for r in self.records], dtype=np.int64)

    def ids(self) -> tuple[str, ...]:
        return tuple(r.record_id for r in self.records)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(self.schema, tuple(self.records[i] for i in indices), self.provenance)

    def fingerprint(self) -> str:
        """Stable content hash over ids, features and labels (12 hex chars)."""
        h = hashlib.sha256()
        for r in self.records:
            h.update(r.record_id.encode())
            h.update(r.features().tobytes())
            h.update(b"?" if r.label is None else str(r.label).encode())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator knobs; the defaults hit the published portfolio statistics."""

    n_records: int = 10_000
    positive_ratio: float = 0.7454
    mean_limit: float = 1463.72
    account_age_range: tuple[float, float] = (2.0, 22.0)
    median_rating: CreditRating = CreditRating.BB
    label_noise: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_records < 0:
            raise ValidationError(f"n_records must be >= 0, got {self.n_records}")
        if not (0 < self.positive_ratio < 1):
            raise ValidationError(f"positive_ratio must be in (0,1), got {self.positive_ratio}")
        if not (self.mean_limit > 0):
            raise ValidationError(f"mean_limit must be > 0, got {self.mean_limit}")
        lo, hi = self.account_age_range
        if not (0 <= lo <= hi <= 100):
            raise ValidationError(f"account_age_range must satisfy 0 <= lo <= hi <= 100, got {self.account_age_range}")
        if not (0 <= self.label_noise <= 0.5):
            raise ValidationError(f"label_noise must be in [0, 0.5], got {self.label_noise}")
        if not isinstance(self.median_rating, CreditRating):
            raise ValidationError(f"median_rating must be a CreditRating, got {self.median_rating!r}")


# Latent score coefficients, applied to the scaled feature values below.
# Published in docs/schema.md; monotone increasing in rating and account
# age, decreasing in utilization (the outstanding/limit ratio).
SCORE_COEFFICIENTS = {
    "rating": 5.4,             # rating ordinal / 9
    "account_age_years": 0.4,  # (age - 2) / 20
    "utilization": -0.4,       # outstanding_balance / limit_before
    "payments_on_time_rate": 1.6,
    "min_payment_coverage": 0.2,  # value / 2.5
    "utilization_6m_avg": -1.2,
    "utilization_peak_12m": -0.15,
    "cash_advance_share": -0.3,
    "merchant_diversity": 0.1,
    "balance_volatility": -0.2,
    "delinquency_free_share": 0.7,
    "relationship_score": 0.15,
}

# Rating draw probabilities for ordinals D..AAA; mass centered on BB so the
# sample median is BB with overwhelming margin at the default size.
_RATING_PMF = np.array([0.02, 0.04, 0.06, 0.12, 0.12, 0.24, 0.15, 0.12, 0.08, 0.05])


def latent_score(features: np.ndarray) -> np.ndarray:
    """Creditworthiness score of each row of a (n, 13) feature matrix.

    This is the generator's ground-truth scoring rule. It is linear in
    scaled features, so it is monotone in each input with the sign of its
    coefficient.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    col = lambda name: x[:, FEATURE_INDEX[name]]
    c = SCORE_COEFFICIENTS
    score = (
        c["rating"] * col("rating") / 9.0
        + c["account_age_years"] * (col("account_age_years") - 2.0) / 20.0
        + c["utilization"] * col("outstanding_balance") / col("limit_before")
        + c["payments_on_time_rate"] * col("payments_on_time_rate")
        + c["min_payment_coverage"] * col("min_payment_coverage") / 2.5
        + c["utilization_6m_avg"] * col("utilization_6m_avg")
        + c["utilization_peak_12m"] * col("utilization_peak_12m")
        + c["cash_advance_share"] * col("cash_advance_share")
        + c["merchant_diversity"] * col("merchant_diversity")
        + c["balance_volatility"] * col("balance_volatility")
        + c["delinquency_free_share"] * col("delinquency_free_share")
        + c["relationship_score"] * col("relationship_score")
    )
    return score if features.ndim > 1 else score[0]


def _round_cents(x: np.ndarray) -> np.ndarray:
    # Half-up at the half-cent; inputs here are generator draws, not sums,
    # so float noise at the boundary is immaterial.
    return np.floor(x * 100.0 + 0.5) / 100.0


def generate_synthetic(config: SyntheticConfig) -> Dataset:
    """Draw a calibrated synthetic dataset; deterministic for a fixed seed.

    The clean positive ratio is inflated to ``(p - eps) / (1 - 2 eps)`` so
    that after flipping ``round(eps * n_class)`` labels in each class the
    observed ratio lands on ``positive_ratio`` (within +-1/n), every seed.
    """
    n = config.n_records
    prov = Provenance("synthetic", f"seed={config.seed}")
    if n == 0:
        return Dataset(FEATURE_NAMES, (), prov)

    rng = np.random.default_rng(config.seed)

    sigma = 0.8
    mu = math.log(config.mean_limit) - sigma * sigma / 2.0
    limits = _round_cents(np.maximum(rng.lognormal(mu, sigma, size=n), 0.01))

    utilization = rng.beta(1.6, 3.2, size=n)
    balances = _round_cents(utilization * limits)

    ratings = rng.choice(10, size=n, p=_RATING_PMF)
    lo, hi = config.account_age_range
    ages = rng.uniform(lo, hi, size=n)

    util_6m = np.clip(utilization + rng.normal(0.0, 0.04, size=n), 0.0, 1.0)
    extras = np.column_stack(
        [
            rng.beta(8.0, 2.0, size=n),                         # payments_on_time_rate
            0.2 + 2.3 * rng.beta(2.0, 2.0, size=n),             # min_payment_coverage
            util_6m,                                            # utilization_6m_avg
            util_6m + (1.0 - util_6m) * rng.beta(2.0, 5.0, size=n),  # utilization_peak_12m
            rng.beta(1.2, 6.0, size=n),                         # cash_advance_share
            rng.beta(3.0, 3.0, size=n),                         # merchant_diversity
            np.clip(np.abs(rng.normal(0.35, 0.2, size=n)), 0.0, 2.0),  # balance_volatility
            rng.beta(6.0, 1.5, size=n),                         # delinquency_free_share
            rng.beta(2.5, 2.5, size=n),                         # relationship_score
        ]
    )

    x = np.column_stack([limits, balances, ratings.astype(float), ages, extras])
    scores = latent_score(x)

    eps = config.label_noise
    clean_ratio = (config.positive_ratio - eps) / (1.0 - 2.0 * eps) if eps < 0.5 else 0.5
    clean_ratio = min(max(clean_ratio, 0.0), 1.0)
    n_pos = int(round(n * clean_ratio))

    labels = np.zeros(n, dtype=np.int64)
    order = np.argsort(-scores, kind="stable")
    labels[order[:n_pos]] = 1

    flips_pos = int(round(n_pos * eps))
    flips_neg = int(round((n - n_pos) * eps))
    pos_idx = order[:n_pos]
    neg_idx = order[n_pos:]
    if flips_pos:
        labels[rng.choice(pos_idx, size=flips_pos, replace=False)] = 0
    if flips_neg:
        labels[rng.choice(neg_idx, size=flips_neg, replace=False)] = 1

    width = max(6, len(str(n)))
    records = tuple(
        CladRecord(
            record_id=f"SYN-{i + 1:0{width}d}",
            limit_before=float(x[i, 0]),
            outstanding_balance=float(x[i, 1]),
            rating=CreditRating(int(ratings[i])),
            account_age_years=float(ages[i]),
            label=int(labels[i]),
            **{name: float(extras[i, j]) for j, name in enumerate(EXTRA_FEATURES)},
        )
        for i in range(n)
    )
    return Dataset(FEATURE_NAMES, records, prov)


def _expected_header(has_labels: bool) -> list[str]:
    header = [ID_COLUMN, *FEATURE_NAMES]
    if has_labels:
        header.append(LABEL_COLUMN)
    return header


def ingest(path: str | Path, has_labels: bool = True) -> Dataset:
    """Load a CSV case file, rejecting malformed rows with their row number."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        expected = _expected_header(has_labels)
        if header != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise SchemaError(
                f"{path}: header mismatch (missing columns: {missing or 'none'}, "
                f"unexpected: {extra or 'none'})"
            )
        records = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise ParseError(f"{path}: row {row_no} has {len(row)} cells, expected {len(expected)}", row=row_no)
            cells = dict(zip(expected, row))
            try:
                rating = CreditRating.from_text(cells["rating"])
            except ValidationError as exc:
                raise ParseError(f"{path}: row {row_no}: {exc}", row=row_no, column="rating") from None
            numeric: dict[str, float] = {}
            for name in FEATURE_NAMES:
                if name == "rating":
                    continue
                try:
                    numeric[name] = float(cells[name])
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_no}, column {name!r}: not a number: {cells[name]!r}",
                        row=row_no,
                        column=name,
                    ) from None
            label: int | None = None
            if has_labels:
                if cells[LABEL_COLUMN] not in ("0", "1"):
                    raise ParseError(
                        f"{path}: row {row_no}, column 'label': must be 0 or 1, got {cells[LABEL_COLUMN]!r}",
                        row=row_no,
                        column=LABEL_COLUMN,
                    )
                label = int(cells[LABEL_COLUMN])
            try:
                records.append(CladRecord(record_id=cells[ID_COLUMN], rating=rating, label=label, **numeric))
            except ValidationError as exc:
                raise ValidationError(f"{path}: row {row_no}: {exc}") from None
    return Dataset(FEATURE_NAMES, tuple(records), Provenance("ingested", str(path)))


def serialize(ds: Dataset, path: str | Path, include_labels: bool | None = None) -> Path:
    """Write a dataset back to CSV; ``ingest(serialize(ds)) == ds``."""
    path = Path(path)
    if include_labels is None:
        include_labels = ds.has_labels
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(include_labels))
        for rec in ds.records:
            row: list[str] = [rec.record_id]
            for name in FEATURE_NAMES:
                if name == "rating":
                    row.append(str(rec.rating))
                elif name in _MONEY_FIELDS:
                    row.append(f"{getattr(rec, name):.2f}")
                else:
                    row.append(repr(float(getattr(rec, name))))
            if include_labels:
                row.append(str(rec.label))
            writer.writerow(row)
    return path


@dataclass(frozen=True)
class DatasetSummary:
    count: int
    positive_ratio: float
    mean_limit: float
    median_rating: CreditRating
    min_account_age: float
    max_account_age: float

    def lines(self) -> list[str]:
        return [
            f"records          {self.count}",
            f"positive ratio   {self.positive_ratio:.4f}",
            f"mean limit       {self.mean_limit:.2f} BS",
            f"median rating    {self.median_rating}",
            f"account age      [{self.min_account_age:.2f}, {self.max_account_age:.2f}] years",
        ]


def summarize(ds: Dataset) -> DatasetSummary:
    """Exact summary statistics; median rating uses the lower middle for even n."""
    if not ds.records:
        raise ValidationError("cannot summarize an empty dataset")
    if not ds.has_labels:
        raise ValidationError("cannot summarize an unlabeled dataset")
    n = len(ds)
    ratings = sorted(int(r.rating) for r in ds.records)
    ages = [r.account_age_years for r in ds.records]
    return DatasetSummary(
        count=n,
        positive_ratio=sum(r.label for r in ds.records) / n,
        mean_limit=sum(r.limit_before for r in ds.records) / n,
        median_rating=CreditRating(ratings[(n - 1) // 2]),
        min_account_age=min(ages),
        max_account_age=max(ages),
    )
