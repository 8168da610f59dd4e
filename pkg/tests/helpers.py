"""Shared builders for the test suite."""

from clad.data import EXTRA_FEATURES, FEATURE_NAMES, CladRecord, CreditRating, Dataset, Provenance

_EXTRA_DEFAULTS = {name: 0.5 for name in EXTRA_FEATURES}


def make_record(
    record_id: str = "R-1",
    limit: float = 1000.0,
    balance: float = 250.0,
    rating: CreditRating = CreditRating.BB,
    age: float = 5.0,
    label: int | None = None,
    **extras,
) -> CladRecord:
    values = dict(_EXTRA_DEFAULTS)
    values.update(extras)
    return CladRecord(
        record_id=record_id,
        limit_before=limit,
        outstanding_balance=balance,
        rating=rating,
        account_age_years=age,
        label=label,
        **values,
    )


def make_dataset(records) -> Dataset:
    return Dataset(FEATURE_NAMES, tuple(records), Provenance("ingested", "<test>"))
