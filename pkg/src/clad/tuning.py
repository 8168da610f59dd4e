"""Exhaustive grid search with k-fold cross-validation, ranked by mean
total misclassification cost.

Folds are stratified by default (the portfolio runs ~3:1 positive) and
partition the dataset exactly: disjoint, exhaustive, sizes within one of
each other, per-class counts within one of each other. Every
hyperparameter combination is evaluated on every fold; a combination
whose training fails is kept in the ranking with infinite cost so the
sweep stays exhaustive.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import gbdt, mlp
from .cost import CostParams, dataset_costs, weight_vector
from .data import Dataset
from .errors import CladError, TrainingError, ValidationError

MODEL_FAMILIES = ("gbdt", "mlp")


@dataclass(frozen=True)
class FoldPlan:
    """A record_id -> fold assignment partitioning one dataset."""

    k: int
    assignments: dict[str, int]
    stratified: bool
    seed: int

    def fold_indices(self, ds: Dataset) -> list[np.ndarray]:
        """Row indices of each fold, in dataset order."""
        ids = ds.ids()
        if set(ids) != set(self.assignments):
            raise ValidationError("fold plan does not cover exactly this dataset's record ids")
        folds: list[list[int]] = [[] for _ in range(self.k)]
        for row, rid in enumerate(ids):
            folds[self.assignments[rid]].append(row)
        return [np.array(f, dtype=np.int64) for f in folds]


def make_folds(ds: Dataset, k: int, seed: int = 0, stratified: bool = True) -> FoldPlan:
    """Assign records to k folds, deterministically for a fixed seed."""
    n = len(ds)
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValidationError(f"k={k} exceeds dataset size {n}")
    rng = np.random.default_rng(seed)
    ids = ds.ids()
    assignments: dict[str, int] = {}
    if stratified:
        if not ds.has_labels:
            raise ValidationError("stratified folds require a labeled dataset")
        y = ds.labels()
        fold_sizes = np.zeros(k, dtype=np.int64)
        for cls in (1, 0):
            idx = np.flatnonzero(y == cls)
            rng.shuffle(idx)
            q, r = divmod(len(idx), k)
            counts = np.full(k, q, dtype=np.int64)
            # deal the remainder to the currently least-loaded folds
            counts[np.argsort(fold_sizes, kind="stable")[:r]] += 1
            pos = 0
            for f in range(k):
                for i in idx[pos : pos + counts[f]]:
                    assignments[ids[i]] = f
                pos += counts[f]
            fold_sizes += counts
    else:
        order = rng.permutation(n)
        q, r = divmod(n, k)
        pos = 0
        for f in range(k):
            size = q + (1 if f < r else 0)
            for i in order[pos : pos + size]:
                assignments[ids[i]] = f
            pos += size
    return FoldPlan(k=k, assignments=assignments, stratified=stratified, seed=seed)


@dataclass(frozen=True)
class SearchSpace:
    """Per-hyperparameter candidate lists for one model family."""

    model_family: str
    grid: dict[str, tuple]

    def __post_init__(self) -> None:
        if self.model_family not in MODEL_FAMILIES:
            raise ValidationError(f"model_family must be one of {MODEL_FAMILIES}, got {self.model_family!r}")
        if not self.grid:
            raise ValidationError("search space has no hyperparameters")
        normalized = {}
        for name, candidates in self.grid.items():
            values = tuple(tuple(v) if isinstance(v, list) else v for v in candidates)
            if not values:
                raise ValidationError(f"empty candidate list for {name!r}")
            normalized[name] = values
        object.__setattr__(self, "grid", normalized)

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.grid.values())

    def combinations(self) -> Iterator[dict]:
        """Cartesian product in deterministic (sorted-key) order."""
        names = sorted(self.grid)
        for values in itertools.product(*(self.grid[n] for n in names)):
            yield dict(zip(names, values))


@dataclass(frozen=True)
class TrialResult:
    params: dict
    fold_costs: tuple[float, ...] = ()
    fold_accuracies: tuple[float, ...] = ()
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def mean_cost(self) -> float:
        if self.failed or not self.fold_costs:
            return math.inf
        return sum(self.fold_costs) / len(self.fold_costs)

    @property
    def mean_accuracy(self) -> float:
        if self.failed or not self.fold_accuracies:
            return 0.0
        return sum(self.fold_accuracies) / len(self.fold_accuracies)

    @property
    def params_key(self) -> str:
        return json.dumps(self.params, sort_keys=True, default=str)

    def as_dict(self) -> dict:
        return {
            "params": self.params,
            "fold_costs": list(self.fold_costs),
            "fold_accuracies": list(self.fold_accuracies),
            "mean_cost": self.mean_cost,
            "mean_accuracy": self.mean_accuracy,
            "error": self.error,
        }


@dataclass(frozen=True)
class _TrialTask:
    family: str
    combo: dict
    trial_seed: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    c_fp: np.ndarray = field(repr=False)
    c_fn: np.ndarray = field(repr=False)
    folds: tuple = field(repr=False)
    schema: tuple[str, ...]


def _bayes_decisions(p: np.ndarray, c_fp: np.ndarray, c_fn: np.ndarray) -> np.ndarray:
    denom = c_fp + c_fn
    t = np.ones_like(p)
    np.divide(c_fp, denom, out=t, where=denom > 0)
    return (p > t).astype(np.int64)


def _train_one(task: _TrialTask, train_idx: np.ndarray, fold_no: int):
    w = weight_vector(task.y[train_idx], task.c_fp[train_idx], task.c_fn[train_idx])
    combo = dict(task.combo)
    combo.setdefault("seed", task.trial_seed)
    if task.family == "gbdt":
        params = gbdt.GbdtParams(**combo)
        valid = None
        fit_idx = train_idx
        if params.early_stop_rounds > 0 and len(train_idx) >= 20:
            # patience needs held-out rows; carve them from the training side
            # so the evaluated fold never leaks into training decisions
            rng = np.random.default_rng(task.trial_seed * 31 + fold_no)
            perm = rng.permutation(len(train_idx))
            n_es = max(1, len(train_idx) // 10)
            es_idx = train_idx[perm[:n_es]]
            fit_idx = train_idx[perm[n_es:]]
            w = weight_vector(task.y[fit_idx], task.c_fp[fit_idx], task.c_fn[fit_idx])
            valid = gbdt.ValidationData(
                x=task.x[es_idx], y=task.y[es_idx], c_fp=task.c_fp[es_idx], c_fn=task.c_fn[es_idx]
            )
        return gbdt.fit(task.x[fit_idx], task.y[fit_idx], w, params, task.schema, valid=valid)
    params = mlp.MlpParams(**combo)
    return mlp.fit(task.x[train_idx], task.y[train_idx], w, params, task.schema)


def _evaluate_trial(task: _TrialTask) -> TrialResult:
    fold_costs: list[float] = []
    fold_accs: list[float] = []
    n = len(task.y)
    try:
        for fold_no, test_idx in enumerate(task.folds):
            mask = np.ones(n, dtype=bool)
            mask[test_idx] = False
            train_idx = np.flatnonzero(mask)
            model = _train_one(task, train_idx, fold_no)
            p = model.predict_proba_matrix(task.x[test_idx])
            decisions = _bayes_decisions(p, task.c_fp[test_idx], task.c_fn[test_idx])
            y_test = task.y[test_idx]
            cost = float(
                np.sum(
                    y_test * (1 - decisions) * task.c_fn[test_idx]
                    + decisions * (1 - y_test) * task.c_fp[test_idx]
                )
            )
            fold_costs.append(cost)
            fold_accs.append(float(np.mean(decisions == y_test)))
    except (CladError, TypeError) as exc:
        return TrialResult(params=task.combo, error=f"{type(exc).__name__}: {exc}")
    return TrialResult(params=task.combo, fold_costs=tuple(fold_costs), fold_accuracies=tuple(fold_accs))


def rank_trials(trials: Sequence[TrialResult]) -> list[TrialResult]:
    """Ascending mean cost; ties break to higher accuracy, then params text."""
    return sorted(trials, key=lambda t: (t.mean_cost, -t.mean_accuracy, t.params_key))


def grid_search(
    ds: Dataset,
    space: SearchSpace,
    cost_params: CostParams,
    plan: FoldPlan,
    base_seed: int = 0,
    jobs: int = 1,
) -> list[TrialResult]:
    """Evaluate every combination on every fold; return the ranked trials.

    Per-trial seeds derive from the combination's position in the
    deterministic enumeration, so results do not depend on ``jobs``.
    """
    if not ds.has_labels:
        raise ValidationError("grid search requires a labeled dataset")
    x = ds.matrix()
    y = ds.labels()
    costs = dataset_costs(ds, cost_params)
    c_fp = np.array([ic.c_fp for ic in costs])
    c_fn = np.array([ic.c_fn for ic in costs])
    folds = tuple(plan.fold_indices(ds))
    tasks = [
        _TrialTask(
            family=space.model_family,
            combo=combo,
            trial_seed=base_seed + index,
            x=x,
            y=y,
            c_fp=c_fp,
            c_fn=c_fn,
            folds=folds,
            schema=tuple(ds.schema),
        )
        for index, combo in enumerate(space.combinations())
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_evaluate_trial, tasks))
    else:
        trials = [_evaluate_trial(t) for t in tasks]
    return rank_trials(trials)


def select_best(ranking: Sequence[TrialResult]) -> TrialResult:
    """Head of the ranking; refuses an empty or all-failed sweep."""
    if not ranking:
        raise ValidationError("empty ranking")
    best = ranking[0]
    if best.failed:
        raise TrainingError("every trial failed; no hyperparameters to select")
    return best


def ranking_lines(ranking: Sequence[TrialResult]) -> list[str]:
    out = [f"{'rank':>4}  {'mean_cost':>14}  {'mean_acc':>8}  params"]
    for i, t in enumerate(ranking, start=1):
        cost = "failed" if t.failed else f"{t.mean_cost:.2f}"
        out.append(f"{i:>4}  {cost:>14}  {t.mean_accuracy:>8.4f}  {t.params_key}")
    return out
