"""Cost-sensitive gradient-boosted trees via second-order (Newton)
boosting on a weighted logistic loss.

Each round fits one regression tree to the per-instance gradients
``g_i = w_i (p_i - y_i)`` and hessians ``h_i = w_i p_i (1 - p_i)``.
Splits are found by exact greedy enumeration over every threshold lying
between consecutive sorted feature values, maximizing

    gain = 1/2 [ G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam) ]

subject to both children holding at least ``min_child_weight`` hessian
mass; a split is kept only when its gain strictly exceeds ``gamma``.
Leaf values are the Newton step ``-G/(H+lam)``, optionally clipped to
``+-max_delta_step``. L2 regularization ``lam`` is fixed at 1.0.

Ties in gain resolve to the lowest feature index, then the lowest
threshold, so training is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import ModelFormatError, TrainingError, ValidationError
from .model_io import decode_model, encode_model

REG_LAMBDA = 1.0

_P_EPS = 1e-15
_PREVALENCE_CLIP = 1e-6


def _sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def weighted_logloss(y: np.ndarray, p: np.ndarray, w: np.ndarray) -> float:
    p = np.clip(p, _P_EPS, 1.0 - _P_EPS)
    return float(np.sum(w * -(y * np.log(p) + (1 - y) * np.log(1 - p))))


@dataclass(frozen=True)
class GbdtParams:
    max_depth: int = 6
    min_child_weight: float = 1.0
    n_rounds: int = 60
    learning_rate: float = 0.1
    gamma: float = 0.0
    subsample: float = 1.0
    colsample: float = 1.0
    max_delta_step: float = 0.0
    early_stop_rounds: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValidationError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.n_rounds < 1:
            raise ValidationError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if not (self.learning_rate > 0):
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 < self.subsample <= 1):
            raise ValidationError(f"subsample must be in (0, 1], got {self.subsample}")
        if not (0 < self.colsample <= 1):
            raise ValidationError(f"colsample must be in (0, 1], got {self.colsample}")
        if self.min_child_weight < 0:
            raise ValidationError(f"min_child_weight must be >= 0, got {self.min_child_weight}")
        if self.gamma < 0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        if self.max_delta_step < 0:
            raise ValidationError(f"max_delta_step must be >= 0, got {self.max_delta_step}")
        if self.early_stop_rounds < 0:
            raise ValidationError(f"early_stop_rounds must be >= 0, got {self.early_stop_rounds}")

    def as_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_child_weight": self.min_child_weight,
            "n_rounds": self.n_rounds,
            "learning_rate": self.learning_rate,
            "gamma": self.gamma,
            "subsample": self.subsample,
            "colsample": self.colsample,
            "max_delta_step": self.max_delta_step,
            "early_stop_rounds": self.early_stop_rounds,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


def find_best_split(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    *,
    min_child_weight: float = 0.0,
    gamma: float = 0.0,
    reg_lambda: float = REG_LAMBDA,
    columns: Sequence[int] | None = None,
) -> Split | None:
    """Exact greedy best split of one node, or None when nothing beats gamma.

    Candidate thresholds are the midpoints between consecutive distinct
    sorted values of each feature.
    """
    n, n_features = x.shape
    if n < 2:
        return None
    g_total = float(np.sum(g))
    h_total = float(np.sum(h))
    parent_term = g_total * g_total / (h_total + reg_lambda)
    best: Split | None = None
    for j in columns if columns is not None else range(n_features):
        order = np.argsort(x[:, j], kind="stable")
        xo = x[order, j]
        gl = np.cumsum(g[order])[:-1]
        hl = np.cumsum(h[order])[:-1]
        gr = g_total - gl
        hr = h_total - hl
        valid = (xo[1:] > xo[:-1]) & (hl >= min_child_weight) & (hr >= min_child_weight)
        if not valid.any():
            continue
        gains = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent_term)
        gains[~valid] = -np.inf
        i = int(np.argmax(gains))
        gain = float(gains[i])
        if gain > gamma and (best is None or gain > best.gain):
            best = Split(feature=int(j), threshold=float((xo[i] + xo[i + 1]) / 2.0), gain=gain)
    return best


class Tree:
    """Flat binary tree: node 0 is the root, ``feature == -1`` marks leaves."""

    __slots__ = ("feature", "threshold", "left", "right", "weight", "gain")

    def __init__(self, feature, threshold, left, right, weight, gain):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.weight = np.asarray(weight, dtype=float)
        self.gain = np.asarray(gain, dtype=float)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, name), getattr(other, name)) for name in self.__slots__
        )

    def __hash__(self):
        return hash(tuple(self.feature.tolist()))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Leaf weight reached by each row of ``x``."""
        out = np.empty(len(x))
        stack: list[tuple[int, np.ndarray]] = [(0, np.arange(len(x)))]
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            f = self.feature[node]
            if f < 0:
                out[idx] = self.weight[node]
            else:
                go_left = x[idx, f] <= self.threshold[node]
                stack.append((int(self.left[node]), idx[go_left]))
                stack.append((int(self.right[node]), idx[~go_left]))
        return out

    def split_gains(self) -> list[tuple[int, float]]:
        """(feature, gain) of every internal node."""
        internal = self.feature >= 0
        return list(zip(self.feature[internal].tolist(), self.gain[internal].tolist()))

    def to_payload(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "weight": self.weight.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_payload(cls, d: dict) -> "Tree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["weight"], d["gain"])


class _TreeBuilder:
    def __init__(self, x, g, h, params: GbdtParams, columns):
        self.x = x
        self.g = g
        self.h = h
        self.params = params
        self.columns = columns
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.weight: list[float] = []
        self.gain: list[float] = []

    def _new_node(self) -> int:
        for arr, fill in (
            (self.feature, -1),
            (self.threshold, 0.0),
            (self.left, -1),
            (self.right, -1),
            (self.weight, 0.0),
            (self.gain, 0.0),
        ):
            arr.append(fill)
        return len(self.feature) - 1

    def grow(self, rows: np.ndarray, depth: int) -> int:
        node = self._new_node()
        p = self.params
        split = None
        if depth < p.max_depth and len(rows) >= 2:
            split = find_best_split(
                self.x[rows],
                self.g[rows],
                self.h[rows],
                min_child_weight=p.min_child_weight,
                gamma=p.gamma,
                columns=self.columns,
            )
        if split is None:
            value = -float(np.sum(self.g[rows])) / (float(np.sum(self.h[rows])) + REG_LAMBDA)
            if p.max_delta_step > 0:
                value = float(np.clip(value, -p.max_delta_step, p.max_delta_step))
            self.weight[node] = value
            return node
        go_left = self.x[rows, split.feature] <= split.threshold
        self.feature[node] = split.feature
        self.threshold[node] = split.threshold
        self.gain[node] = split.gain
        self.left[node] = self.grow(rows[go_left], depth + 1)
        self.right[node] = self.grow(rows[~go_left], depth + 1)
        return node

    def build(self, rows: np.ndarray) -> Tree:
        self.grow(rows, 0)
        return Tree(self.feature, self.threshold, self.left, self.right, self.weight, self.gain)


@dataclass(frozen=True)
class ValidationData:
    """Held-out rows used for early stopping on total misclassification cost."""

    x: np.ndarray
    y: np.ndarray
    c_fp: np.ndarray
    c_fn: np.ndarray

    def cost_of(self, p: np.ndarray) -> float:
        t = self.c_fp / (self.c_fp + self.c_fn)
        decisions = (p > t).astype(np.int64)
        return float(
            np.sum(self.y * (1 - decisions) * self.c_fn + decisions * (1 - self.y) * self.c_fp)
        )


@dataclass(frozen=True)
class GbdtModel:
    trees: tuple[Tree, ...]
    base_score: float
    schema: tuple[str, ...]
    params: GbdtParams
    history: tuple[dict, ...] = field(compare=False, default=())

    def predict_margin(self, x: np.ndarray) -> np.ndarray:
        margin = np.full(len(x), self.base_score)
        for tree in self.trees:
            margin += self.params.learning_rate * tree.predict(x)
        return margin

    def predict_proba_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != len(self.schema):
            raise ValidationError(
                f"feature matrix has {x.shape[1] if x.ndim == 2 else '?'} columns, "
                f"model expects {len(self.schema)}"
            )
        return np.clip(_sigmoid(self.predict_margin(x)), _P_EPS, 1.0 - _P_EPS)

    def predict_proba(self, rec) -> float:
        return float(self.predict_proba_matrix(rec.features()[None, :])[0])

    def feature_importance(self) -> np.ndarray:
        """Per-feature share of total split gain; zeros if nothing split."""
        totals = np.zeros(len(self.schema))
        for tree in self.trees:
            for feature, gain in tree.split_gains():
                totals[feature] += gain
        s = totals.sum()
        if s <= 0:
            warnings.warn("model has no splits; importance is all-zero")
            return totals
        return totals / s

    def to_bytes(self) -> bytes:
        payload = {
            "schema": list(self.schema),
            "params": self.params.as_dict(),
            "base_score": self.base_score,
            "trees": [t.to_payload() for t in self.trees],
        }
        return encode_model("gbdt", payload)

    @classmethod
    def from_payload(cls, doc: dict) -> "GbdtModel":
        try:
            return cls(
                trees=tuple(Tree.from_payload(t) for t in doc["trees"]),
                base_score=float(doc["base_score"]),
                schema=tuple(doc["schema"]),
                params=GbdtParams(**doc["params"]),
            )
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed gbdt payload: {exc}") from None

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GbdtModel":
        return cls.from_payload(decode_model(blob, expect_family="gbdt"))


def serialize(model: GbdtModel) -> bytes:
    return model.to_bytes()


def deserialize(blob: bytes) -> GbdtModel:
    return GbdtModel.from_bytes(blob)


def predict_proba(model: GbdtModel, rec) -> float:
    return model.predict_proba(rec)


def feature_importance(model: GbdtModel) -> np.ndarray:
    return model.feature_importance()


def fit(
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    params: GbdtParams,
    schema: Sequence[str],
    valid: ValidationData | None = None,
) -> GbdtModel:
    """Boost ``params.n_rounds`` trees on a raw feature matrix.

    With ``valid`` given and ``early_stop_rounds > 0``, stops once the
    validation cost has not improved for that many rounds and keeps only
    the trees up to the best round.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    w = np.asarray(weights, dtype=float)
    n = len(y)
    if x.shape[0] != n or len(w) != n:
        raise ValidationError(f"shape mismatch: x={x.shape}, y={n}, weights={len(w)}")
    if n == 0:
        raise ValidationError("empty training set")
    if not np.all(np.isfinite(x)):
        raise TrainingError("non-finite feature value in training matrix")
    if not np.all(w > 0):
        raise ValidationError("weights must be strictly positive")
    w = w / w.mean()

    prevalence = float(np.sum(w * y) / np.sum(w))
    prevalence = min(max(prevalence, _PREVALENCE_CLIP), 1.0 - _PREVALENCE_CLIP)
    base_score = float(np.log(prevalence / (1.0 - prevalence)))

    if len(np.unique(y)) < 2:
        warnings.warn("single-class training set; returning a constant predictor")
        return GbdtModel(trees=(), base_score=base_score, schema=tuple(schema), params=params)

    rng = np.random.default_rng(params.seed)
    n_features = x.shape[1]
    margin = np.full(n, base_score)
    margin_valid = np.full(len(valid.y), base_score) if valid is not None else None

    trees: list[Tree] = []
    history: list[dict] = []
    best_cost = np.inf
    best_round = -1

    for round_no in range(params.n_rounds):
        p = _sigmoid(margin)
        g = w * (p - y)
        h = w * p * (1.0 - p)

        if params.subsample < 1.0:
            rows = np.sort(rng.choice(n, size=max(1, int(round(params.subsample * n))), replace=False))
        else:
            rows = np.arange(n)
        if params.colsample < 1.0:
            columns = np.sort(
                rng.choice(n_features, size=max(1, int(round(params.colsample * n_features))), replace=False)
            ).tolist()
        else:
            columns = None

        tree = _TreeBuilder(x, g, h, params, columns).build(rows)
        trees.append(tree)
        margin = margin + params.learning_rate * tree.predict(x)

        entry = {
            "round": round_no,
            "train_loss": weighted_logloss(y, _sigmoid(margin), w),
        }
        if valid is not None:
            margin_valid = margin_valid + params.learning_rate * tree.predict(valid.x)
            cost = valid.cost_of(_sigmoid(margin_valid))
            entry["valid_cost"] = cost
            if cost < best_cost:
                best_cost = cost
                best_round = round_no
            if params.early_stop_rounds > 0 and round_no - best_round >= params.early_stop_rounds:
                history.append(entry)
                trees = trees[: best_round + 1]
                break
        history.append(entry)

    return GbdtModel(
        trees=tuple(trees),
        base_score=base_score,
        schema=tuple(schema),
        params=params,
        history=tuple(history),
    )


def train(
    ds: Dataset,
    params: GbdtParams,
    weights: np.ndarray,
    valid: ValidationData | None = None,
) -> GbdtModel:
    """Train on a labeled dataset with per-instance cost weights."""
    return fit(ds.matrix(), ds.labels(), weights, params, ds.schema, valid=valid)
