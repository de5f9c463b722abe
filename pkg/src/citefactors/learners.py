"""Four from-scratch regressors behind one train/predict/importance contract.

Linear regression (full-batch gradient descent), a least-squares CART, and
two boosted ensembles: residual-fitting GBDT and a second-order,
regularized variant. The two ensembles share a boosting driver (so seeded
subsampling is identical) but keep independent split finders, which makes
their agreement at l2_reg=0, leaf_penalty=0 a real cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import FEATURE_GROUPS, FactorGroup

FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Gradient descent produced non-finite parameters."""


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.1
    max_depth: int = 3
    n_trees: int = 100
    subsample: float = 1.0
    colsample: float = 1.0
    l2_reg: float = 0.0
    leaf_penalty: float = 0.0
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.n_trees < 0:
            raise ValueError("n_trees must be non-negative")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must lie in (0,1]")
        if not 0 < self.colsample <= 1:
            raise ValueError("colsample must lie in (0,1]")
        if self.l2_reg < 0 or self.leaf_penalty < 0:
            raise ValueError("regularization terms must be non-negative")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be positive")


@dataclass
class TrainedModel:
    model_type: str  # linear | cart | gbdt | xgb
    feature_names: list[str]
    hyperparams: Hyperparams
    payload: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"expected {len(self.feature_names)} feature columns, got "
                f"{X.shape[1] if X.ndim == 2 else 'non-matrix input'}")
        if self.model_type == "linear":
            p = self.payload
            sigma = np.asarray(p["sigma"])
            safe = np.where(sigma == 0, 1.0, sigma)
            Z = (X - np.asarray(p["mu"])) / safe
            return Z @ np.asarray(p["weights"]) + p["bias"]
        if self.model_type == "cart":
            return _predict_tree(self.payload["root"], X)
        acc = np.full(len(X), self.payload["base_score"])
        for root in self.payload["trees"]:
            acc = acc + self.payload["learning_rate"] * _predict_tree(root, X)
        return acc

    def to_json(self) -> str:
        return json.dumps({
            "format_version": FORMAT_VERSION,
            "model_type": self.model_type,
            "feature_names": self.feature_names,
            "hyperparams": asdict(self.hyperparams),
            "payload": self.payload,
        }, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        obj = json.loads(text)
        if obj.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {obj.get('format_version')!r}")
        return cls(model_type=obj["model_type"],
                   feature_names=list(obj["feature_names"]),
                   hyperparams=Hyperparams(**obj["hyperparams"]),
                   payload=obj["payload"])

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _validate_input(X, y, min_rows=2):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    if len(X) != len(y):
        raise ValueError(f"row mismatch: {len(X)} vs {len(y)}")
    if len(X) < min_rows:
        raise ValueError(f"need at least {min_rows} rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite training input")
    return X, y


def _names(X, feature_names):
    if feature_names is None:
        return [f"f{i}" for i in range(X.shape[1])]
    if len(feature_names) != X.shape[1]:
        raise ValueError("feature name count does not match columns")
    return list(feature_names)


def fit_linear(X, y, hp: Hyperparams, feature_names=None) -> TrainedModel:
    """Gradient descent on z-scored columns with L2 penalty.

    y is centered, so the intercept is exactly mean(y); constant columns are
    zeroed out and keep weight 0.
    """
    X, y = _validate_input(X, y)
    names = _names(X, feature_names)
    n, d = X.shape
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    safe = np.where(sigma == 0, 1.0, sigma)
    Z = (X - mu) / safe
    Z[:, sigma == 0] = 0.0
    bias = float(y.mean())
    yc = y - bias

    w = np.zeros(d)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(1000):
            grad = (2.0 / n) * (Z.T @ (Z @ w - yc)) + 2.0 * hp.l2_reg * w
            if not np.isfinite(grad).all():
                raise TrainingDivergedError("gradient became non-finite")
            if math.sqrt(float(grad @ grad)) < 1e-8:
                break
            w = w - hp.learning_rate * grad
            if not np.isfinite(w).all():
                raise TrainingDivergedError("weights became non-finite")

    return TrainedModel("linear", names, hp, {
        "mu": mu.tolist(), "sigma": sigma.tolist(),
        "weights": w.tolist(), "bias": bias,
    })


def _predict_tree(root: dict, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))

    def descend(node, idx):
        if "value" in node:
            out[idx] = node["value"]
            return
        mask = X[idx, node["feature"]] <= node["threshold"]
        left, right = idx[mask], idx[~mask]
        if len(left):
            descend(node["left"], left)
        if len(right):
            descend(node["right"], right)

    descend(root, np.arange(len(X)))
    return out


def _split_candidates(col_sorted, n, min_leaf):
    """Boolean mask over split positions i (cut between i and i+1)."""
    valid = col_sorted[:-1] < col_sorted[1:]
    sizes = np.arange(1, n)
    return valid & (sizes >= min_leaf) & (n - sizes >= min_leaf)


def _build_tree_sse(X, y, rows, cols, hp, depth) -> dict:
    """Greedy least-squares tree: maximize SSE reduction at every node."""
    ys = y[rows]
    n = len(rows)
    mean = float(ys.mean())
    if depth >= hp.max_depth or n < 2 * hp.min_samples_leaf or np.ptp(ys) == 0:
        return {"value": mean}

    total = ys.sum()
    parent_sse = float(((ys - mean) ** 2).sum())
    best = None  # (reduction, feature, threshold, sorted order, position)
    for c in cols:
        col = X[rows, c]
        order = np.argsort(col, kind="stable")
        col_s = col[order]
        mask = _split_candidates(col_s, n, hp.min_samples_leaf)
        if not mask.any():
            continue
        y_s = ys[order]
        cum = np.cumsum(y_s)[:-1]
        cum2 = np.cumsum(y_s ** 2)[:-1]
        cnt_l = np.arange(1, n)
        cnt_r = n - cnt_l
        sse_l = cum2 - cum ** 2 / cnt_l
        sse_r = (cum2[-1] + y_s[-1] ** 2 - cum2) - (total - cum) ** 2 / cnt_r
        reduction = np.where(mask, parent_sse - sse_l - sse_r, -np.inf)
        pos = int(np.argmax(reduction))
        red = float(reduction[pos])
        if red > 0 and (best is None or red > best[0]):
            best = (red, int(c), float((col_s[pos] + col_s[pos + 1]) / 2), order, pos)

    if best is None:
        return {"value": mean}
    _, feature, threshold, order, pos = best
    left_rows = rows[np.sort(order[:pos + 1])]
    right_rows = rows[np.sort(order[pos + 1:])]
    return {
        "feature": feature,
        "threshold": threshold,
        "left": _build_tree_sse(X, y, left_rows, cols, hp, depth + 1),
        "right": _build_tree_sse(X, y, right_rows, cols, hp, depth + 1),
    }


def _build_tree_grad(X, g, rows, cols, hp, depth) -> dict:
    """Second-order tree on half-squared loss: per-row gradient g, hessian 1.

    Leaf weight -G/(H+lambda); split gain
    0.5*(G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)) - gamma,
    with non-positive gains rejected.
    """
    gs = g[rows]
    n = len(rows)
    lam = hp.l2_reg
    G = float(gs.sum())
    leaf = {"value": -G / (n + lam)}
    if depth >= hp.max_depth or n < 2 * hp.min_samples_leaf:
        return leaf

    parent_score = G ** 2 / (n + lam)
    best = None
    for c in cols:
        col = X[rows, c]
        order = np.argsort(col, kind="stable")
        col_s = col[order]
        mask = _split_candidates(col_s, n, hp.min_samples_leaf)
        if not mask.any():
            continue
        g_s = gs[order]
        cum = np.cumsum(g_s)[:-1]
        cnt_l = np.arange(1, n)
        cnt_r = n - cnt_l
        gain = 0.5 * (cum ** 2 / (cnt_l + lam)
                      + (G - cum) ** 2 / (cnt_r + lam)
                      - parent_score) - hp.leaf_penalty
        gain = np.where(mask, gain, -np.inf)
        pos = int(np.argmax(gain))
        gn = float(gain[pos])
        if gn > 0 and (best is None or gn > best[0]):
            best = (gn, int(c), float((col_s[pos] + col_s[pos + 1]) / 2), order, pos)

    if best is None:
        return leaf
    _, feature, threshold, order, pos = best
    left_rows = rows[np.sort(order[:pos + 1])]
    right_rows = rows[np.sort(order[pos + 1:])]
    return {
        "feature": feature,
        "threshold": threshold,
        "left": _build_tree_grad(X, g, left_rows, cols, hp, depth + 1),
        "right": _build_tree_grad(X, g, right_rows, cols, hp, depth + 1),
    }


def fit_cart(X, y, hp: Hyperparams, feature_names=None) -> TrainedModel:
    X, y = _validate_input(X, y, min_rows=2 * hp.min_samples_leaf)
    names = _names(X, feature_names)
    rows = np.arange(len(X))
    cols = np.arange(X.shape[1])
    root = _build_tree_sse(X, y, rows, cols, hp, 0)
    return TrainedModel("cart", names, hp, {"root": root})


def _boost(X, y, hp: Hyperparams, mode: str, feature_names) -> TrainedModel:
    X, y = _validate_input(X, y, min_rows=2 * hp.min_samples_leaf)
    names = _names(X, feature_names)
    n, d = X.shape
    rng = np.random.default_rng(hp.seed)
    base = float(y.mean())
    pred = np.full(n, base)
    trees = []
    for _ in range(hp.n_trees):
        m = max(1, int(hp.subsample * n))
        rows = np.sort(rng.choice(n, size=m, replace=False))
        k = max(1, int(hp.colsample * d))
        cols = np.sort(rng.choice(d, size=k, replace=False))
        if mode == "gbdt":
            root = _build_tree_sse(X, y - pred, rows, cols, hp, 0)
        else:
            root = _build_tree_grad(X, pred - y, rows, cols, hp, 0)
        pred = pred + hp.learning_rate * _predict_tree(root, X)
        trees.append(root)
    return TrainedModel(mode, names, hp, {
        "base_score": base, "learning_rate": hp.learning_rate,
        "mode": mode, "trees": trees,
    })


def fit_gbdt(X, y, hp: Hyperparams, feature_names=None) -> TrainedModel:
    """Each round fits a least-squares tree to the current residuals."""
    return _boost(X, y, hp, "gbdt", feature_names)


def fit_xgb(X, y, hp: Hyperparams, feature_names=None) -> TrainedModel:
    """Second-order boosting with L2 leaf regularization and a split gate."""
    return _boost(X, y, hp, "xgb", feature_names)


FITTERS = {"linear": fit_linear, "cart": fit_cart, "gbdt": fit_gbdt, "xgb": fit_xgb}


def predict(model: TrainedModel, X) -> np.ndarray:
    return model.predict(X)


@dataclass
class ImportanceReport:
    measure: str  # split_count | abs_standardized_weight
    per_feature: dict[str, float]
    group_shares: dict[FactorGroup, float]  # percentages over nonzero groups


def _group_shares(per_feature: dict[str, float]) -> dict[FactorGroup, float]:
    totals: dict[FactorGroup, float] = {}
    for name, value in per_feature.items():
        group = FEATURE_GROUPS.get(name)
        if group is not None and value > 0:
            totals[group] = totals.get(group, 0.0) + value
    grand = sum(totals.values())
    if grand == 0:
        return {}
    return {g: 100.0 * v / grand for g, v in totals.items()}


def _count_splits(root: dict, counts: np.ndarray) -> None:
    if "value" in root:
        return
    counts[root["feature"]] += 1
    _count_splits(root["left"], counts)
    _count_splits(root["right"], counts)


def importance(model: TrainedModel) -> ImportanceReport:
    """Split-occurrence counts per feature, with normalized group shares.

    Linear models have no splits; their report carries absolute standardized
    weights under a distinct measure label.
    """
    if model.model_type == "linear":
        per = {name: abs(w) for name, w in
               zip(model.feature_names, model.payload["weights"])}
        return ImportanceReport("abs_standardized_weight", per, _group_shares(per))
    counts = np.zeros(len(model.feature_names))
    if model.model_type == "cart":
        _count_splits(model.payload["root"], counts)
    else:
        for root in model.payload["trees"]:
            _count_splits(root, counts)
    per = {name: float(c) for name, c in zip(model.feature_names, counts) if c > 0}
    return ImportanceReport("split_count", per, _group_shares(per))
