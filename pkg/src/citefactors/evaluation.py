"""Metrics, cross-validation, grid search, ablation, and the report writers."""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import CorpusSnapshot
from .features import FEATURE_GROUPS, FactorGroup, FeatureMatrix
from .learners import FITTERS, Hyperparams
from .scimetrics import UndefinedCorrelationError, gini_coefficient, pearson

GROUP_ORDER = list(FactorGroup)


@dataclass
class MetricsReport:
    mae: float
    mape: float
    mse: float
    acc: float
    r2: float
    n: int
    acc_tolerance: float
    excluded_zero_targets: int


def metrics(y, y_hat, tau: float = 1.0) -> MetricsReport:
    """MAE/MSE/R2 over every row; MAPE and ACC over rows with y != 0.

    ACC is the fraction of rows with |y_hat - y| <= tau. R2 on a
    zero-variance target is 1 for a perfect fit and 0 otherwise.
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise ValueError("y and y_hat must be equal-length vectors")
    if len(y) == 0:
        raise ValueError("metrics require at least one row")
    err = y_hat - y
    mae = float(np.abs(err).mean())
    mse = float((err ** 2).mean())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        r2 = 1.0 if mse == 0 else 0.0
    else:
        r2 = 1.0 - float((err ** 2).sum()) / ss_tot

    nonzero = y != 0
    excluded = int((~nonzero).sum())
    if not nonzero.any():
        raise ValueError("all rows have zero targets; MAPE/ACC undefined")
    mape = float(100.0 * np.abs(err[nonzero] / y[nonzero]).mean())
    acc = float((np.abs(err[nonzero]) <= tau).mean())
    return MetricsReport(mae=mae, mape=mape, mse=mse, acc=acc, r2=r2,
                         n=len(y), acc_tolerance=tau,
                         excluded_zero_targets=excluded)


def kfold(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle cut into k contiguous folds; the first n % k folds take
    the extra row. Returns sorted validation-index arrays."""
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, {n}], got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start:start + size]))
        start += size
    return folds


def train_test_split(n: int, test_fraction: float, seed: int):
    """Seeded holdout split; both sides non-empty, indices sorted."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0,1)")
    if n < 2:
        raise ValueError("need at least two rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = min(n - 1, max(1, int(test_fraction * n)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


@dataclass
class GridCell:
    params: dict
    hyperparams: Hyperparams | None
    mean_mse: float | None
    fold_reports: list[MetricsReport] = field(default_factory=list)
    failed: bool = False
    error: str = ""


def _cv_cell(learner_id, hp, X, y, folds, tau):
    fit = FITTERS[learner_id]
    reports = []
    all_rows = np.arange(len(y))
    for val in folds:
        train = np.setdiff1d(all_rows, val)
        model = fit(X[train], y[train], hp)
        reports.append(metrics(y[val], model.predict(X[val]), tau))
    return reports


def grid_search(learner_id: str, grid: dict, X, y, k: int, seed: int,
                base: Hyperparams | None = None, tau: float = 1.0,
                threads: int = 1):
    """Full Cartesian product over the grid (sorted keys, values in given
    order), scored by k-fold mean MSE; ties keep the earliest cell. Cells
    whose training fails are excluded. Returns (best Hyperparams, cells)."""
    if learner_id not in FITTERS:
        raise ValueError(f"unknown learner {learner_id!r}")
    if not grid:
        raise ValueError("empty grid")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if base is None:
        base = Hyperparams(seed=seed)
    folds = kfold(len(y), k, seed)

    keys = sorted(grid)
    combos = list(itertools.product(*(grid[key] for key in keys)))

    def evaluate(combo):
        params = dict(zip(keys, combo))
        try:
            hp = replace(base, **params)
            reports = _cv_cell(learner_id, hp, X, y, folds, tau)
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            return GridCell(params, None, None, failed=True, error=str(exc))
        mean_mse = sum(r.mse for r in reports) / len(reports)
        return GridCell(params, hp, mean_mse, reports)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(evaluate, combos))
    else:
        cells = [evaluate(c) for c in combos]

    best = None
    for cell in cells:
        if cell.failed:
            continue
        if best is None or cell.mean_mse < best.mean_mse:
            best = cell
    if best is None:
        raise ValueError("every grid cell failed")
    return best.hyperparams, cells


@dataclass
class JackknifeEntry:
    group: FactorGroup
    phase: str  # Adding | Removing
    report: MetricsReport


@dataclass
class JackknifeReport:
    baseline: MetricsReport
    entries: list[JackknifeEntry]

    def get(self, group: FactorGroup, phase: str) -> MetricsReport:
        for e in self.entries:
            if e.group is group and e.phase == phase:
                return e.report
        raise KeyError((group, phase))


def jackknife(learner_id: str, hp: Hyperparams, matrix: FeatureMatrix,
              split, tau: float = 1.0, threads: int = 1) -> JackknifeReport:
    """Factor-group ablation: for each group train once on only its columns
    (Adding) and once on everything else (Removing), plus the full-feature
    baseline — 11 runs on one shared split."""
    train, test = (np.asarray(s) for s in split)
    if len(train) == 0 or len(test) == 0:
        raise ValueError("degenerate train/test split")
    for group in GROUP_ORDER:
        if not matrix.group_columns(group):
            raise ValueError(f"matrix lacks {group.value} columns")
    fit = FITTERS[learner_id]
    X, y = matrix.X, matrix.y

    def run(cols):
        cols = list(cols)
        names = [matrix.feature_names[c] for c in cols]
        model = fit(X[np.ix_(train, cols)], y[train], hp, feature_names=names)
        return metrics(y[test], model.predict(X[np.ix_(test, cols)]), tau)

    jobs = [list(range(len(matrix.feature_names)))]
    for group in GROUP_ORDER:
        member = matrix.group_columns(group)
        rest = [c for c in range(len(matrix.feature_names)) if c not in member]
        jobs.append(member)
        jobs.append(rest)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(cols) for cols in jobs]

    baseline = results[0]
    entries = []
    for i, group in enumerate(GROUP_ORDER):
        entries.append(JackknifeEntry(group, "Adding", results[1 + 2 * i]))
        entries.append(JackknifeEntry(group, "Removing", results[2 + 2 * i]))
    return JackknifeReport(baseline, entries)


def correlation_table(matrix: FeatureMatrix):
    """Per-feature Pearson correlation against the target, in column order.

    Zero-variance features (or a zero-variance target) report None.
    """
    if len(matrix.y) < 2:
        raise ValueError("correlation requires at least two rows")
    rows = []
    for i, name in enumerate(matrix.feature_names):
        try:
            r = pearson(matrix.X[:, i].tolist(), matrix.y.tolist())
        except UndefinedCorrelationError:
            r = None
        rows.append((name, FEATURE_GROUPS[name], r))
    return rows


COHORTS = [("top_5pct", 0.05), ("top_10pct", 0.10),
           ("top_20pct", 0.20), ("last_10pct", 0.10)]
GINI_METRICS = ["papers", "citations", "h_index"]


@dataclass
class GiniReport:
    ranking: list[str]  # institutions by descending author count
    per_institution: dict[str, dict[str, float]]
    cohorts: dict[str, list[str]]
    means: dict[str, dict[str, float]]  # cohort -> metric -> mean gini


def gini_report(snapshot: CorpusSnapshot) -> GiniReport:
    """Institution inequality report.

    Institutions are ranked by author count (descending, ties by id); each
    cohort takes max(1, floor(share * n)) institutions from the top (or the
    bottom for the trailing cohort) and averages the per-institution Gini of
    per-author paper counts, citations, and h-indexes.
    """
    members = snapshot.institution_authors
    if not members:
        raise ValueError("no institution has any resolved author")
    ranking = sorted(members, key=lambda i: (-len(members[i]), i))

    from .features import _index
    idx = _index(snapshot)
    per_inst = {}
    for inst in ranking:
        authors = members[inst]
        per_inst[inst] = {
            "papers": gini_coefficient(len(snapshot.author_papers[a]) for a in authors),
            "citations": gini_coefficient(idx.author_cits[a] for a in authors),
            "h_index": gini_coefficient(idx.h_map[a] for a in authors),
        }

    n = len(ranking)
    cohorts = {}
    for name, share in COHORTS:
        size = max(1, math.floor(share * n))
        cohorts[name] = ranking[-size:] if name == "last_10pct" else ranking[:size]

    means = {}
    for name, insts in cohorts.items():
        means[name] = {m: sum(per_inst[i][m] for i in insts) / len(insts)
                       for m in GINI_METRICS}
    return GiniReport(ranking, per_inst, cohorts, means)


def _fmt(v) -> str:
    return "" if v is None else f"{v:.10g}"


def write_correlations_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "group", "correlation"])
        for name, group, r in rows:
            writer.writerow([name, group.value, _fmt(r)])


_METRIC_FIELDS = ["mae", "mape", "mse", "acc", "r2", "n",
                  "acc_tolerance", "excluded_zero_targets"]


def _metric_values(report: MetricsReport):
    return [_fmt(getattr(report, f)) for f in _METRIC_FIELDS]


def write_metrics_csv(rows, path) -> None:
    """rows: iterable of (learner, delta_t, MetricsReport)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["learner", "delta_t", *_METRIC_FIELDS])
        for learner, delta_t, report in rows:
            writer.writerow([learner, delta_t, *_metric_values(report)])


def write_jackknife_csv(report: JackknifeReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "phase", *_METRIC_FIELDS])
        writer.writerow(["All", "Baseline", *_metric_values(report.baseline)])
        for e in report.entries:
            writer.writerow([e.group.value, e.phase, *_metric_values(e.report)])


def write_importance_csv(report, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scope", "name", "measure", "value"])
        ordered = sorted(report.per_feature.items(), key=lambda kv: (-kv[1], kv[0]))
        for name, value in ordered:
            writer.writerow(["feature", name, report.measure, _fmt(value)])
        for group in GROUP_ORDER:
            if group in report.group_shares:
                writer.writerow(["group", group.value, "share_pct",
                                 _fmt(report.group_shares[group])])


def write_gini_csv(report: GiniReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cohort", "institutions", *GINI_METRICS])
        for name, _ in COHORTS:
            writer.writerow([name, len(report.cohorts[name]),
                             *(_fmt(report.means[name][m]) for m in GINI_METRICS)])
