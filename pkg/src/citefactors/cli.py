"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error. Every run is
reproducible from --seed, which is fanned out into per-stage sub-seeds.
All randomness in a run derives from that one value.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .corpus import CorpusFormatError, EmptySnapshotError, load_corpus
from .evaluation import (
    correlation_table,
    gini_report,
    grid_search,
    jackknife,
    metrics,
    train_test_split,
    write_correlations_csv,
    write_gini_csv,
    write_importance_csv,
    write_jackknife_csv,
    write_metrics_csv,
)
from .features import (
    FeatureConfig,
    FeatureExtractionError,
    FeatureMatrix,
    extract_matrix,
)
from .learners import FITTERS, Hyperparams, TrainedModel, importance
from .synth import SynthConfig, generate

ALLOWED_DELTA_T = (3, 5, 7, 10)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; the contract wants 1
    def error(self, message):
        raise UsageError(message)


def derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2 ** 31)


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"invalid TOML in {path}: {exc}") from None


def _config(args) -> dict:
    return _load_toml(args.config) if getattr(args, "config", None) else {}


def _setting(args, config, key, default=None):
    """CLI flag wins over config file value wins over default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return config.get(key, default)


def _require(value, name):
    if value is None:
        raise UsageError(f"missing required setting {name!r}")
    return value


def _check_delta_t(delta_t) -> int:
    if delta_t not in ALLOWED_DELTA_T:
        raise UsageError(
            f"delta_t must be one of {ALLOWED_DELTA_T}, got {delta_t}")
    return int(delta_t)


def _check_years(cutoff, target):
    if cutoff >= target:
        raise UsageError(
            f"cutoff year {cutoff} must precede target year {target}")


def _load_corpus_checked(papers, institutions, gdp):
    try:
        return load_corpus(_require(papers, "papers"),
                           _require(institutions, "institutions"), gdp)
    except FileNotFoundError as exc:
        raise DataError(f"corpus file not found: {exc.filename}") from None
    except CorpusFormatError as exc:
        raise DataError(str(exc)) from None


def _hyperparams(args, config, seed) -> Hyperparams:
    table = dict(config.get("hyperparams", {}))
    table.setdefault("seed", derive_seed(seed, "model"))
    try:
        return Hyperparams(**table)
    except TypeError as exc:
        raise UsageError(f"bad hyperparameter name: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"bad hyperparameter value: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _synth_config(args, config, seed) -> SynthConfig:
    table = dict(config.get("synth", {}))
    for key in ("n_authors", "n_venues", "n_institutions", "n_keywords",
                "papers_per_author_year", "team_size", "pa_strength",
                "refs_per_paper"):
        flag = getattr(args, key, None)
        if flag is not None:
            table[key] = flag
    if getattr(args, "year_start", None) is not None:
        table["years"] = (args.year_start, args.year_end or args.year_start)
    if "years" in table:
        table["years"] = tuple(table["years"])
    table["seed"] = derive_seed(seed, "synth")
    try:
        return SynthConfig(**table)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad synth configuration: {exc}") from None


def cmd_synth(args) -> int:
    config = _config(args)
    seed = _setting(args, config, "seed", 0)
    out = _out_dir(args)
    summary = generate(_synth_config(args, config, seed), out)
    print(f"wrote {summary.n_papers} papers "
          f"({summary.n_active_authors} authors) to {out}")
    if summary.truncated_references:
        print(f"note: truncated {summary.truncated_references} reference draws")
    return 0


def _feature_config(args, config) -> FeatureConfig:
    venue_score = _setting(args, config, "venue_score", "pagerank")
    include_pr_pub = _setting(args, config, "include_pr_pub", False)
    try:
        return FeatureConfig(include_pr_pub=bool(include_pr_pub),
                             venue_score=venue_score)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _extract(args, config, corpus, threads):
    cutoff = _require(_setting(args, config, "cutoff_year"), "cutoff_year")
    target = _require(_setting(args, config, "target_year"), "target_year")
    delta_t = _check_delta_t(_require(_setting(args, config, "delta_t"), "delta_t"))
    _check_years(cutoff, target)
    try:
        return extract_matrix(corpus, cutoff, delta_t, target,
                              config=_feature_config(args, config),
                              threads=threads)
    except (FeatureExtractionError, EmptySnapshotError, ValueError) as exc:
        raise DataError(str(exc)) from None


def _write_features(matrix, out: Path, config: FeatureConfig) -> None:
    matrix.write_csv(out / "features.csv")
    meta = {
        "cutoff_year": matrix.cutoff_year,
        "delta_t": matrix.delta_t,
        "target_year": matrix.target_year,
        "n_authors": len(matrix.authors),
        "feature_names": matrix.feature_names,
        "config": {"include_pr_pub": config.include_pr_pub,
                   "venue_score": config.venue_score},
        "warnings": matrix.warnings,
    }
    (out / "features.meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n")


def cmd_features(args) -> int:
    config = _config(args)
    corpus = _load_corpus_checked(
        _setting(args, config, "papers"),
        _setting(args, config, "institutions"),
        _setting(args, config, "gdp"))
    matrix = _extract(args, config, corpus, args.threads)
    out = _out_dir(args)
    _write_features(matrix, out, _feature_config(args, config))
    print(f"wrote {len(matrix.authors)}x{len(matrix.feature_names)} matrix "
          f"to {out / 'features.csv'}")
    return 0


def _read_matrix(path) -> FeatureMatrix:
    try:
        return FeatureMatrix.read_csv(path)
    except FileNotFoundError:
        raise DataError(f"features file not found: {path}") from None
    except (FeatureExtractionError, ValueError, IndexError) as exc:
        raise DataError(f"bad features file {path}: {exc}") from None


def cmd_correlate(args) -> int:
    matrix = _read_matrix(args.features)
    out = _out_dir(args)
    try:
        rows = correlation_table(matrix)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    write_correlations_csv(rows, out / "correlations.csv")
    print(f"wrote {out / 'correlations.csv'}")
    return 0


def _grid(args, config) -> dict:
    grid = {}
    if getattr(args, "grid", None):
        loaded = _load_toml(args.grid)
        grid = loaded.get("grid", loaded)
    elif "grid" in config:
        grid = config["grid"]
    bad = {k: v for k, v in grid.items() if not isinstance(v, list)}
    if bad:
        raise UsageError(f"grid values must be lists, got {bad}")
    return grid


def cmd_train(args) -> int:
    config = _config(args)
    seed = _setting(args, config, "seed", 0)
    learner = _setting(args, config, "learner", "xgb")
    if learner not in FITTERS:
        raise UsageError(f"unknown learner {learner!r}; pick from {sorted(FITTERS)}")
    tau = _setting(args, config, "acc_tolerance", 1.0)
    matrix = _read_matrix(args.features)
    out = _out_dir(args)
    base = _hyperparams(args, config, seed)
    grid = _grid(args, config)

    if grid:
        try:
            best, cells = grid_search(learner, grid, matrix.X, matrix.y,
                                      k=args.k, seed=derive_seed(seed, "folds"),
                                      base=base, tau=tau, threads=args.threads)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        _write_cv_table(cells, out / "cv_table.csv")
        hp = best
    else:
        hp = base

    try:
        model = FITTERS[learner](matrix.X, matrix.y, hp,
                                 feature_names=matrix.feature_names)
    except (ValueError, RuntimeError) as exc:
        raise DataError(f"training failed: {exc}") from None
    model.save(out / "model.json")
    print(f"wrote {out / 'model.json'}")
    return 0


def _write_cv_table(cells, path) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["params", "mean_mse", "failed", "error"])
        for cell in cells:
            params = "|".join(f"{k}={cell.params[k]}" for k in sorted(cell.params))
            mse = "" if cell.mean_mse is None else f"{cell.mean_mse:.10g}"
            writer.writerow([params, mse, "yes" if cell.failed else "no",
                             cell.error])


def _load_model(path) -> TrainedModel:
    try:
        return TrainedModel.load(path)
    except FileNotFoundError:
        raise DataError(f"model file not found: {path}") from None
    except (ValueError, KeyError) as exc:
        raise DataError(f"bad model file {path}: {exc}") from None


def cmd_evaluate(args) -> int:
    config = _config(args)
    tau = _setting(args, config, "acc_tolerance", 1.0)
    matrix = _read_matrix(args.features)
    model = _load_model(args.model)
    delta_t = _setting(args, config, "delta_t", "")
    out = _out_dir(args)
    try:
        report = metrics(matrix.y, model.predict(matrix.X), tau)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    write_metrics_csv([(model.model_type, delta_t, report)], out / "metrics.csv")
    print(f"{model.model_type}: mae={report.mae:.4f} acc={report.acc:.4f} "
          f"r2={report.r2:.4f} (n={report.n})")
    return 0


def cmd_jackknife(args) -> int:
    config = _config(args)
    seed = _setting(args, config, "seed", 0)
    learner = _setting(args, config, "learner", "xgb")
    tau = _setting(args, config, "acc_tolerance", 1.0)
    matrix = _read_matrix(args.features)
    hp = _hyperparams(args, config, seed)
    split = train_test_split(len(matrix.y), args.test_fraction,
                             derive_seed(seed, "split"))
    out = _out_dir(args)
    try:
        report = jackknife(learner, hp, matrix, split, tau=tau,
                           threads=args.threads)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    write_jackknife_csv(report, out / "jackknife.csv")
    print(f"wrote {out / 'jackknife.csv'}")
    return 0


def cmd_importance(args) -> int:
    model = _load_model(args.model)
    out = _out_dir(args)
    write_importance_csv(importance(model), out / "importance.csv")
    print(f"wrote {out / 'importance.csv'}")
    return 0


def cmd_gini(args) -> int:
    config = _config(args)
    corpus = _load_corpus_checked(
        _setting(args, config, "papers"),
        _setting(args, config, "institutions"),
        _setting(args, config, "gdp"))
    cutoff = _require(_setting(args, config, "cutoff_year"), "cutoff_year")
    out = _out_dir(args)
    try:
        report = gini_report(corpus.snapshot(cutoff))
    except (EmptySnapshotError, ValueError) as exc:
        raise DataError(str(exc)) from None
    write_gini_csv(report, out / "gini.csv")
    print(f"wrote {out / 'gini.csv'}")
    return 0


def cmd_pipeline(args) -> int:
    config = _config(args)
    seed = _setting(args, config, "seed", 0)
    threads = args.threads
    out = _out_dir(args)

    if "synth" in config:
        corpus_dir = out / "corpus"
        generate(_synth_config(args, config, seed), corpus_dir)
        papers = corpus_dir / "papers.jsonl"
        institutions = corpus_dir / "institutions.jsonl"
        gdp = corpus_dir / "gdp.csv"
    else:
        papers = _setting(args, config, "papers")
        institutions = _setting(args, config, "institutions")
        gdp = _setting(args, config, "gdp")
    corpus = _load_corpus_checked(papers, institutions, gdp)

    matrix = _extract(args, config, corpus, threads)
    feature_config = _feature_config(args, config)
    _write_features(matrix, out, feature_config)

    try:
        write_correlations_csv(correlation_table(matrix),
                               out / "correlations.csv")
    except ValueError as exc:
        raise DataError(str(exc)) from None

    learner = _setting(args, config, "learner", "xgb")
    if learner not in FITTERS:
        raise UsageError(f"unknown learner {learner!r}; pick from {sorted(FITTERS)}")
    tau = _setting(args, config, "acc_tolerance", 1.0)
    base = _hyperparams(args, config, seed)
    grid = _grid(args, config)
    test_fraction = _setting(args, config, "test_fraction", 0.2)
    k = _setting(args, config, "cv_folds", 5)

    split = train_test_split(len(matrix.y), test_fraction,
                             derive_seed(seed, "split"))
    train_idx, test_idx = split

    try:
        if grid:
            hp, cells = grid_search(learner, grid,
                                    matrix.X[train_idx], matrix.y[train_idx],
                                    k=k, seed=derive_seed(seed, "folds"),
                                    base=base, tau=tau, threads=threads)
            _write_cv_table(cells, out / "cv_table.csv")
        else:
            hp = base
        model = FITTERS[learner](matrix.X[train_idx], matrix.y[train_idx], hp,
                                 feature_names=matrix.feature_names)
        held_out = metrics(matrix.y[test_idx],
                           model.predict(matrix.X[test_idx]), tau)
        jack = jackknife(learner, hp, matrix, split, tau=tau, threads=threads)
    except (ValueError, RuntimeError) as exc:
        raise DataError(str(exc)) from None

    model.save(out / "model.json")
    write_metrics_csv([(learner, matrix.delta_t, held_out)], out / "metrics.csv")
    write_jackknife_csv(jack, out / "jackknife.csv")
    write_importance_csv(importance(model), out / "importance.csv")
    write_gini_csv(gini_report(corpus.snapshot(matrix.cutoff_year)),
                   out / "gini.csv")

    summary = {
        "seed": seed,
        "learner": learner,
        "delta_t": matrix.delta_t,
        "cutoff_year": matrix.cutoff_year,
        "target_year": matrix.target_year,
        "n_authors": len(matrix.authors),
        "n_papers": len(corpus.papers),
        "train_rows": int(len(train_idx)),
        "test_rows": int(len(test_idx)),
        "hyperparams": asdict(hp),
        "held_out": {"mae": held_out.mae, "mape": held_out.mape,
                     "mse": held_out.mse, "acc": held_out.acc,
                     "r2": held_out.r2, "n": held_out.n,
                     "acc_tolerance": held_out.acc_tolerance,
                     "excluded_zero_targets": held_out.excluded_zero_targets},
        "outputs": ["features.csv", "features.meta.json", "correlations.csv",
                    "model.json", "metrics.csv", "jackknife.csv",
                    "importance.csv", "gini.csv"],
    }
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"pipeline done: acc={held_out.acc:.4f} r2={held_out.r2:.4f} "
          f"-> {out / 'summary.json'}")
    return 0


def _add_common(p, out_dir=True):
    p.add_argument("--config", help="TOML config file; flags override its values")
    p.add_argument("--seed", type=int, help="master seed (fans out per stage)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; outputs do not depend on this")
    if out_dir:
        p.add_argument("--out-dir", default=".", help="directory for output files")


def _add_corpus_inputs(p):
    p.add_argument("--papers", help="papers.jsonl path")
    p.add_argument("--institutions", help="institutions.jsonl path")
    p.add_argument("--gdp", help="gdp.csv path (optional)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="citefactors",
                     description="Scholarly-corpus factor extraction and "
                                 "h-index forecasting toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p)
    for flag, typ in [("--n-authors", int), ("--n-venues", int),
                      ("--n-institutions", int), ("--n-keywords", int),
                      ("--year-start", int), ("--year-end", int),
                      ("--papers-per-author-year", float), ("--team-size", float),
                      ("--pa-strength", float), ("--refs-per-paper", float)]:
        p.add_argument(flag, type=typ)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract the per-author feature matrix")
    _add_common(p)
    _add_corpus_inputs(p)
    p.add_argument("--cutoff-year", type=int)
    p.add_argument("--delta-t", type=int, dest="delta_t")
    p.add_argument("--target-year", type=int)
    p.add_argument("--venue-score", choices=["pagerank", "eq4_sum"])
    p.add_argument("--include-pr-pub", action="store_const", const=True,
                   dest="include_pr_pub")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("correlate", help="per-feature correlation with the target")
    _add_common(p)
    p.add_argument("--features", required=True, help="features.csv path")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("train", help="fit a model, optionally grid-searched")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--learner", choices=sorted(FITTERS))
    p.add_argument("--grid", help="TOML file with a [grid] table of value lists")
    p.add_argument("--k", type=int, default=5, help="cross-validation folds")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model on a features file")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--delta-t", type=int, dest="delta_t")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("jackknife", help="factor-group ablation report")
    _add_common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--learner", choices=sorted(FITTERS))
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_jackknife)

    p = sub.add_parser("importance", help="split-count feature importance")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("gini", help="institution inequality report")
    _add_common(p)
    _add_corpus_inputs(p)
    p.add_argument("--cutoff-year", type=int)
    p.set_defaults(func=cmd_gini)

    p = sub.add_parser("pipeline", help="synth -> features -> train -> reports")
    _add_common(p)
    _add_corpus_inputs(p)
    p.add_argument("--cutoff-year", type=int)
    p.add_argument("--delta-t", type=int, dest="delta_t")
    p.add_argument("--target-year", type=int)
    p.add_argument("--venue-score", choices=["pagerank", "eq4_sum"])
    p.add_argument("--include-pr-pub", action="store_const", const=True,
                   dest="include_pr_pub")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    # force=True rebinds the handler to the current stderr on every
    # invocation, so repeated in-process calls never hold a stale stream
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s: %(message)s", force=True)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_help()
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
