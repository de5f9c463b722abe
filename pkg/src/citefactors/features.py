"""Per-author factor extraction: the 35-column feature matrix and targets.

Features fall into five groups (article, venue, author, institution,
temporal). Career statistics run over the author's whole snapshot history;
per-paper article features and venue features are averaged over the author's
papers inside the (cutoff - delta_t, cutoff] activity window.
"""

from __future__ import annotations

import csv
import enum
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .corpus import Corpus, CorpusSnapshot, EmptySnapshotError, PaperRecord
from .graphs import (
    build_citation_graph,
    build_coauthor_graph,
    build_venue_graph,
    pagerank,
)
from .scimetrics import cosine_similarity, gini_coefficient, h_index, shannon_entropy


class FactorGroup(enum.Enum):
    ARTICLE = "Article"
    VENUE = "Venue"
    AUTHOR = "Author"
    INSTITUTION = "Institution"
    TEMPORAL = "Temporal"


_CATALOG: list[tuple[str, FactorGroup]] = [
    ("Cits", FactorGroup.ARTICLE),
    ("Num_pub", FactorGroup.ARTICLE),
    ("Ave_ci", FactorGroup.ARTICLE),
    ("Hi_ci", FactorGroup.ARTICLE),
    ("Lo_ci", FactorGroup.ARTICLE),
    ("ATP", FactorGroup.ARTICLE),
    ("Hi_ci_ref", FactorGroup.ARTICLE),
    ("Ave_ci_ref", FactorGroup.ARTICLE),
    ("Lo_ci_ref", FactorGroup.ARTICLE),
    ("Ave_num_ref", FactorGroup.ARTICLE),
    ("Rel_ref", FactorGroup.ARTICLE),
    ("Sim", FactorGroup.ARTICLE),
    ("PR_v", FactorGroup.VENUE),
    ("Ave_ci_v", FactorGroup.VENUE),
    ("h_v", FactorGroup.VENUE),
    ("h_a", FactorGroup.AUTHOR),
    ("PR_a", FactorGroup.AUTHOR),
    ("AIF", FactorGroup.AUTHOR),
    ("Q", FactorGroup.AUTHOR),
    ("hmax_co", FactorGroup.AUTHOR),
    ("Num_co", FactorGroup.AUTHOR),
    ("have_co", FactorGroup.AUTHOR),
    ("hlo_co", FactorGroup.AUTHOR),
    ("hdif", FactorGroup.AUTHOR),
    ("Div", FactorGroup.AUTHOR),
    ("h_col", FactorGroup.INSTITUTION),
    ("Num_pub_col", FactorGroup.INSTITUTION),
    ("Cits_col", FactorGroup.INSTITUTION),
    ("PR_col", FactorGroup.INSTITUTION),
    ("G_h", FactorGroup.INSTITUTION),
    ("G_cit", FactorGroup.INSTITUTION),
    ("G_pub", FactorGroup.INSTITUTION),
    ("GDP", FactorGroup.INSTITUTION),
    ("Num_years", FactorGroup.TEMPORAL),
    ("Hindex_dif", FactorGroup.TEMPORAL),
]

FEATURE_NAMES = [name for name, _ in _CATALOG]
FEATURE_GROUPS = dict(_CATALOG)
FEATURE_GROUPS["PR_pub"] = FactorGroup.AUTHOR


class FeatureExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    include_pr_pub: bool = False
    venue_score: str = "pagerank"  # or "eq4_sum"

    def __post_init__(self):
        if self.venue_score not in ("pagerank", "eq4_sum"):
            raise ValueError(f"unknown venue_score mode {self.venue_score!r}")


@dataclass
class FeatureMatrix:
    authors: list[str]
    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    cutoff_year: int | None = None
    delta_t: int | None = None
    target_year: int | None = None
    warnings: dict[str, int] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]

    def group_columns(self, group: FactorGroup) -> list[int]:
        return [i for i, n in enumerate(self.feature_names)
                if FEATURE_GROUPS[n] is group]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["author_id", *self.feature_names, "target"])
            for i, author in enumerate(self.authors):
                row = [author]
                row.extend(f"{v:.10g}" for v in self.X[i])
                row.append(f"{self.y[i]:.10g}")
                writer.writerow(row)

    @classmethod
    def read_csv(cls, path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[0] != "author_id" or header[-1] != "target":
                raise FeatureExtractionError(
                    f"{path}: expected author_id,<features>,target header")
            names = header[1:-1]
            unknown = [n for n in names if n not in FEATURE_GROUPS]
            if unknown:
                raise FeatureExtractionError(f"{path}: unknown feature columns {unknown}")
            authors, rows, targets = [], [], []
            for row in reader:
                authors.append(row[0])
                rows.append([float(v) for v in row[1:-1]])
                targets.append(float(row[-1]))
        return cls(authors=authors, feature_names=names,
                   X=np.asarray(rows, dtype=float),
                   y=np.asarray(targets, dtype=float))


def _record(paper, snapshot) -> PaperRecord:
    if isinstance(paper, PaperRecord):
        return paper
    return snapshot.papers[paper]


class _SnapshotIndex:
    """Lazily built caches shared by the per-paper and per-author features."""

    def __init__(self, snapshot: CorpusSnapshot):
        self.snapshot = snapshot
        papers = snapshot.papers
        self.cit = {pid: snapshot.citation_count(pid) for pid in papers}

        self.distinct_kw: dict[str, frozenset] = {}
        self.kw_counter: dict[str, Counter] = {}
        self.text_vec: dict[str, Counter] = {}
        num_w: Counter = Counter()
        for pid, p in papers.items():
            toks = p.keyword_tokens()
            distinct = frozenset(toks)
            self.distinct_kw[pid] = distinct
            self.kw_counter[pid] = Counter(toks)
            self.text_vec[pid] = Counter(p.text_tokens())
            num_w.update(distinct)
        self.num_w = num_w
        self.total_kw = sum(num_w.values())

        self.author_cits = {a: sum(self.cit[p] for p in pids)
                            for a, pids in snapshot.author_papers.items()}
        self.h_map = {a: h_index(self.cit[p] for p in pids)
                      for a, pids in snapshot.author_papers.items()}

        if papers:
            log_mean = math.fsum(math.log(self.cit[pid] + 1) for pid in papers) / len(papers)
            self.mu_p = math.exp(log_mean)
        else:
            self.mu_p = 0.0

        self._author_kw: dict[str, Counter] = {}
        self._coauthors: dict[str, list[str]] = {}

    def author_keywords(self, author: str) -> Counter:
        got = self._author_kw.get(author)
        if got is None:
            got = Counter()
            for pid in self.snapshot.author_papers[author]:
                got.update(self.kw_counter[pid])
            self._author_kw[author] = got
        return got

    def coauthors(self, author: str) -> list[str]:
        got = self._coauthors.get(author)
        if got is None:
            seen = set()
            for pid in self.snapshot.author_papers[author]:
                seen.update(self.snapshot.papers[pid].author_ids)
            seen.discard(author)
            got = sorted(seen)
            self._coauthors[author] = got
        return got


def _index(snapshot: CorpusSnapshot) -> _SnapshotIndex:
    idx = getattr(snapshot, "_feature_index", None)
    if idx is None:
        idx = _SnapshotIndex(snapshot)
        snapshot._feature_index = idx
    return idx


def mu_p(snapshot: CorpusSnapshot) -> float:
    """Corpus baseline for Q: exp of the mean log(citations + 1)."""
    return _index(snapshot).mu_p


def atp(paper, snapshot: CorpusSnapshot) -> float:
    """Topic popularity: share of snapshot keyword occurrences captured by
    the paper's distinct keywords. A paper counts each of its distinct
    keyword tokens once."""
    idx = _index(snapshot)
    rec = _record(paper, snapshot)
    distinct = idx.distinct_kw[rec.id]
    if not distinct or idx.total_kw == 0:
        return 0.0
    return sum(idx.num_w[w] for w in distinct) / idx.total_kw


def reference_relevance(paper, snapshot: CorpusSnapshot) -> float:
    """Mean entropy of the combined keyword multiset of the paper and each
    in-snapshot reference; 0 without resolvable references."""
    idx = _index(snapshot)
    rec = _record(paper, snapshot)
    refs = snapshot.in_snapshot_references(rec.id)
    if not refs:
        return 0.0
    own = idx.kw_counter[rec.id]
    acc = 0.0
    for ref in refs:
        combined = own + idx.kw_counter[ref]
        if combined:
            acc += shannon_entropy(combined.values())
    return acc / len(refs)


def title_keyword_similarity(paper, snapshot: CorpusSnapshot) -> float:
    """Mean cosine between the paper's title+keyword vector and each
    in-snapshot reference's vector; 0 without references."""
    idx = _index(snapshot)
    rec = _record(paper, snapshot)
    refs = snapshot.in_snapshot_references(rec.id)
    if not refs:
        return 0.0
    own = idx.text_vec[rec.id]
    return math.fsum(cosine_similarity(own, idx.text_vec[r]) for r in refs) / len(refs)


def aif(author: str, snapshot: CorpusSnapshot, year: int, delta_t: int) -> float:
    """Citations received during `year` by the author's papers published in
    [year - delta_t, year - 1], per such paper; 0 without window papers."""
    if year > snapshot.cutoff_year:
        raise ValueError(f"year {year} exceeds snapshot cutoff {snapshot.cutoff_year}")
    window = [pid for pid in snapshot.author_papers.get(author, ())
              if year - delta_t <= snapshot.papers[pid].year <= year - 1]
    if not window:
        return 0.0
    received = sum(1 for pid in window
                   for citing in snapshot.citing_papers(pid)
                   if snapshot.papers[citing].year == year)
    return received / len(window)


def q_value(author: str, snapshot: CorpusSnapshot, mu_p: float) -> float:
    """exp(mean log(c+1)) over the author's papers, minus the corpus baseline."""
    pids = snapshot.author_papers.get(author)
    if not pids:
        raise KeyError(f"author {author!r} has no papers in snapshot")
    idx = _index(snapshot)
    log_mean = math.fsum(math.log(idx.cit[p] + 1) for p in pids) / len(pids)
    return math.exp(log_mean) - mu_p


class CoauthorStats(NamedTuple):
    hmax_co: float
    have_co: float
    hlo_co: float
    hdif: float
    Num_co: float
    Div: float


def coauthor_stats(author: str, snapshot: CorpusSnapshot,
                   h_map: dict[str, int]) -> CoauthorStats:
    """Statistics over the author's distinct coauthors; all zero when the
    author always publishes alone.

    Div adds the entropy of coauthor institution ids to the entropy of the
    combined keyword tokens of the coauthors' papers.
    """
    idx = _index(snapshot)
    co = idx.coauthors(author)
    if not co:
        return CoauthorStats(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    hs = [h_map[c] for c in co]
    hmax = max(hs)
    have = sum(hs) / len(hs)
    hlo = min(hs)
    hdif = hmax - h_map[author]

    inst_counts = Counter(snapshot.affiliation[c] for c in co
                          if snapshot.affiliation.get(c) is not None)
    div = shannon_entropy(inst_counts.values()) if inst_counts else 0.0
    kw = Counter()
    for c in co:
        kw.update(idx.author_keywords(c))
    if kw:
        div += shannon_entropy(kw.values())
    return CoauthorStats(float(hmax), have, float(hlo), float(hdif),
                         float(len(co)), div)


class InstitutionFeatures(NamedTuple):
    h_col: float
    Num_pub_col: float
    Cits_col: float
    PR_col: float
    G_h: float
    G_cit: float
    G_pub: float
    GDP: float
    resolved: bool


def institution_features(author: str, snapshot: CorpusSnapshot,
                         pr_author_map: dict[str, float],
                         gdp: dict[str, float]) -> InstitutionFeatures:
    """Colleague means (self excluded) and within-institution Ginis.

    Unresolved affiliation yields eight zeros with resolved=False; a missing
    GDP entry yields GDP=0.
    """
    idx = _index(snapshot)
    inst = snapshot.affiliation.get(author)
    if inst is None:
        return InstitutionFeatures(0, 0, 0, 0, 0, 0, 0, 0, resolved=False)
    members = snapshot.institution_authors[inst]
    colleagues = [m for m in members if m != author]
    if colleagues:
        k = len(colleagues)
        h_col = sum(idx.h_map[m] for m in colleagues) / k
        pub_col = sum(len(snapshot.author_papers[m]) for m in colleagues) / k
        cit_col = sum(idx.author_cits[m] for m in colleagues) / k
        pr_col = sum(pr_author_map.get(m, 0.0) for m in colleagues) / k
    else:
        h_col = pub_col = cit_col = pr_col = 0.0
    g_h = gini_coefficient(idx.h_map[m] for m in members)
    g_cit = gini_coefficient(idx.author_cits[m] for m in members)
    g_pub = gini_coefficient(len(snapshot.author_papers[m]) for m in members)

    rec = snapshot.corpus.institutions.get(inst)
    gdp_value = gdp.get(rec.country, 0.0) if rec else 0.0
    return InstitutionFeatures(h_col, pub_col, cit_col, pr_col,
                               g_h, g_cit, g_pub, gdp_value, resolved=True)


def temporal_features(author: str, corpus: Corpus, cutoff_year: int,
                      delta_t: int) -> tuple[float, float]:
    """(years since first publication, h-index gain over the last delta_t years)."""
    snap = corpus.snapshot(cutoff_year)
    pids = snap.author_papers.get(author)
    if not pids:
        raise KeyError(f"author {author!r} has no papers at cutoff {cutoff_year}")
    first = min(snap.papers[p].year for p in pids)
    h_now = snap.author_h_index(author)
    try:
        prev = corpus.snapshot(cutoff_year - delta_t)
        h_then = prev.author_h_index(author)
    except EmptySnapshotError:
        h_then = 0
    return float(cutoff_year - first), float(h_now - h_then)


def venue_citation_totals(snapshot: CorpusSnapshot) -> dict[str, float]:
    """Total in-snapshot citations per venue (the literal summed-citations
    reading of the venue score; the default venue score is PageRank)."""
    idx = _index(snapshot)
    return {venue: float(sum(idx.cit[p] for p in pids))
            for venue, pids in snapshot.venue_papers.items()}


def extract_matrix(corpus: Corpus, cutoff_year: int, delta_t: int,
                   target_year: int, config: FeatureConfig | None = None,
                   threads: int = 1) -> FeatureMatrix:
    """One row per author active in (cutoff - delta_t, cutoff]; the target is
    that author's h-index at target_year. Rows are sorted by author id and
    the result is bit-identical across runs and thread counts."""
    if config is None:
        config = FeatureConfig()
    if delta_t <= 0:
        raise ValueError("delta_t must be positive")
    if not cutoff_year < target_year:
        raise ValueError(
            f"cutoff year {cutoff_year} must precede target year {target_year}")
    if target_year > corpus.max_year:
        raise ValueError(
            f"target year {target_year} exceeds corpus max year {corpus.max_year}")

    snap = corpus.snapshot(cutoff_year)
    idx = _index(snap)
    target_snap = corpus.snapshot(target_year)
    try:
        prev_snap = corpus.snapshot(cutoff_year - delta_t)
    except EmptySnapshotError:
        prev_snap = None

    active = [a for a, pids in snap.author_papers.items()
              if any(cutoff_year - delta_t < snap.papers[p].year <= cutoff_year
                     for p in pids)]
    active.sort()
    if not active:
        raise FeatureExtractionError(
            f"no authors active in ({cutoff_year - delta_t}, {cutoff_year}]")

    pr_author = pagerank(build_coauthor_graph(snap)).scores
    if config.venue_score == "pagerank":
        venue_score = pagerank(build_venue_graph(snap)).scores
    else:
        venue_score = venue_citation_totals(snap)
    venue_ave_ci = {}
    venue_h = {}
    for venue, pids in snap.venue_papers.items():
        counts = [idx.cit[p] for p in pids]
        venue_ave_ci[venue] = sum(counts) / len(counts)
        venue_h[venue] = float(h_index(counts))
    pr_paper = None
    if config.include_pr_pub:
        pr_paper = pagerank(build_citation_graph(snap)).scores

    warnings = Counter()
    for a in active:
        inst_id = snap.affiliation[a]
        if inst_id is None:
            warnings["unresolved_institution"] += 1
        else:
            rec = corpus.institutions.get(inst_id)
            if rec is None or rec.country not in corpus.gdp:
                warnings["missing_gdp"] += 1

    names = list(FEATURE_NAMES)
    if config.include_pr_pub:
        names.append("PR_pub")

    # per-paper article features, computed once per window paper
    paper_cache: dict[str, tuple] = {}

    def paper_features(pid: str) -> tuple:
        got = paper_cache.get(pid)
        if got is None:
            refs = snap.in_snapshot_references(pid)
            if refs:
                ref_cits = [idx.cit[r] for r in refs]
                ref_stats = (float(max(ref_cits)),
                             sum(ref_cits) / len(ref_cits),
                             float(min(ref_cits)),
                             float(len(refs)))
            else:
                ref_stats = (0.0, 0.0, 0.0, 0.0)
            got = (atp(pid, snap), *ref_stats,
                   reference_relevance(pid, snap),
                   title_keyword_similarity(pid, snap))
            paper_cache[pid] = got
        return got

    def build_row(author: str) -> list[float]:
        pids = snap.author_papers[author]
        window = [p for p in pids
                  if cutoff_year - delta_t < snap.papers[p].year <= cutoff_year]
        cits = [idx.cit[p] for p in pids]
        total = idx.author_cits[author]
        n_pub = len(pids)

        per_paper = [paper_features(p) for p in window]
        nw = len(window)
        atp_m, hi_ref, ave_ref, lo_ref, num_ref, rel_ref, sim = (
            sum(pf[j] for pf in per_paper) / nw for j in range(7))

        venues = [snap.papers[p].venue for p in window]
        pr_v = sum(venue_score[v] for v in venues) / nw
        ave_ci_v = sum(venue_ave_ci[v] for v in venues) / nw
        h_v = sum(venue_h[v] for v in venues) / nw

        h_a = idx.h_map[author]
        co = coauthor_stats(author, snap, idx.h_map)
        inst = institution_features(author, snap, pr_author, corpus.gdp)

        first = min(snap.papers[p].year for p in pids)
        h_then = prev_snap.author_h_index(author) if prev_snap is not None else 0

        row = [
            float(total), float(n_pub), total / n_pub,
            float(max(cits)), float(min(cits)),
            atp_m, hi_ref, ave_ref, lo_ref, num_ref, rel_ref, sim,
            pr_v, ave_ci_v, h_v,
            float(h_a), pr_author.get(author, 0.0),
            aif(author, snap, cutoff_year, delta_t),
            q_value(author, snap, idx.mu_p),
            co.hmax_co, co.Num_co, co.have_co, co.hlo_co, co.hdif, co.Div,
            inst.h_col, inst.Num_pub_col, inst.Cits_col, inst.PR_col,
            inst.G_h, inst.G_cit, inst.G_pub, inst.GDP,
            float(cutoff_year - first), float(h_a - h_then),
        ]
        if pr_paper is not None:
            row.append(math.fsum(pr_paper[p] for p in pids))
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(build_row, active))
    else:
        rows = [build_row(a) for a in active]

    X = np.asarray(rows, dtype=float)
    if not np.isfinite(X).all():
        raise FeatureExtractionError("non-finite feature value produced")
    y = np.asarray([float(target_snap.author_h_index(a)) for a in active])
    return FeatureMatrix(authors=active, feature_names=names, X=X, y=y,
                         cutoff_year=cutoff_year, delta_t=delta_t,
                         target_year=target_year, warnings=dict(warnings))
