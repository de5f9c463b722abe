"""Corpus loading, validation, and temporal slicing.

Input files are papers.jsonl, institutions.jsonl, and an optional gdp.csv.
Everything downstream reads through CorpusSnapshot, which restricts both the
paper set and the citation edges to a cutoff year.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[0-9a-z]+")


class CorpusFormatError(ValueError):
    """Malformed or inconsistent corpus input."""


class EmptySnapshotError(ValueError):
    """Cutoff year precedes every paper in the corpus."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class PaperRecord:
    id: str
    title: str
    year: int
    venue: str
    keywords: tuple[str, ...]
    # ordered (author_id, institution_id-or-None) pairs
    authorships: tuple[tuple[str, str | None], ...]
    references: tuple[str, ...]

    @property
    def author_ids(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.authorships)

    def keyword_tokens(self) -> list[str]:
        toks = []
        for kw in self.keywords:
            toks.extend(tokenize(kw))
        return toks

    def text_tokens(self) -> list[str]:
        """Title plus keyword tokens, the unit of the similarity features."""
        return tokenize(self.title) + self.keyword_tokens()


@dataclass(frozen=True)
class InstitutionRecord:
    id: str
    name: str
    country: str
    unresolved: bool = False


_PAPER_FIELDS = ("id", "title", "year", "venue", "keywords", "authors", "references")


def _parse_paper(obj, lineno: int) -> PaperRecord:
    for f in _PAPER_FIELDS:
        if f not in obj:
            raise CorpusFormatError(f"papers.jsonl line {lineno}: missing field {f!r}")
    if not isinstance(obj["year"], int):
        raise CorpusFormatError(f"papers.jsonl line {lineno}: year must be an integer")
    if not obj["authors"]:
        raise CorpusFormatError(f"papers.jsonl line {lineno}: empty author list")
    authorships = []
    for a in obj["authors"]:
        if "id" not in a:
            raise CorpusFormatError(f"papers.jsonl line {lineno}: author without id")
        authorships.append((str(a["id"]), a.get("institution") or None))
    return PaperRecord(
        id=str(obj["id"]),
        title=str(obj["title"]),
        year=obj["year"],
        venue=str(obj["venue"]),
        keywords=tuple(str(k) for k in obj["keywords"]),
        authorships=tuple(authorships),
        references=tuple(str(r) for r in obj["references"]),
    )


@dataclass
class Corpus:
    papers: dict[str, PaperRecord]
    institutions: dict[str, InstitutionRecord]
    gdp: dict[str, float]
    dropped_references: int = 0
    dropped_self_references: int = 0
    venues: set[str] = field(default_factory=set)

    @property
    def min_year(self) -> int:
        return min(p.year for p in self.papers.values())

    @property
    def max_year(self) -> int:
        return max(p.year for p in self.papers.values())

    def snapshot(self, cutoff_year: int) -> "CorpusSnapshot":
        return CorpusSnapshot(self, cutoff_year)


def load_corpus(paper_path, institution_path, gdp_path=None) -> Corpus:
    """Load and cross-validate the three corpus files.

    Dangling references (to ids not present in papers.jsonl) and
    self-references are dropped with counted warnings; duplicated entries in a
    reference list collapse silently. Duplicate paper or institution ids and
    malformed lines are errors.
    """
    raw: dict[str, PaperRecord] = {}
    with open(paper_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(
                    f"papers.jsonl line {lineno}: invalid JSON ({exc.msg})") from exc
            rec = _parse_paper(obj, lineno)
            if rec.id in raw:
                raise CorpusFormatError(
                    f"papers.jsonl line {lineno}: duplicate paper id {rec.id!r}")
            raw[rec.id] = rec

    institutions: dict[str, InstitutionRecord] = {}
    with open(institution_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(
                    f"institutions.jsonl line {lineno}: invalid JSON ({exc.msg})") from exc
            for f in ("id", "name", "country"):
                if f not in obj:
                    raise CorpusFormatError(
                        f"institutions.jsonl line {lineno}: missing field {f!r}")
            iid = str(obj["id"])
            if iid in institutions:
                raise CorpusFormatError(
                    f"institutions.jsonl line {lineno}: duplicate institution id {iid!r}")
            institutions[iid] = InstitutionRecord(iid, str(obj["name"]), str(obj["country"]))

    gdp: dict[str, float] = {}
    if gdp_path is not None:
        with open(gdp_path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["country", "gdp"]:
                raise CorpusFormatError(
                    f"gdp.csv: expected header 'country,gdp', got {reader.fieldnames}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    value = float(row["gdp"])
                except (TypeError, ValueError):
                    raise CorpusFormatError(
                        f"gdp.csv line {lineno}: non-numeric gdp value") from None
                if value <= 0:
                    raise CorpusFormatError(
                        f"gdp.csv line {lineno}: gdp must be positive")
                gdp[row["country"]] = value

    # resolve references: drop self-references and dangling targets
    papers: dict[str, PaperRecord] = {}
    dangling = 0
    selfrefs = 0
    venues: set[str] = set()
    for rec in raw.values():
        seen = []
        for ref in dict.fromkeys(rec.references):
            if ref == rec.id:
                selfrefs += 1
            elif ref not in raw:
                dangling += 1
            else:
                seen.append(ref)
        papers[rec.id] = PaperRecord(
            rec.id, rec.title, rec.year, rec.venue, rec.keywords,
            rec.authorships, tuple(seen))
        venues.add(rec.venue)
        for _, inst in rec.authorships:
            if inst is not None and inst not in institutions:
                institutions[inst] = InstitutionRecord(inst, inst, "", unresolved=True)

    if dangling:
        log.warning("dropped %d dangling reference(s)", dangling)
    if selfrefs:
        log.warning("dropped %d self-reference(s)", selfrefs)

    return Corpus(papers=papers, institutions=institutions, gdp=gdp,
                  dropped_references=dangling, dropped_self_references=selfrefs,
                  venues=venues)


class CorpusSnapshot:
    """The corpus restricted to papers (and citation edges) dated <= cutoff.

    Immutable after construction; indexes are plain dicts with sorted,
    deterministic contents.
    """

    def __init__(self, corpus: Corpus, cutoff_year: int):
        papers = {pid: p for pid, p in corpus.papers.items() if p.year <= cutoff_year}
        if not papers:
            raise EmptySnapshotError(
                f"no papers at or before cutoff year {cutoff_year}")
        self.corpus = corpus
        self.cutoff_year = cutoff_year
        self.papers = papers

        author_papers: dict[str, list[str]] = {}
        venue_papers: dict[str, list[str]] = {}
        citing: dict[str, list[str]] = {pid: [] for pid in papers}
        for pid in sorted(papers):
            p = papers[pid]
            for aid in dict.fromkeys(p.author_ids):
                author_papers.setdefault(aid, []).append(pid)
            venue_papers.setdefault(p.venue, []).append(pid)
            for ref in p.references:
                if ref in papers:
                    citing[ref].append(pid)
        self.author_papers = author_papers
        self.venue_papers = venue_papers
        self._citing = citing

        # affiliation at the snapshot: institution on the latest paper,
        # year ties broken toward the greatest paper id
        affiliation: dict[str, str | None] = {}
        for aid, pids in author_papers.items():
            best = max(pids, key=lambda pid: (papers[pid].year, pid))
            inst = dict(papers[best].authorships).get(aid)
            affiliation[aid] = inst
        self.affiliation = affiliation

        institution_authors: dict[str, list[str]] = {}
        for aid in sorted(affiliation):
            inst = affiliation[aid]
            if inst is not None:
                institution_authors.setdefault(inst, []).append(aid)
        self.institution_authors = institution_authors

    def authors(self) -> list[str]:
        return sorted(self.author_papers)

    def citing_papers(self, paper_id: str) -> list[str]:
        if paper_id not in self.papers:
            raise KeyError(f"paper {paper_id!r} not in snapshot")
        return self._citing[paper_id]

    def citation_count(self, paper_id: str) -> int:
        return len(self.citing_papers(paper_id))

    def in_snapshot_references(self, paper_id: str) -> list[str]:
        return [r for r in self.papers[paper_id].references if r in self.papers]

    def author_h_index(self, author_id: str) -> int:
        from .scimetrics import h_index
        pids = self.author_papers.get(author_id, ())
        return h_index(len(self._citing[p]) for p in pids)
