import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def paper(pid, year, authors, references=(), title="paper", venue="v1",
          keywords=("topic",), institution="i1"):
    """Shorthand paper record; authors may be bare ids or (id, institution)."""
    entries = []
    for a in authors:
        if isinstance(a, tuple):
            aid, inst = a
        else:
            aid, inst = a, institution
        entries.append({"id": aid, "name": aid.upper(), "institution": inst})
    return {
        "id": pid,
        "title": title,
        "year": year,
        "venue": venue,
        "keywords": list(keywords),
        "authors": entries,
        "references": list(references),
    }


@pytest.fixture
def corpus_dir(tmp_path):
    """Write a small but fully featured corpus to disk and return its dir.

    Two institutions across two countries, three venues, a citation chain
    long enough to give distinct h-indexes.
    """
    papers = [
        paper("p1", 2000, [("a1", "i1"), ("a2", "i2")], title="graph mining intro",
              keywords=("graphs", "mining"), venue="v1"),
        paper("p2", 2001, [("a1", "i1")], references=["p1"],
              title="mining at scale", keywords=("mining", "scale"), venue="v2"),
        paper("p3", 2002, [("a2", "i2"), ("a3", "i2")], references=["p1", "p2"],
              title="graph systems", keywords=("graphs", "systems"), venue="v1"),
        paper("p4", 2003, [("a1", "i1"), ("a3", "i2")], references=["p2", "p3"],
              title="scale systems", keywords=("scale", "systems"), venue="v3"),
        paper("p5", 2004, [("a3", "i2")], references=["p1", "p3", "p4"],
              title="survey of graphs", keywords=("graphs", "survey"), venue="v1"),
    ]
    write_jsonl(tmp_path / "papers.jsonl", papers)
    write_jsonl(tmp_path / "institutions.jsonl", [
        {"id": "i1", "name": "Inst One", "country": "US"},
        {"id": "i2", "name": "Inst Two", "country": "CN"},
    ])
    (tmp_path / "gdp.csv").write_text(
        "country,gdp\nUS,21.4\nCN,14.3\n")
    return tmp_path
