"""Pure mathematical primitives shared across the toolkit.

h-index, Shannon entropy, cosine similarity over sparse term vectors, the
grouped Gini coefficient, and Pearson correlation. Everything here is a pure
function of its arguments; no corpus types leak in.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence

# Sparse bag-of-words vector: token -> positive count.
TermVector = Mapping[str, float]


class UndefinedCorrelationError(ValueError):
    """Correlation requested against a zero-variance series."""


def h_index(citation_counts: Iterable[int]) -> int:
    """Largest h such that at least h of the given counts are >= h.

    An empty sequence has h-index 0.
    """
    ranked = sorted(citation_counts, reverse=True)
    h = 0
    for rank, cites in enumerate(ranked, start=1):
        if cites >= rank:
            h = rank
        else:
            break
    return h


def shannon_entropy(counts: Iterable[float]) -> float:
    """Base-2 entropy of the distribution obtained by normalizing ``counts``.

    Zero counts contribute nothing (0*log0 == 0). Raises ValueError when no
    counts are given, when any count is negative, or when all counts are zero.
    """
    values = [float(c) for c in counts]
    if not values:
        raise ValueError("entropy requires at least one count")
    if any(c < 0 for c in values):
        raise ValueError("entropy counts must be non-negative")
    total = math.fsum(values)
    if total == 0:
        raise ValueError("entropy undefined for all-zero counts")
    acc = 0.0
    for c in values:
        if c > 0:
            p = c / total
            acc -= p * math.log2(p)
    return acc


def term_vector(tokens: Iterable[str]) -> Counter[str]:
    """Token counts for a token sequence (the sparse vector used by cosine)."""
    return Counter(tokens)


def cosine_similarity(a: TermVector, b: TermVector) -> float:
    """Cosine of the angle between two sparse count vectors, in [0, 1].

    Defined as 0 when either vector is empty or has zero norm.
    """
    if not a or not b:
        return 0.0
    norm_a = math.sqrt(math.fsum(v * v for v in a.values()))
    norm_b = math.sqrt(math.fsum(v * v for v in b.values()))
    if norm_a == 0 or norm_b == 0:
        return 0.0
    if len(b) < len(a):
        a, b = b, a
    dot = math.fsum(v * b[k] for k, v in a.items() if k in b)
    return dot / (norm_a * norm_b)


def gini_coefficient(group_values: Iterable[float]) -> float:
    """Grouped Gini coefficient via cumulative (Lorenz) shares.

    Groups are sorted ascending; with P_m the share of the total held by the
    first m groups, the returned value is 1 - (2*sum(P_1..P_{n-1}) + 1)/n.
    Equal groups give exactly 0; an all-zero total is defined as 0.
    """
    values = sorted(float(v) for v in group_values)
    if not values:
        raise ValueError("gini requires at least one group")
    if values[0] < 0:
        raise ValueError("gini values must be non-negative")
    n = len(values)
    total = math.fsum(values)
    if total == 0:
        return 0.0
    running = 0.0
    share_sum = 0.0
    for v in values[:-1]:
        running += v
        share_sum += running / total
    return 1.0 - (2.0 * share_sum + 1.0) / n


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient, cov(X,Y)/(sigma_X*sigma_Y).

    Requires equal lengths >= 2. Raises UndefinedCorrelationError when either
    series has zero variance (reported as absent, never coerced to 0).
    """
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError("pearson requires at least two points")
    n = len(x)
    mean_x = math.fsum(x) / n
    mean_y = math.fsum(y) / n
    sxx = math.fsum((xi - mean_x) ** 2 for xi in x)
    syy = math.fsum((yi - mean_y) ** 2 for yi in y)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("zero-variance series")
    sxy = math.fsum((xi - mean_x) * (yi - mean_y) for xi, yi in zip(x, y))
    return sxy / math.sqrt(sxx * syy)
