import math
import random
from collections import Counter

import pytest

from citefactors.scimetrics import (
    UndefinedCorrelationError,
    cosine_similarity,
    gini_coefficient,
    h_index,
    pearson,
    shannon_entropy,
    term_vector,
)

import oracles


class TestHIndex:
    def test_worked_example(self):
        assert h_index([10, 8, 5, 4, 3]) == 4

    def test_empty(self):
        assert h_index([]) == 0

    def test_all_zero(self):
        assert h_index([0, 0, 0]) == 0

    def test_single_cited_paper(self):
        assert h_index([100]) == 1

    def test_uniform(self):
        assert h_index([3, 3, 3]) == 3

    def test_matches_scan_oracle(self):
        rng = random.Random(101)
        for _ in range(1000):
            counts = [rng.randint(0, 50) for _ in range(rng.randint(0, 40))]
            assert h_index(counts) == oracles.h_index_scan(counts)


class TestEntropy:
    def test_uniform_two(self):
        assert shannon_entropy([1, 1]) == pytest.approx(1.0, abs=1e-12)

    def test_skewed(self):
        # {3, 1} -> 0.75*log2(4/3) + 0.25*log2(4)
        expect = 0.75 * math.log2(4 / 3) + 0.25 * 2
        assert shannon_entropy([3, 1]) == pytest.approx(expect, abs=1e-12)

    def test_degenerate(self):
        assert shannon_entropy([5]) == 0.0

    def test_zero_counts_ignored(self):
        assert shannon_entropy([2, 0, 2]) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            shannon_entropy([])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            shannon_entropy([1, -1])

    def test_rejects_all_zero(self):
        with pytest.raises(ValueError):
            shannon_entropy([0, 0])

    def test_matches_direct_oracle(self):
        rng = random.Random(202)
        for _ in range(1000):
            counts = [rng.randint(0, 9) for _ in range(rng.randint(1, 12))]
            if sum(counts) == 0:
                counts[0] = 1
            got = shannon_entropy(counts)
            assert got == pytest.approx(oracles.entropy_direct(counts), abs=1e-9)


class TestCosine:
    def test_identical(self):
        v = term_vector(["a", "b", "b"])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity(Counter(a=1), Counter(b=1)) == 0.0

    def test_worked_example(self):
        # {a:1, b:1} vs {b:2, c:1} -> 2/(sqrt(2)*sqrt(5))
        got = cosine_similarity(Counter(a=1, b=1), Counter(b=2, c=1))
        assert got == pytest.approx(2 / (math.sqrt(2) * math.sqrt(5)), abs=1e-12)

    def test_empty_is_zero(self):
        assert cosine_similarity(Counter(), Counter(a=1)) == 0.0

    def test_matches_direct_oracle(self):
        rng = random.Random(303)
        alphabet = [f"w{i}" for i in range(15)]
        for _ in range(1000):
            a = Counter(rng.choices(alphabet, k=rng.randint(0, 20)))
            b = Counter(rng.choices(alphabet, k=rng.randint(0, 20)))
            got = cosine_similarity(a, b)
            assert got == pytest.approx(oracles.cosine_direct(a, b), abs=1e-9)


class TestGini:
    def test_perfect_equality(self):
        assert gini_coefficient([1, 1, 1, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_two_group_extreme(self):
        assert gini_coefficient([0, 10]) == pytest.approx(0.5, abs=1e-12)

    def test_linear_ramp(self):
        assert gini_coefficient([1, 2, 3, 4]) == pytest.approx(0.25, abs=1e-12)

    def test_order_invariant(self):
        assert gini_coefficient([4, 1, 3, 2]) == gini_coefficient([1, 2, 3, 4])

    def test_all_zero_defined_as_zero(self):
        assert gini_coefficient([0, 0, 0]) == 0.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            gini_coefficient([])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            gini_coefficient([1, -2])

    def test_matches_pairwise_oracle(self):
        rng = random.Random(404)
        for _ in range(1000):
            values = [rng.uniform(0, 100) for _ in range(rng.randint(1, 25))]
            got = gini_coefficient(values)
            assert got == pytest.approx(oracles.gini_pairwise(values), abs=1e-9)


class TestPearson:
    def test_worked_example(self):
        assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9820, abs=1e-4)

    def test_perfect_linear(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)

    def test_perfect_inverse(self):
        assert pearson([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0, abs=1e-12)

    def test_zero_variance_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(ValueError):
            pearson([1], [2])

    def test_matches_statistics_oracle(self):
        rng = random.Random(505)
        for _ in range(1000):
            n = rng.randint(2, 30)
            x = [rng.uniform(-10, 10) for _ in range(n)]
            y = [rng.uniform(-10, 10) for _ in range(n)]
            if len(set(x)) == 1 or len(set(y)) == 1:
                continue
            assert pearson(x, y) == pytest.approx(oracles.pearson_stats(x, y), abs=1e-9)
