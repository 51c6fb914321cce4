import unittest
import math
from fractions import Fraction
from itertools import combinations, permutations
import numpy as np
from wearable_graph_project.core.errors import ArgumentError
from wearable_graph_project.core.stats_kernel import (
    FISHER_EPSILON, fisher_z, inv_fisher_z, kendall_tau, logit, mutual_information, spearman, squash,
)


def _pearson_exact(x, y) -> float:
    """Rank-then-Pearson in rational arithmetic for two permutations of 1..n."""
    n = len(x)
    mean = Fraction(n + 1, 2)
    cov = sum((Fraction(a) - mean) * (Fraction(b) - mean) for a, b in zip(x, y))
    var = sum((Fraction(a) - mean) ** 2 for a in x)  # equal for both sides of a permutation pair
    return float(cov / var)


def _kendall_b_bruteforce(x, y) -> float:
    concordant = discordant = tied_x = tied_y = 0
    for i, j in combinations(range(len(x)), 2):
        dx, dy = x[i] - x[j], y[i] - y[j]
        if dx == 0:
            tied_x += 1
        if dy == 0:
            tied_y += 1
        if dx == 0 or dy == 0:
            continue
        if dx * dy > 0:
            concordant += 1
        else:
            discordant += 1
    pairs = len(x) * (len(x) - 1) // 2
    if pairs - tied_x == 0 or pairs - tied_y == 0:
        return 0.0
    return (concordant - discordant) / math.sqrt((pairs - tied_x) * (pairs - tied_y))


class TestSpearman(unittest.TestCase):
    def test_matches_rank_then_pearson_on_all_small_permutations(self):
        for n in range(2, 5):
            perms = list(permutations(range(1, n + 1)))
            for x in perms:
                for y in perms:
                    est = spearman(list(zip(x, y)), min_samples=2)
                    self.assertTrue(est.valid)
                    self.assertEqual(est.r, _pearson_exact(x, y))

    def test_matches_oracle_for_length_five_and_six(self):
        for n in (5, 6):
            identity = tuple(range(1, n + 1))
            reversed_ = tuple(reversed(identity))
            for x in (identity, reversed_):
                for y in permutations(identity):
                    est = spearman(list(zip(x, y)), min_samples=2)
                    self.assertEqual(est.r, _pearson_exact(x, y))

    def test_ties_use_average_ranks(self):
        pairs = [(1, 1), (2, 2), (2, 3), (3, 4)]
        est = spearman(pairs, min_samples=2)
        # ranks x = [1, 2.5, 2.5, 4], y = [1, 2, 3, 4]
        self.assertAlmostEqual(est.r, 4.5 / math.sqrt(4.5 * 5.0), places=12)

    def test_too_few_samples_is_invalid(self):
        pairs = [(float(i), float(i)) for i in range(9)]
        est = spearman(pairs, min_samples=10)
        self.assertFalse(est.valid)
        self.assertIsNone(est.r)
        self.assertEqual(est.n, 9)

    def test_constant_side_is_invalid(self):
        pairs = [(float(i), 3.0) for i in range(20)]
        self.assertFalse(spearman(pairs).valid)

    def test_perfect_negative(self):
        pairs = [(float(i), float(-i)) for i in range(12)]
        self.assertEqual(spearman(pairs).r, -1.0)


class TestKendallTau(unittest.TestCase):
    def test_matches_bruteforce_on_random_vectors(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            n = int(rng.integers(2, 9))
            x = rng.integers(0, 5, n).tolist()
            y = rng.integers(0, 5, n).tolist()
            self.assertAlmostEqual(kendall_tau(x, y), _kendall_b_bruteforce(x, y), places=12)

    def test_mappings_are_aligned_by_key(self):
        a = {"x": 1.0, "y": 2.0, "z": 3.0}
        b = {"z": 30.0, "x": 10.0, "y": 20.0}
        self.assertEqual(kendall_tau(a, b), 1.0)

    def test_reversed_is_minus_one(self):
        self.assertEqual(kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]), -1.0)

    def test_all_tied_side_returns_zero(self):
        self.assertEqual(kendall_tau([1, 1, 1], [1, 2, 3]), 0.0)

    def test_mismatched_inputs(self):
        with self.assertRaises(ArgumentError):
            kendall_tau([1, 2], [1, 2, 3])
        with self.assertRaises(ArgumentError):
            kendall_tau({"a": 1, "b": 2}, {"a": 1, "c": 2})
        with self.assertRaises(ArgumentError):
            kendall_tau([1], [1])


class TestFisherAndSquash(unittest.TestCase):
    def test_round_trip_grid(self):
        for r in np.linspace(-1 + 1e-6, 1 - 1e-6, 10001):
            self.assertLessEqual(abs(inv_fisher_z(fisher_z(float(r))) - r), 1e-12)

    def test_clamps_at_one(self):
        self.assertEqual(fisher_z(1.0), float(np.arctanh(1 - FISHER_EPSILON)))
        self.assertEqual(fisher_z(-1.0), -float(np.arctanh(1 - FISHER_EPSILON)))

    def test_rejects_non_finite(self):
        with self.assertRaises(ArgumentError):
            fisher_z(float("nan"))

    def test_squash_and_logit(self):
        self.assertEqual(squash(0.0, 0.9), 0.5)
        self.assertAlmostEqual(squash(logit(0.7) / 0.9, 0.9), 0.7, places=12)
        with self.assertRaises(ArgumentError):
            squash(1.0, 0.0)
        with self.assertRaises(ArgumentError):
            logit(1.0)


class TestMutualInformation(unittest.TestCase):
    def test_identical_binary_metrics(self):
        x = [0.0, 1.0] * 10
        self.assertAlmostEqual(mutual_information(x, x, bins=2), math.log(2), places=12)

    def test_constant_input_is_zero(self):
        self.assertEqual(mutual_information([1.0] * 12, list(range(12)), bins=4), 0.0)

    def test_non_negative(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=200)
        y = rng.normal(size=200)
        self.assertGreaterEqual(mutual_information(x, y), 0.0)

    def test_bad_arguments(self):
        with self.assertRaises(ArgumentError):
            mutual_information([1.0, 2.0], [1.0])
        with self.assertRaises(ArgumentError):
            mutual_information([1.0, 2.0], [1.0, 2.0], bins=1)

if __name__ == "__main__":
    unittest.main()
