import unittest
import math
import numpy as np
from wearable_graph_project.core.calibration import (
    CURVE_COLUMNS, calibrate_from_evidence, curves_to_csv, default_alpha_grid, find_intersection, parse_grid,
    tau_curves, tau_curves_from_evidence,
)
from wearable_graph_project.core.errors import ArgumentError, InsufficientDataError
from wearable_graph_project.core.global_weights import NodeEvidence
from wearable_graph_project.core.state import HbmConfig, Observation, TauCurve, ValueKind
from wearable_graph_project.core.stats_kernel import logit
from wearable_graph_project.core.graph_store import init_general_graph
from wearable_graph_project.core.synthetic import generate_synthetic_cohort, synthetic_metric_records
from wearable_graph_project.tests.builders import make_graph, make_node, spread_priors
from wearable_graph_project.tools.providers import stub_knowledge

PRIMARIES = 20
NEIGHBORS = 17


def valid_observation(values):
    size = len(values)
    return Observation(value=tuple(values), var=(1.0,) * size, valid=(True,) * size, n=(4,) * size, r=(0.5,) * size)


def adversarial_fixture():
    """Prior weights fall with the neighbor index while the population evidence rises with it."""
    primaries = [make_node(f"p{j:02d}", f"Primary {j:02d}", ValueKind.NUMERIC) for j in range(PRIMARIES)]
    neighbors = [make_node(f"n{i:02d}", f"Neighbor {i:02d}", ValueKind.NUMERIC) for i in range(NEIGHBORS)]
    w_prior = [round(0.9 - 0.04 * i, 2) for i in range(NEIGHBORS)]
    edges = {(p.id, n.id): w for p in primaries for n, w in zip(neighbors, w_prior)}
    graph = make_graph(primaries + neighbors, edges)

    evidences = []
    for j, primary in enumerate(primaries):
        pop = [0.1 * (i + 1) * (1 + 0.05 * j) for i in range(NEIGHBORS)]
        ind = [logit(w) / 0.9 for w in w_prior]
        evidences.append(NodeEvidence(
            primary_id=primary.id, primary_name=primary.name, neighbors=neighbors, w_prior=w_prior,
            pop=valid_observation(pop), ind=valid_observation(ind), prior_var=(1.0,) * NEIGHBORS,
        ))
    return graph, evidences


class TestFindIntersection(unittest.TestCase):
    def test_linear_interpolation(self):
        preserve = TauCurve(alphas=(1.0, 2.0), taus=(1.0, 0.4), label="p")
        align = TauCurve(alphas=(1.0, 2.0), taus=(0.0, 0.8), label="a")
        self.assertAlmostEqual(find_intersection(preserve, align), 1.0 + 1.0 / 1.4, places=12)

    def test_exact_grid_hit(self):
        preserve = TauCurve(alphas=(1.0, 2.0, 3.0), taus=(0.9, 0.5, 0.1), label="p")
        align = TauCurve(alphas=(1.0, 2.0, 3.0), taus=(0.1, 0.5, 0.9), label="a")
        self.assertEqual(find_intersection(preserve, align), 2.0)

    def test_no_crossing(self):
        preserve = TauCurve(alphas=(1.0, 2.0), taus=(0.9, 0.8), label="p")
        align = TauCurve(alphas=(1.0, 2.0), taus=(0.1, 0.2), label="a")
        self.assertIsNone(find_intersection(preserve, align))

    def test_grid_mismatch(self):
        preserve = TauCurve(alphas=(1.0, 2.0), taus=(0.9, 0.8), label="p")
        align = TauCurve(alphas=(1.0, 3.0), taus=(0.1, 0.2), label="a")
        with self.assertRaises(ArgumentError):
            find_intersection(preserve, align)


class TestGrid(unittest.TestCase):
    def test_default_grid(self):
        grid = default_alpha_grid(0.01, 100.0, 5)
        self.assertEqual(len(grid), 5)
        self.assertAlmostEqual(grid[0], 0.01, places=12)
        self.assertAlmostEqual(grid[2], 1.0, places=12)
        self.assertAlmostEqual(grid[-1], 100.0, places=9)

    def test_parse_grid(self):
        self.assertEqual(len(parse_grid("0.01, 100, 25")), 25)
        for bad in ("0.01,100", "a,b,c", "0,1,5", "1,0.5,5", "0.1,1,1"):
            with self.assertRaises(ArgumentError):
                parse_grid(bad)


class TestAdversarialCalibration(unittest.TestCase):
    def setUp(self):
        self.graph, self.evidences = adversarial_fixture()
        self.grid = tuple(float(a) for a in np.logspace(-2, 2, 24))
        self.cfg = HbmConfig(alpha_pop=1.0, alpha_ind=1.0)

    def test_population_curves_are_monotone(self):
        preserve, align = tau_curves_from_evidence("population", self.graph, self.evidences, self.grid, self.cfg)
        self.assertEqual(preserve.label, "population-preserve")
        self.assertTrue(all(b <= a + 1e-12 for a, b in zip(preserve.taus, preserve.taus[1:])))
        self.assertTrue(all(b >= a - 1e-12 for a, b in zip(align.taus, align.taus[1:])))
        self.assertGreater(preserve.taus[0], 0.9)
        self.assertLess(preserve.taus[-1], -0.9)

    def test_intersection_balances_the_curves(self):
        preserve, align = tau_curves_from_evidence("population", self.graph, self.evidences, self.grid, self.cfg)
        alpha = find_intersection(preserve, align)
        self.assertIsNotNone(alpha)
        self.assertTrue(self.grid[0] <= alpha <= self.grid[-1])
        gap = np.interp(alpha, self.grid, preserve.taus) - np.interp(alpha, self.grid, align.taus)
        self.assertLessEqual(abs(gap), 0.02)

    def test_full_calibration(self):
        result = calibrate_from_evidence(self.graph, self.evidences, self.grid, self.cfg)
        self.assertEqual(result.population.alpha, result.alpha_pop)
        self.assertTrue(self.grid[0] <= result.alpha_ind <= self.grid[-1])
        self.assertGreaterEqual(result.individual.preserve.taus[0], result.individual.align.taus[0])
        self.assertEqual([c.label for c in result.diagnostics], ["individual-aux-prior", "individual-aux-population"])

        csv = curves_to_csv(result)
        lines = csv.splitlines()
        self.assertEqual(lines[0], ",".join(CURVE_COLUMNS))
        self.assertEqual(len(lines), 1 + 4 * len(self.grid))

    def test_without_usable_evidence(self):
        graph = make_graph([make_node("x", "X", ValueKind.NUMERIC), make_node("y", "Y", ValueKind.TEXTUAL)],
                           {("x", "y"): 0.5})
        empty = Observation(value=(None,), var=(None,), valid=(False,), n=(0,), r=(None,))
        evidence = NodeEvidence(primary_id="x", primary_name="X", neighbors=[graph.nodes["y"]], w_prior=[0.5],
                                pop=empty, ind=empty, prior_var=(1.0,))
        with self.assertRaises(InsufficientDataError):
            tau_curves_from_evidence("population", graph, [evidence], self.grid, self.cfg)


class TestGridLimits(unittest.TestCase):
    """Tiny alpha keeps the previous stage's ranking; huge alpha follows the observations."""

    @classmethod
    def setUpClass(cls):
        cls.cohort = generate_synthetic_cohort(n_subjects=4, n_days=90, seed=11)
        cls.graph = spread_priors(init_general_graph(synthetic_metric_records(), stub_knowledge()))
        cls.grid = (1e-8, 1.0, 1e8)
        cls.cfg = HbmConfig(alpha_pop=1.0, alpha_ind=1.0)

    def check_limits(self, stage):
        preserve, align = tau_curves(stage, self.graph, self.cohort, self.cohort[:2], self.grid, self.cfg)
        self.assertEqual(preserve.label, f"{stage}-preserve")
        self.assertGreaterEqual(preserve.taus[0], 0.99)
        self.assertGreaterEqual(align.taus[-1], 0.99)

    def test_population_stage(self):
        self.check_limits("population")

    def test_individual_stage(self):
        self.check_limits("individual")

if __name__ == "__main__":
    unittest.main()
