import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tandem_errors import ConfigValidationError, DomainError, VerificationError
from tandem_hamiltonian import H
from tandem_model import NetworkParams, grid_points
from tandem_roots import b_vector, betas
from tandem_viscosity import (
    CheckReport,
    check_subdifferential,
    check_superdiff_relaxed,
    check_superdifferential,
    h_of,
    h_value,
    pde_scan,
    probe_superdifferential,
    sample_feasible,
    superdiff_element,
    superdiff_extremes,
)

REFERENCE = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)


class TestExtremePoints(unittest.TestCase):
    def test_interior_has_one_extreme_per_index(self):
        extremes = superdiff_extremes([0.5, 0.5], REFERENCE)
        self.assertEqual([(e.k, e.r, e.s, e.t) for e in extremes], [(1, 1, 1, 2), (2, 2, 2, 3)])
        for e in extremes:
            np.testing.assert_array_equal(e.delta, [0.0, 0.0])
            self.assertAlmostEqual(e.h, 0.0, places=10)

    def test_empty_first_queue(self):
        extremes = superdiff_extremes([0.0, 0.5], REFERENCE)
        first = [e for e in extremes if e.k == 1]
        self.assertEqual([(e.s, e.t) for e in first], [(0, 2), (0, 2)])
        self.assertEqual([e.r for e in first], [0, 1])
        np.testing.assert_allclose(first[0].delta, [betas(REFERENCE)[0], 0.0])
        self.assertEqual(first[0].h, REFERENCE.c)

    def test_full_second_buffer(self):
        # station 1 is filtered out of A(x); station 2 is itself full so s = 2
        extremes = superdiff_extremes([0.5, 1.0], REFERENCE)
        self.assertEqual([(e.k, e.r, e.s, e.t) for e in extremes], [(2, 2, 2, 3)])

    def test_downstream_full_buffer_gives_positive_h(self):
        params = NetworkParams(2, 1.0, (1.0, 2.0), (1.0, 1.0), 1.0)
        extremes = superdiff_extremes([0.0, 1.0], params)
        self.assertEqual([(e.k, e.r) for e in extremes], [(1, 0), (1, 1), (1, 2)])
        beyond = [e for e in extremes if e.r > e.k]
        self.assertTrue(beyond)
        for e in beyond:
            self.assertGreater(e.h, 0.0)

    def test_h_value(self):
        self.assertEqual(h_value(1, 0, REFERENCE), REFERENCE.c)
        for k in (1, 2):
            self.assertAlmostEqual(h_value(k, k, REFERENCE), 0.0, places=10)
        self.assertAlmostEqual(h_value(2, 1, REFERENCE), (np.sqrt(5.0) - 1.0) / 2.0, places=10)
        with self.assertRaises(DomainError):
            h_value(3, 0, REFERENCE)

    def test_enumerated_h_nonnegative_everywhere(self):
        for params in (REFERENCE, NetworkParams(3, 1.0, (3.0, 1.0, 2.0), (1.0, 2.0, 1.0), 1.0)):
            mu = params.mu
            for x in grid_points(params, 7):
                for e in superdiff_extremes(x, params):
                    self.assertGreaterEqual(e.h, -1e-12)
                    if e.r != e.k:
                        self.assertGreater(e.h, 1e-10)
                    if 0 < e.r < e.k:
                        self.assertLessEqual(mu[e.k - 1], mu[e.r - 1])
                    if e.r > e.k:
                        self.assertLess(mu[e.k - 1], mu[e.r - 1])


class TestElements(unittest.TestCase):
    def test_element_from_coefficients(self):
        element = superdiff_element([1.0, 0.0], [0.3, 0.0], REFERENCE)
        np.testing.assert_allclose(element.p, -b_vector(1, REFERENCE) + np.array([0.3, 0.0]))
        self.assertEqual(len(element.delta), 3)

    def test_h_matches_hamiltonian_on_polytope(self):
        rng = np.random.default_rng(4)
        nu, delta = sample_feasible([0.0, 0.0], REFERENCE, rng, 200)
        self.assertGreater(len(nu), 0)
        for row_nu, row_delta in zip(nu, delta):
            p = superdiff_element(row_nu, row_delta, REFERENCE).p
            self.assertAlmostEqual(h_of(row_nu, row_delta, REFERENCE)[0], H(p, REFERENCE), places=10)

    def test_sampled_polytope_is_bounded(self):
        rng = np.random.default_rng(8)
        beta = betas(REFERENCE)
        nu, delta = sample_feasible([0.0, 0.0], REFERENCE, rng, 500)
        weighted = nu * beta
        upper = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1]
        lower = delta[:, [0]] - (np.cumsum(weighted, axis=1) - weighted)
        self.assertTrue(np.all(delta[:, :2] <= upper + 1e-12))
        self.assertTrue(np.all(delta[:, :2] >= lower - 1e-12))
        self.assertTrue(np.all(delta[:, 2] == 0.0))


class TestSuperdifferentialChecks(unittest.TestCase):
    def test_reference_grid_passes(self):
        for x in grid_points(REFERENCE, 9):
            report = check_superdifferential(x, REFERENCE, samples=300, seed=1)
            self.assertTrue(report.passed, msg=f"x={x} {report.violation}")
            self.assertLessEqual(report.max_identity_defect, 1e-10)

    def test_single_station(self):
        params = NetworkParams(1, 1.0, (2.0,), (1.0,), 1.0)
        for x in grid_points(params, 11):
            report = check_superdifferential(x, params, samples=100, seed=1)
            self.assertTrue(report.passed)
            self.assertEqual([e.r for e in report.extremes if e.k == 1][-1], 1)

    def test_relaxed_on_empty_queues(self):
        for x in ([0.0, 0.5], [0.0, 0.0], [0.5, 0.5]):
            report = check_superdiff_relaxed(x, REFERENCE, samples=2000, seed=3)
            self.assertTrue(report.passed, msg=f"x={x} {report.violation}")
            self.assertGreater(report.samples_checked, 0)

    def test_failure_raises_on_request(self):
        report = CheckReport(x=[0.0], kind="superdifferential", passed=False, violation={"reason": "test"})
        with self.assertRaises(VerificationError):
            report.raise_for_failure()


class TestSubdifferentialChecks(unittest.TestCase):
    def test_interior_unique_argmin(self):
        report = check_subdifferential([0.5, 0.5], REFERENCE, samples=10)
        self.assertTrue(report.passed)
        self.assertEqual(report.samples_checked, 1)
        self.assertLessEqual(report.max_value, 1e-9)

    def test_tie_point(self):
        beta = betas(REFERENCE)
        y1 = 0.5
        y2 = (beta[0] / beta[1] - 1.0) * y1
        report = check_subdifferential([1.0 - y1, 1.0 - y2], REFERENCE)
        self.assertEqual(report.note, "empty subdifferential")
        self.assertEqual(report.samples_checked, 0)

    def test_controllable_face_rejected(self):
        with self.assertRaises(DomainError):
            check_subdifferential([0.5, 1.0], REFERENCE)

    def test_empty_queue(self):
        report = check_subdifferential([0.0, 0.5], REFERENCE, samples=500, seed=2)
        self.assertTrue(report.passed)
        self.assertEqual(report.samples_checked, 500)
        self.assertLessEqual(report.max_value, 0.0)
        self.assertIn("strictly inside the boundary cone", report.note)


class TestProbe(unittest.TestCase):
    def test_gradient_is_a_superdifferential(self):
        ratio = probe_superdifferential([0.5, 0.5], -b_vector(1, REFERENCE), REFERENCE, seed=0)
        self.assertLessEqual(ratio, 1e-6)

    def test_kink_accepts_convex_combinations(self):
        beta = betas(REFERENCE)
        y1 = 0.5
        x = [1.0 - y1, 1.0 - (beta[0] / beta[1] - 1.0) * y1]
        p = -(0.5 * b_vector(1, REFERENCE) + 0.5 * b_vector(2, REFERENCE))
        self.assertLessEqual(probe_superdifferential(x, p, REFERENCE, seed=0), 1e-6)

    def test_wrong_costate_is_caught(self):
        ratio = probe_superdifferential([0.5, 0.5], np.zeros(2), REFERENCE, seed=0)
        self.assertGreater(ratio, 0.1)


class TestPDEScan(unittest.TestCase):
    def test_single_station(self):
        summary = pde_scan(NetworkParams(1, 1.0, (2.0,), (1.0,), 1.0), 11, samples=50, seed=5)
        self.assertTrue(summary.passed, msg=str(summary.failures))
        self.assertEqual(summary.points, 11)
        self.assertEqual(summary.boundary_o_max_abs_V, 0.0)

    def test_reference_instance(self):
        summary = pde_scan(REFERENCE, 9, samples=200, seed=5)
        self.assertTrue(summary.passed, msg=str(summary.failures))
        self.assertLessEqual(summary.max_residual_interior, 1e-9)
        self.assertGreater(summary.skipped_subdifferential, 0)
        self.assertLess(summary.boundary_plus_min_dv_gamma, 0.0)
        self.assertEqual(summary.to_dict()["pass"], True)

    def test_three_stations(self):
        params = NetworkParams(3, 1.0, (3.0, 1.0, 2.0), (1.0, 2.0, 1.0), 1.0)
        summary = pde_scan(params, 5, samples=100, seed=5)
        self.assertTrue(summary.passed, msg=str(summary.failures))

    def test_resolution_floor(self):
        with self.assertRaises(ConfigValidationError):
            pde_scan(REFERENCE, 2)


if __name__ == "__main__":
    unittest.main()
