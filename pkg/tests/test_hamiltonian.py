import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tandem_errors import PreconditionError
from tandem_hamiltonian import (
    H,
    H_full,
    H_u,
    RateVector,
    ServiceDecision,
    check_product_relation,
    check_sum_relation,
    control_grid,
    drift,
    ell,
    isaacs_check,
    optimal_m,
    optimal_u,
    running_cost,
    single_server_H,
    single_server_H_u,
    single_server_optimal_u,
)
from tandem_model import NetworkParams, SingleServerParams
from tandem_roots import b_vector, betas


def random_instance(rng, max_stations=4):
    J = int(rng.integers(1, max_stations + 1))
    return NetworkParams(
        J,
        float(rng.uniform(0.1, 10.0)),
        tuple(float(v) for v in rng.uniform(0.1, 10.0, size=J)),
        tuple(float(v) for v in rng.uniform(0.5, 2.0, size=J)),
        float(rng.uniform(0.1, 10.0)),
    )


class TestPrimitives(unittest.TestCase):
    def setUp(self):
        self.params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)

    def test_ell(self):
        self.assertEqual(ell(1.0), 0.0)
        self.assertEqual(ell(0.0), 1.0)
        self.assertEqual(ell(-0.5), np.inf)
        np.testing.assert_allclose(ell(np.array([np.e, 2.0])), [1.0, 2.0 * np.log(2.0) - 1.0])

    def test_ell_midpoint_convex(self):
        rng = np.random.default_rng(8)
        a = np.append(rng.uniform(0.0, 10.0, size=1000), 0.0)
        b = np.append(rng.uniform(0.0, 10.0, size=1000), 3.0)
        self.assertTrue(np.all(ell((a + b) / 2.0) <= (ell(a) + ell(b)) / 2.0 + 1e-12))

    def test_drift(self):
        m = RateVector(lam_bar=1.0, mu_bar=np.array([2.0, 1.0]))
        np.testing.assert_allclose(drift([1.0, 1.0], m), [-1.0, 1.0])
        np.testing.assert_allclose(drift([0.0, 0.0], m), [1.0, 0.0])

    def test_controls_outside_box(self):
        m = RateVector.nominal(self.params)
        with self.assertRaises(PreconditionError):
            drift([1.5, 0.0], m)

    def test_running_cost(self):
        self.assertEqual(running_cost([1.0, 1.0], RateVector.nominal(self.params), self.params), 0.0)
        m = RateVector(lam_bar=0.0, mu_bar=self.params.mu_array.copy())
        self.assertAlmostEqual(running_cost([0.0, 0.0], m, self.params), 1.0)
        m = RateVector(lam_bar=-1.0, mu_bar=self.params.mu_array.copy())
        self.assertEqual(running_cost([0.0, 0.0], m, self.params), np.inf)


class TestHamiltonian(unittest.TestCase):
    def setUp(self):
        self.params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)

    def test_zero_costate(self):
        for u in control_grid(2):
            self.assertAlmostEqual(H_full([0.0, 0.0], u, RateVector.nominal(self.params), self.params), 1.0)
            self.assertAlmostEqual(H_u([0.0, 0.0], u, self.params), 1.0)
        self.assertEqual(H([0.0, 0.0], self.params), 1.0)

    def test_single_station_root(self):
        params = NetworkParams(1, 1.0, (2.0,), (1.0,), 1.0)
        self.assertAlmostEqual(H_u(-betas(params), [1.0], params), 0.0, places=12)

    def test_vanishes_at_every_b(self):
        for params in (self.params, NetworkParams(3, 0.7, (1.5, 2.5, 0.8), (1.0, 1.0, 1.0), 0.4)):
            for j in range(1, params.J + 1):
                self.assertAlmostEqual(H(-b_vector(j, params), params), 0.0, places=12)

    def test_random_instances(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            params = random_instance(rng)
            self.assertEqual(H(np.zeros(params.J), params), params.c)
            for j in range(1, params.J + 1):
                p = -b_vector(j, params)
                self.assertLessEqual(abs(H(p, params)), 1e-10)
                serve_j = np.eye(params.J)[j - 1]
                self.assertLessEqual(check_sum_relation(serve_j, p, params), 1e-9 * (params.c + params.total_rate))

    def test_H_u_is_infimum_over_rates(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            p = rng.normal(size=2)
            u = rng.uniform(size=2)
            target = H_u(p, u, self.params)
            self.assertAlmostEqual(H_full(p, u, optimal_m(p, self.params), self.params), target, places=10)
            for _ in range(20):
                m = RateVector(lam_bar=rng.uniform(0.01, 5.0), mu_bar=rng.uniform(0.01, 5.0, size=2))
                self.assertGreaterEqual(H_full(p, u, m, self.params), target - 1e-12)

    def test_H_is_supremum_over_controls(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = rng.normal(size=2)
            best = max(H_u(p, u, self.params) for u in control_grid(2))
            self.assertAlmostEqual(H(p, self.params), best, places=12)


class TestOptimizers(unittest.TestCase):
    def setUp(self):
        self.params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)

    def test_optimal_m(self):
        m = optimal_m([0.0, 0.0], self.params)
        self.assertEqual(m.lam_bar, 1.0)
        np.testing.assert_array_equal(m.mu_bar, [2.0, 1.0])

        beta = betas(self.params)
        m = optimal_m(-b_vector(2, self.params), self.params)
        self.assertAlmostEqual(m.lam_bar, np.exp(beta[1]))
        np.testing.assert_allclose(m.mu_bar, [2.0, np.exp(-beta[1])])

    def test_optimal_u(self):
        self.assertEqual(optimal_u([0.0, 0.0], self.params), [ServiceDecision.FREE] * 2)
        self.assertEqual(optimal_u(-b_vector(1, self.params), self.params), [ServiceDecision.SERVE, ServiceDecision.FREE])
        self.assertEqual(optimal_u(-b_vector(2, self.params), self.params), [ServiceDecision.FREE, ServiceDecision.SERVE])
        self.assertEqual(optimal_u([1.0, 0.0], self.params), [ServiceDecision.IDLE, ServiceDecision.FREE])


class TestRateRelations(unittest.TestCase):
    def test_sum_relation_single_station(self):
        params = NetworkParams(1, 1.0, (2.0,), (1.0,), 1.0)
        m = optimal_m(-b_vector(1, params), params)
        self.assertAlmostEqual(m.lam_bar + m.mu_bar[0], 4.0, places=12)
        self.assertLess(check_sum_relation([1.0], -b_vector(1, params), params), 1e-10)

    def test_sum_relation_tandem(self):
        params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)
        self.assertLess(check_sum_relation([1.0, 1.0], -b_vector(2, params), params), 1e-10)

    def test_sum_relation_needs_zero_hamiltonian(self):
        params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)
        with self.assertRaises(PreconditionError):
            check_sum_relation([1.0, 1.0], [0.0, 0.0], params)

    def test_product_relation(self):
        params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)
        for j in (1, 2):
            m = optimal_m(-b_vector(j, params), params)
            self.assertAlmostEqual(m.lam_bar * np.prod(m.mu_bar), 2.0, places=10)
            self.assertLess(check_product_relation(-b_vector(j, params), params), 1e-12)
        rng = np.random.default_rng(3)
        for _ in range(20):
            self.assertLess(check_product_relation(rng.normal(size=2), params), 1e-9)

    def test_product_relation_random_costates(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            params = random_instance(rng)
            p = rng.normal(scale=2.0, size=params.J)
            self.assertLessEqual(check_product_relation(p, params), 1e-9)


class TestIsaacs(unittest.TestCase):
    def test_zero_costate(self):
        params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)
        report = isaacs_check([0.0, 0.0], params)
        self.assertAlmostEqual(report.gap, 0.0, places=12)
        self.assertAlmostEqual(report.sup_inf, 1.0, places=12)

    def test_single_station_root(self):
        params = NetworkParams(1, 1.0, (2.0,), (1.0,), 1.0)
        report = isaacs_check(-b_vector(1, params), params)
        self.assertLessEqual(report.gap, 0.05)
        self.assertAlmostEqual(report.H, 0.0, places=12)

    def test_grid_matches_analytic_value(self):
        params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)
        rng = np.random.default_rng(2)
        for _ in range(10):
            p = rng.normal(size=2)
            report = isaacs_check(p, params)
            # the grid contains optimal_m(p), so the discrete minimax attains H(p)
            self.assertAlmostEqual(report.sup_inf, H(p, params), places=9)

    def test_product_grid_matches_separable_form(self):
        rng = np.random.default_rng(4)
        for params, points in ((NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0), 33),
                               (NetworkParams(3, 0.7, (1.5, 2.5, 0.8), (1.0, 1.0, 1.0), 0.4), 9)):
            for _ in range(10):
                p = rng.normal(size=params.J)
                full = isaacs_check(p, params, points=points)
                split = isaacs_check(p, params, points=points, product_cap=0)
                self.assertEqual(full.method, "product-grid")
                self.assertEqual(split.method, "separable")
                self.assertAlmostEqual(full.sup_inf, split.sup_inf, places=10)
                self.assertAlmostEqual(full.inf_sup, split.inf_sup, places=10)
                self.assertGreaterEqual(full.inf_sup, full.sup_inf - 1e-12)

    def test_gap_shrinks_under_refinement(self):
        params = NetworkParams(2, 1.0, (2.0, 1.0), (1.0, 1.0), 1.0)
        rng = np.random.default_rng(12)
        # nested rate grids, each holding the minimizing rates at its centre
        for p in [-b_vector(1, params), -b_vector(2, params)] + list(rng.normal(size=(5, 2))):
            reports = [isaacs_check(p, params, points=points) for points in (5, 9, 17, 33)]
            for coarse, fine in zip(reports, reports[1:]):
                self.assertLessEqual(fine.gap, coarse.gap + 1e-12)
                self.assertLessEqual(abs(fine.sup_inf - fine.H), abs(coarse.sup_inf - coarse.H) + 1e-12)
            self.assertLessEqual(reports[-1].gap, 1e-9 * (1.0 + abs(reports[-1].H)))


class TestSingleServerHamiltonian(unittest.TestCase):
    def setUp(self):
        self.params = SingleServerParams(2, (1.0, 0.5), (2.0, 2.0), (1.0, 1.0), 1.0)

    def test_supremum_on_simplex(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            p = rng.normal(size=2)
            u = single_server_optimal_u(p, self.params)
            self.assertAlmostEqual(single_server_H_u(p, u, self.params), single_server_H(p, self.params), places=12)
            for w in rng.dirichlet([1.0, 1.0, 1.0], size=10):
                self.assertLessEqual(single_server_H_u(p, w[:2], self.params), single_server_H(p, self.params) + 1e-12)

    def test_simplex_violation(self):
        with self.assertRaises(PreconditionError):
            single_server_H_u([0.0, 0.0], [0.7, 0.7], self.params)


if __name__ == "__main__":
    unittest.main()
