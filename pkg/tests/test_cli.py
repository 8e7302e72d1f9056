import json
import os
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tandem import main
from tandem_commands import CommandManager, emit_json, parse_int_list, parse_vector
from tandem_errors import ConfigValidationError, DimensionError

BETA_1 = np.log(2.0 + np.sqrt(2.0))
BETA_2 = np.log((3.0 + np.sqrt(5.0)) / 2.0)


class CLITestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp, name)

    def write_config(self, document, name="instance.json"):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f)
        return path

    def run_json(self, argv):
        out = self.path("out.json")
        code = main(argv + ["--out", out, "--log-level", "WARNING"])
        self.assertEqual(code, 0)
        with open(out, "r", encoding="utf-8") as f:
            return json.load(f)

    def run_csv(self, argv):
        out = self.path("out.csv")
        code = main(argv + ["--out", out, "--log-level", "WARNING"])
        self.assertEqual(code, 0)
        return pd.read_csv(out)


class TestDiscovery(CLITestCase):
    def test_all_commands_load(self):
        manager = CommandManager()
        manager.load_commands()
        self.assertEqual(
            manager.get_loaded_commands(),
            sorted([
                "bottleneck-map", "check-pde", "compare-policies", "convergence", "fluid-path",
                "hamiltonian", "regions-single-server", "roots", "simulate", "solve-dp", "value",
            ]),
        )

    def test_no_command(self):
        self.assertEqual(main([]), 2)

    def test_unknown_command(self):
        with self.assertRaises(SystemExit):
            main(["frobnicate"])


class TestCommands(CLITestCase):
    def test_value(self):
        doc = self.run_json(["value", "--at", "0,0.9"])
        self.assertEqual(doc["schema_version"], "1")
        self.assertAlmostEqual(doc["V"], 1.1 * BETA_2, places=10)
        self.assertEqual(doc["bottleneck"], 2)
        self.assertEqual(doc["boundary"], "boundary-plus")

    def test_value_interior_gradient(self):
        doc = self.run_json(["value", "--at", "0.5,0.5"])
        self.assertAlmostEqual(doc["gradient"][0], -BETA_1, places=10)

    def test_value_errors(self):
        self.assertEqual(main(["value", "--at", "0.5", "--log-level", "CRITICAL"]), 2)
        self.assertEqual(main(["value", "--at", "0.5,1.5", "--log-level", "CRITICAL"]), 2)

    def test_roots(self):
        frame = self.run_csv(["roots"])
        self.assertEqual(list(frame.columns), ["i", "mu_i", "beta_i", "residual"])
        np.testing.assert_allclose(frame["beta_i"], [BETA_1, BETA_2], rtol=1e-10)

    def test_roots_from_config(self):
        config = self.write_config({"J": 1, "lambda": 1, "mu": [1], "z": [1], "c": 1})
        frame = self.run_csv(["--config", config, "roots"])
        np.testing.assert_allclose(frame["beta_i"], [BETA_2], rtol=1e-10)

    def test_bad_config(self):
        config = self.write_config({"J": 2, "lambda": 1, "mu": [2], "z": [1, 1], "c": 1})
        self.assertEqual(main(["roots", "--config", config, "--log-level", "CRITICAL"]), 2)

    def test_bottleneck_map(self):
        frame = self.run_csv(["bottleneck-map", "--resolution", "5"])
        self.assertEqual(list(frame.columns), ["x1", "x2", "V", "argmin", "A_of_x"])
        self.assertEqual(len(frame), 4 * 5)

    def test_single_server_regions(self):
        frame = self.run_csv(["regions-single-server", "--resolution", "3"])
        self.assertEqual(list(frame.columns), ["x1", "x2", "V", "priority"])
        config = self.write_config({"J": 2, "lambda": 1, "mu": [2, 1], "z": [1, 1], "c": 1})
        self.assertEqual(main(["regions-single-server", "--config", config, "--log-level", "CRITICAL"]), 2)

    def test_hamiltonian(self):
        doc = self.run_json(["hamiltonian", f"--p={-float(BETA_1)!r},0"])
        self.assertAlmostEqual(doc["H"], 0.0, places=10)
        self.assertEqual(doc["controls"], ["serve", "free"])
        self.assertLess(doc["sum_relation_residual"], 1e-9)
        self.assertLess(doc["isaacs"]["gap"], 0.05)

    def test_check_pde(self):
        config = self.write_config({"J": 1, "lambda": 1, "mu": [2], "z": [1], "c": 1})
        doc = self.run_json(["--config", config, "check-pde", "--resolution", "6", "--samples", "50"])
        self.assertIs(doc["pass"], True)
        self.assertEqual(doc["points"], 6)

    def test_solve_dp(self):
        config = self.write_config({"J": 1, "lambda": 1, "mu": [2], "z": [1], "c": 1})
        table = self.path("table.csv")
        doc = self.run_json(["--config", config, "solve-dp", "--n", "2", "--table", table])
        self.assertAlmostEqual(doc["Vn_at"], 0.5 * np.log(6.0), places=9)
        self.assertEqual(doc["lattice_point"], [0])
        self.assertEqual(len(pd.read_csv(table)), 2)

    def test_solve_dp_iteration_limit(self):
        self.assertEqual(main(["solve-dp", "--n", "8", "--max-iter", "2", "--log-level", "CRITICAL"]), 4)

    def test_convergence(self):
        frame = self.run_csv(["convergence", "--n-list", "1,2"])
        self.assertEqual(list(frame["n"]), [1, 2])
        np.testing.assert_allclose(frame["V"], BETA_1, rtol=1e-10)

    def test_simulate(self):
        doc = self.run_json(["simulate", "--n", "2", "--paths", "200", "--seed", "1", "--is"])
        self.assertEqual(doc["method"], "importance")
        self.assertEqual(doc["n_traj"], 200)
        self.assertGreater(doc["mean"], 0.0)

    def test_simulate_bad_policy(self):
        self.assertEqual(main(["simulate", "--n", "2", "--policy", "sometimes", "--log-level", "CRITICAL"]), 2)

    def test_compare_policies(self):
        frame = self.run_csv(["compare-policies", "--n", "2", "--paths", "100", "--seed", "2"])
        self.assertEqual(list(frame["policy"]), ["serve-all", "bottleneck-only", "idle-1", "idle-2"])

    def test_fluid_path(self):
        doc = self.run_json(["fluid-path", "--at", "0.5,0.5"])
        self.assertAlmostEqual(doc["cost"], 0.5 * BETA_1, places=8)
        self.assertEqual(doc["exit_face"], "boundary-o")


class TestHelpers(unittest.TestCase):
    def test_parse_vector(self):
        np.testing.assert_array_equal(parse_vector("0.5, 0.25", 2, "at"), [0.5, 0.25])
        with self.assertRaises(DimensionError):
            parse_vector("0.5", 2, "at")
        with self.assertRaises(ConfigValidationError):
            parse_vector("a,b", 2, "at")

    def test_parse_int_list(self):
        self.assertEqual(parse_int_list("1,2,4", "n-list"), [1, 2, 4])
        with self.assertRaises(ConfigValidationError):
            parse_int_list("0,2", "n-list")

    def test_json_rounding(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, "doc.json")
            emit_json({"v": 1.0 / 3.0, "s": {3, 1}, "inf": float("inf")}, out)
            with open(out, "r", encoding="utf-8") as f:
                doc = json.load(f)
        self.assertEqual(doc["v"], 0.333333333333)
        self.assertEqual(doc["s"], [1, 3])
        self.assertEqual(doc["inf"], "inf")


if __name__ == "__main__":
    unittest.main()
