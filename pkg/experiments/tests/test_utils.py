import math
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np
import yaml

from ensemble_service.exceptions import ConfigValidationError
from experiments.utils import (
    apply_overrides,
    column,
    fit_linear,
    fit_power_law,
    gather_runs,
    load_config,
    paired_columns,
    parse_overrides,
    read_table,
    required_bond,
    truncation_profile,
    write_table,
)
from spinchain.model import product_state
from tensors.mps import random_mps


class FitTests(TestCase):
    def test_exact_power_law(self):
        xs = np.array([2.0, 4.0, 8.0, 16.0, 32.0])

        fit = fit_power_law(xs, 3.0 * xs**-2)

        self.assertAlmostEqual(fit.slope, -2.0)
        self.assertAlmostEqual(fit.intercept, math.log(3.0))
        self.assertAlmostEqual(fit.r_squared, 1.0)
        self.assertEqual(fit.points, 5)

    def test_range_restricts_points(self):
        xs = [1.0, 2.0, 4.0, 8.0, 16.0]
        ys = [1.0, 2.0, 4.0, 64.0, 256.0]

        fit = fit_power_law(xs, ys, range=(1.0, 4.0))

        self.assertAlmostEqual(fit.slope, 1.0)
        self.assertEqual(fit.range, (1.0, 4.0))
        self.assertEqual(fit.points, 3)

    def test_invalid_input(self):
        with self.assertRaises(ValueError):
            fit_power_law([1.0, 2.0], [1.0, 2.0])
        with self.assertRaises(ValueError):
            fit_power_law([1.0, 2.0, 3.0], [1.0, 0.0, 2.0])
        with self.assertRaises(ValueError):
            fit_power_law([1.0, 2.0, 3.0], [1.0, 2.0])

    def test_linear_fit_accepts_negative_values(self):
        xs = [4.0, 6.0, 8.0, 10.0]

        fit = fit_linear(xs, [0.5 * x - 3.0 for x in xs])

        self.assertAlmostEqual(fit.slope, 0.5)
        self.assertAlmostEqual(fit.intercept, -3.0)
        self.assertAlmostEqual(fit.r_squared, 1.0)
        with self.assertRaises(ValueError):
            fit_linear(xs, [1.0, 2.0, 3.0, 4.0], range=(4.0, 6.0))


class TableTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / "nested" / "table.tsv"
        write_table(
            self.path,
            ["N", "order", "sx"],
            [
                {"N": "4", "order": "8", "sx": "0.5"},
                {"N": "4", "order": "16", "sx": ""},
                {"N": "6", "order": "8", "sx": "0.25"},
            ],
        )

    def test_written_table_is_tab_separated(self):
        self.assertEqual(self.path.read_text().splitlines()[0], "N\torder\tsx")
        self.assertEqual(len(read_table(self.path)), 3)

    def test_column_skips_empty_cells_and_filters_rows(self):
        rows = read_table(self.path)

        np.testing.assert_array_equal(column(rows, "sx"), [0.5, 0.25])
        np.testing.assert_array_equal(column(rows, "order", where={"N": "4"}), [8.0, 16.0])
        with self.assertRaises(KeyError):
            column(rows, "sz")

    def test_paired_columns_drop_incomplete_rows(self):
        xs, ys = paired_columns(read_table(self.path), "order", "sx")

        np.testing.assert_array_equal(xs, [8.0, 8.0])
        np.testing.assert_array_equal(ys, [0.5, 0.25])


class ConfigFileTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / "config.yaml"

    def test_load_mapping(self):
        self.path.write_text("name: chain\nsizes: [4, 6]\nfilter:\n  M: 8\n")

        self.assertEqual(load_config(self.path), {"name": "chain", "sizes": [4, 6], "filter": {"M": 8}})

    def test_empty_file_is_empty_config(self):
        self.path.write_text("")

        self.assertEqual(load_config(self.path), {})

    def test_non_mapping_is_rejected(self):
        self.path.write_text("- 1\n- 2\n")

        with self.assertRaises(ConfigValidationError):
            load_config(self.path)


class OverrideTests(TestCase):
    def test_values_keep_yaml_types(self):
        overrides = parse_overrides(["--filter.M=64", "--sizes=[4, 6]", "--name=chain", "--oracle=true"])

        self.assertEqual(overrides, {"filter.M": 64, "sizes": [4, 6], "name": "chain", "oracle": True})

    def test_malformed_arguments(self):
        for arg in ("filter.M=64", "--filter.M", "--=3"):
            with self.subTest(arg=arg), self.assertRaises(ConfigValidationError):
                parse_overrides([arg])

    def test_nested_keys_are_created_without_touching_input(self):
        data = {"filter": {"M": 8, "max_bond": 16}}

        updated = apply_overrides(data, {"filter.M": 64, "model.g": -0.9})

        self.assertEqual(updated, {"filter": {"M": 64, "max_bond": 16}, "model": {"g": -0.9}})
        self.assertEqual(data, {"filter": {"M": 8, "max_bond": 16}})


class TruncationProfileTests(TestCase):
    def test_required_bond(self):
        vector = random_mps(6, 2, 4, seed=0)

        self.assertEqual(required_bond(vector, 1e-12), 4)
        self.assertEqual(required_bond(vector, 1.0), 1)
        self.assertEqual(required_bond(product_state("X+", 6), 1e-12), 1)

    def test_profile_rows(self):
        vectors = {4: random_mps(6, 2, 4, seed=1), 2: product_state("Z+", 6)}

        rows = truncation_profile(vectors, [1e-12, 1.0])

        self.assertEqual(
            [(row["degree"], row["tolerance"]) for row in rows],
            [(2, 1e-12), (2, 1.0), (4, 1e-12), (4, 1.0)],
        )
        self.assertEqual([row["bond"] for row in rows], [1, 1, 4, 1])
        self.assertEqual(rows[-1]["stored_bond"], 4)


def sample_experiment(root, runs):
    for name, status, value in runs:
        rows = [{"N": name[1:], "order": order, "osee_diagonal": value} for order in ("2", "4")]
        write_table(root / name / "exact.tsv", ["N", "order", "osee_diagonal"], rows)
    summaries = [{"name": name, "status": status} for name, status, _ in runs]
    (root / "manifest.yaml").write_text(yaml.safe_dump({"runs": summaries}))


class GatherRunsTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_one_row_per_successful_run(self):
        sample_experiment(self.root, [("N4", "ok", "0.5"), ("N6", "failed", "9"), ("N8", "ok", "1.5")])

        with self.assertLogs("experiments.utils", level="WARNING"):
            rows = gather_runs(self.root, "exact.tsv", ["N", "osee_diagonal"])

        self.assertEqual(rows, [{"N": "4", "osee_diagonal": "0.5"}, {"N": "8", "osee_diagonal": "1.5"}])

    def test_missing_column(self):
        sample_experiment(self.root, [("N4", "ok", "0.5")])

        with self.assertRaises(KeyError):
            gather_runs(self.root, "exact.tsv", ["osee_half"])
