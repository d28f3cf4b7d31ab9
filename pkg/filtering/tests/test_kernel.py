import math
from unittest import TestCase

import numpy as np

from filtering.kernel import (
    checkpoint_schedule,
    chebyshev_coefficients,
    jackson_coeff,
    kernel_width,
    peak_value,
    rescaled_width,
    scalar_filter,
    series_coeff,
    sigma_for_order,
)


class JacksonCoefficientTests(TestCase):
    def test_zeroth_coefficient_is_one(self):
        for M in (0, 2, 8, 40, 255):
            self.assertAlmostEqual(jackson_coeff(0, M), 1.0)
            self.assertAlmostEqual(jackson_coeff(0, M, literal=True), 1.0)

    def test_known_value(self):
        step = math.pi / 9

        self.assertAlmostEqual(
            jackson_coeff(4, 8),
            (5 * math.cos(4 * step) + math.sin(4 * step) / math.tan(step)) / 9,
            places=14,
        )
        self.assertAlmostEqual(
            jackson_coeff(4, 8, literal=True),
            (5 * math.cos(4 * step) + math.sin(4 * step) * math.cos(step)) / 9,
            places=14,
        )

    def test_coefficients_decrease(self):
        values = [jackson_coeff(m, 16) for m in range(17)]

        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))
        self.assertAlmostEqual(values[-1], 0.0, places=12)

    def test_degree_out_of_range(self):
        with self.assertRaises(ValueError):
            jackson_coeff(9, 8)
        with self.assertRaises(ValueError):
            jackson_coeff(-1, 8)


class SeriesCoefficientTests(TestCase):
    def test_leading_coefficient(self):
        self.assertAlmostEqual(series_coeff(0, 12), 1 / math.pi)
        self.assertAlmostEqual(series_coeff(1, 8), -2 / math.pi * jackson_coeff(2, 8))

    def test_signs_alternate(self):
        for k in range(8):
            self.assertEqual(np.sign(series_coeff(k, 16)), (-1) ** k)

    def test_only_even_degrees_carry_weight(self):
        coefficients = chebyshev_coefficients(10)

        self.assertEqual(len(coefficients), 11)
        np.testing.assert_array_equal(coefficients[1::2], 0.0)
        self.assertAlmostEqual(coefficients[4], series_coeff(2, 10))

    def test_order_out_of_range(self):
        with self.assertRaises(ValueError):
            series_coeff(5, 8)


class ScalarFilterTests(TestCase):
    def test_filter_is_non_negative_and_peaked(self):
        xs = np.linspace(-1, 1, 2001)

        values = scalar_filter(xs, 48)

        self.assertGreater(values.min(), -1e-12)
        self.assertEqual(np.argmax(values), 1000)

    def test_zero_order_filter_is_constant(self):
        np.testing.assert_allclose(scalar_filter([-0.5, 0.0, 0.9], 0), 1 / math.pi)

    def test_peak_value_is_filter_at_zero(self):
        self.assertAlmostEqual(peak_value(0), 1 / math.pi)
        for M in (8, 40, 128):
            self.assertAlmostEqual(peak_value(M), float(scalar_filter(0.0, M)), places=10)
        self.assertGreater(peak_value(64), peak_value(32))


class WidthTests(TestCase):
    def test_sigma_for_order(self):
        self.assertAlmostEqual(rescaled_width(16), math.sqrt(math.pi) / 16)
        self.assertAlmostEqual(sigma_for_order(16, 0.05), math.sqrt(math.pi) / 0.8)
        with self.assertRaises(ValueError):
            sigma_for_order(0, 0.05)

    def test_kernel_width_scales_inversely_with_order(self):
        for M in (32, 64, 128):
            self.assertGreater(kernel_width(M) * M / math.pi, 0.8)
            self.assertLess(kernel_width(M) * M / math.pi, 1.25)
        self.assertAlmostEqual(kernel_width(128) / kernel_width(64), 0.5, delta=0.02)


class CheckpointScheduleTests(TestCase):
    def test_log_spaced_orders_end_at_M(self):
        self.assertEqual(checkpoint_schedule(100), [16, 24, 32, 48, 64, 96, 100])
        self.assertEqual(checkpoint_schedule(96), [16, 24, 32, 48, 64, 96])

    def test_short_series(self):
        self.assertEqual(checkpoint_schedule(10), [10])
        self.assertEqual(checkpoint_schedule(0), [0])
