from unittest import TestCase

import numpy as np

from ensemble_service.exceptions import DimensionMismatchError, NonFiniteTensorError
from tensors.dense import as_tensor, contract, frobenius_norm, qr_orthogonalize, svd_truncate


def sample_tensor(shape, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class ContractTests(TestCase):
    def test_contract_matches_tensordot(self):
        a = sample_tensor((2, 3, 4))
        b = sample_tensor((4, 3, 5), seed=1)

        result = contract(a, b, [(1, 1), (2, 0)])

        self.assertEqual(result.shape, (2, 5))
        np.testing.assert_allclose(result, np.einsum("abc,cbd->ad", a, b), atol=1e-12)

    def test_contract_is_bilinear(self):
        a = sample_tensor((3, 4))
        b = sample_tensor((4, 2), seed=1)
        c = sample_tensor((4, 2), seed=2)

        np.testing.assert_allclose(
            contract(2.5j * a, b, [(1, 0)]), 2.5j * contract(a, b, [(1, 0)]), atol=1e-12
        )
        np.testing.assert_allclose(
            contract(a, b + c, [(1, 0)]), contract(a, b, [(1, 0)]) + contract(a, c, [(1, 0)]), atol=1e-12
        )

    def test_small_known_contractions(self):
        sigma_z = np.diag([1.0, -1.0])
        v = np.array([0.3, -1.2j])
        a = np.arange(6.0).reshape(2, 3)
        b = np.arange(12.0).reshape(3, 4)

        np.testing.assert_allclose(contract(np.eye(2), v, [(1, 0)]), v)
        np.testing.assert_allclose(contract(sigma_z, sigma_z, [(1, 0)]), np.eye(2))
        result = contract(a, b, [(1, 0)])
        self.assertEqual(result.shape, (2, 4))
        self.assertAlmostEqual(result[1, 2], 3 * 2 + 4 * 6 + 5 * 10)

    def test_contract_rejects_mismatched_extents(self):
        with self.assertRaises(DimensionMismatchError):
            contract(sample_tensor((2, 3)), sample_tensor((4, 2)), [(1, 0)])

    def test_contract_rejects_axis_out_of_range(self):
        with self.assertRaises(IndexError):
            contract(sample_tensor((2, 3)), sample_tensor((3, 2)), [(2, 0)])

    def test_as_tensor_rejects_nan(self):
        with self.assertRaises(NonFiniteTensorError):
            as_tensor([1.0, np.nan])


class SvdTruncateTests(TestCase):
    def test_full_rank_reconstructs_tensor(self):
        tensor = sample_tensor((3, 4, 5))

        factorization = svd_truncate(tensor, left_axes=(0, 1), max_rank=100)

        rebuilt = np.tensordot(
            factorization.left_factor * factorization.singular_values,
            factorization.right_factor,
            axes=([2], [0]),
        )
        np.testing.assert_allclose(rebuilt, tensor, atol=1e-12)
        self.assertEqual(factorization.rank, 5)
        self.assertAlmostEqual(factorization.discarded_weight, 0.0, places=14)

    def test_max_rank_caps_rank_and_reports_weight(self):
        tensor = sample_tensor((6, 6))
        singular_values = np.linalg.svd(tensor, compute_uv=False)

        factorization = svd_truncate(tensor, left_axes=(0,), max_rank=2)

        expected = np.sum(singular_values[2:] ** 2) / np.sum(singular_values**2)
        self.assertEqual(factorization.rank, 2)
        self.assertAlmostEqual(factorization.discarded_weight, expected, places=12)

    def test_rel_tol_keeps_smallest_admissible_rank(self):
        tensor = np.diag([1.0, 0.1, 0.001]).astype(np.complex128)

        factorization = svd_truncate(tensor, left_axes=(0,), max_rank=3, rel_tol=1e-4)

        self.assertEqual(factorization.rank, 2)
        self.assertAlmostEqual(factorization.discarded_weight, 1e-6 / 1.010001, places=12)

    def test_zero_tensor_keeps_one_value(self):
        factorization = svd_truncate(np.zeros((3, 3)), left_axes=(0,), max_rank=3)

        self.assertEqual(factorization.rank, 1)
        self.assertEqual(factorization.discarded_weight, 0.0)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            svd_truncate(sample_tensor((2, 2)), left_axes=(0,), max_rank=0)
        with self.assertRaises(ValueError):
            svd_truncate(sample_tensor((2, 2)), left_axes=(0, 1), max_rank=2)
        with self.assertRaises(NonFiniteTensorError):
            svd_truncate(np.array([[np.inf, 0.0], [0.0, 1.0]]), left_axes=(0,), max_rank=2)


class QrTests(TestCase):
    def test_qr_factor_is_isometry(self):
        tensor = sample_tensor((3, 2, 4))

        q, r = qr_orthogonalize(tensor, left_axes=(0, 1))

        matrix = q.reshape(6, -1)
        np.testing.assert_allclose(matrix.conj().T @ matrix, np.eye(matrix.shape[1]), atol=1e-12)
        np.testing.assert_allclose(np.tensordot(q, r, axes=([2], [0])), tensor, atol=1e-12)

    def test_frobenius_norm(self):
        self.assertAlmostEqual(frobenius_norm(np.array([[3.0, 0.0], [0.0, 4.0]])), 5.0)
