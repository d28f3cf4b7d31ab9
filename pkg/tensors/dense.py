"""
Dense complex tensor algebra.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128``, linearized
row-major over the declared axis order. Every public function returns finite
values or raises :class:`NonFiniteTensorError`.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg as la

from ensemble_service import settings
from ensemble_service.exceptions import DimensionMismatchError, NonFiniteTensorError

DenseTensor = np.ndarray


@dataclass(frozen=True)
class TruncatedFactorization:
    left_factor: DenseTensor
    singular_values: np.ndarray
    right_factor: DenseTensor
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.singular_values)


def as_tensor(data) -> DenseTensor:
    tensor = np.asarray(data, dtype=np.complex128)
    check_finite(tensor)
    return tensor


def check_finite(tensor: DenseTensor, error_to_raise=NonFiniteTensorError):
    if not np.all(np.isfinite(tensor)):
        raise error_to_raise("Tensor contains NaN or Inf values")


def contract(
    a: DenseTensor, b: DenseTensor, axis_pairs: Sequence[Tuple[int, int]]
) -> DenseTensor:
    """Sum over paired axes; result axes are the free axes of ``a`` then of ``b``."""
    axes_a = [pair[0] for pair in axis_pairs]
    axes_b = [pair[1] for pair in axis_pairs]

    for axis_a, axis_b in zip(axes_a, axes_b):
        if not -a.ndim <= axis_a < a.ndim:
            raise IndexError(f"Axis {axis_a} out of range for rank-{a.ndim} tensor")
        if not -b.ndim <= axis_b < b.ndim:
            raise IndexError(f"Axis {axis_b} out of range for rank-{b.ndim} tensor")
        if a.shape[axis_a] != b.shape[axis_b]:
            raise DimensionMismatchError(
                f"Cannot contract axis {axis_a} (extent {a.shape[axis_a]}) "
                f"with axis {axis_b} (extent {b.shape[axis_b]})"
            )

    result = np.tensordot(a, b, axes=(axes_a, axes_b))
    check_finite(result)
    return result


def _split_axes(tensor: DenseTensor, left_axes: Sequence[int]):
    left_axes = [axis % tensor.ndim for axis in left_axes]
    right_axes = [axis for axis in range(tensor.ndim) if axis not in left_axes]
    if not left_axes or not right_axes:
        raise ValueError("Axis partition must have two non-empty groups")
    if len(set(left_axes)) != len(left_axes):
        raise ValueError(f"Repeated axes in partition {left_axes}")

    left_shape = tuple(tensor.shape[axis] for axis in left_axes)
    right_shape = tuple(tensor.shape[axis] for axis in right_axes)
    matrix = np.transpose(tensor, left_axes + right_axes).reshape(
        int(np.prod(left_shape)), int(np.prod(right_shape))
    )
    return matrix, left_shape, right_shape


def _svd(matrix):
    try:
        return la.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except la.LinAlgError:
        return la.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(
    tensor: DenseTensor,
    left_axes: Sequence[int],
    max_rank: int,
    rel_tol: float = 0.0,
) -> TruncatedFactorization:
    """
    Rank-revealing SVD across the partition ``left_axes | remaining axes``.

    Keeps the smallest rank whose relative discarded weight (squared-norm
    fraction) is at most ``rel_tol``, capped at ``max_rank``. Singular values
    below ``SINGULAR_VALUE_CUTOFF`` times the largest one are always dropped.
    """
    if max_rank < 1:
        raise ValueError(f"max_rank must be positive, got {max_rank}")
    if rel_tol < 0:
        raise ValueError(f"rel_tol must be non-negative, got {rel_tol}")
    check_finite(tensor)

    matrix, left_shape, right_shape = _split_axes(tensor, left_axes)
    u, s, vh = _svd(matrix)

    total = float(np.sum(s**2))
    if total == 0.0:
        rank = 1
        discarded = 0.0
    else:
        significant = int(np.sum(s > settings.SINGULAR_VALUE_CUTOFF * s[0]))
        # tail[r] is the weight left out when keeping r values
        tail = np.concatenate((np.cumsum((s**2)[::-1])[::-1], [0.0])) / total
        admissible = np.nonzero(tail[1:] <= rel_tol)[0]
        rank = int(admissible[0]) + 1 if len(admissible) else len(s)
        rank = max(min(rank, max_rank, significant), 1)
        discarded = float(min(max(tail[rank], 0.0), 1.0))

    return TruncatedFactorization(
        left_factor=u[:, :rank].reshape(left_shape + (rank,)),
        singular_values=s[:rank],
        right_factor=vh[:rank, :].reshape((rank,) + right_shape),
        discarded_weight=discarded,
    )


def qr_orthogonalize(
    tensor: DenseTensor, left_axes: Sequence[int]
) -> Tuple[DenseTensor, DenseTensor]:
    """Economic QR across the partition; the first factor is an isometry."""
    check_finite(tensor)
    matrix, left_shape, right_shape = _split_axes(tensor, left_axes)
    q, r = la.qr(matrix, mode="economic")
    rank = q.shape[1]
    return q.reshape(left_shape + (rank,)), r.reshape((rank,) + right_shape)


def frobenius_norm(tensor: DenseTensor) -> float:
    return float(np.linalg.norm(tensor.ravel()))
