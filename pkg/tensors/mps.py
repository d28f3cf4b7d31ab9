"""
Finite matrix product vectors with open boundaries.

Site tensors have legs ``(left bond, physical, right bond)``. A vector with
``phys_dim == 2`` is a pure state of spins; ``phys_dim == 4`` is a vectorized
operator whose local index is ``k = 2 * s_ket + s_bra``. Bond ``c`` sits between
sites ``c - 1`` and ``c``, so a cut at ``c`` leaves ``c`` sites on the left.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from opt_einsum import contract as einsum

from ensemble_service.exceptions import DimensionMismatchError
from tensors.dense import check_finite, qr_orthogonalize, svd_truncate

logger = logging.getLogger(__name__)

PHYS_DIMS = (2, 4)
ISOMETRY_TOL = 1e-10


@dataclass(frozen=True)
class MpsVector:
    sites: Tuple[np.ndarray, ...]
    phys_dim: int
    canonical_center: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(
            self, "sites", tuple(np.asarray(site, dtype=np.complex128) for site in self.sites)
        )
        MpsVector.validate_sites(self.sites, self.phys_dim, DimensionMismatchError)
        if self.canonical_center is not None and not 0 <= self.canonical_center < len(self):
            raise IndexError(f"Canonical center {self.canonical_center} out of range")

    @staticmethod
    def validate_sites(sites, phys_dim, error_to_raise):
        if phys_dim not in PHYS_DIMS:
            raise error_to_raise(f"Physical dimension must be one of {PHYS_DIMS}")
        if len(sites) < 1:
            raise error_to_raise("A vector needs at least one site")
        for index, site in enumerate(sites):
            if site.ndim != 3:
                raise error_to_raise(f"Site {index} has rank {site.ndim}, expected 3")
            if site.shape[1] != phys_dim:
                raise error_to_raise(
                    f"Site {index} has physical extent {site.shape[1]}, expected {phys_dim}"
                )
        if sites[0].shape[0] != 1 or sites[-1].shape[2] != 1:
            raise error_to_raise("Boundary bonds must have extent 1")
        for index in range(len(sites) - 1):
            if sites[index].shape[2] != sites[index + 1].shape[0]:
                raise error_to_raise(
                    f"Bond mismatch between sites {index} and {index + 1}: "
                    f"{sites[index].shape[2]} != {sites[index + 1].shape[0]}"
                )

    def __len__(self):
        return len(self.sites)

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    @property
    def bond_dimensions(self) -> List[int]:
        return [site.shape[2] for site in self.sites[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dimensions, default=1)

    def is_left_isometry(self, index: int) -> bool:
        site = self.sites[index]
        matrix = site.reshape(-1, site.shape[2])
        gram = matrix.conj().T @ matrix
        return np.allclose(gram, np.eye(gram.shape[0]), atol=ISOMETRY_TOL)

    def is_right_isometry(self, index: int) -> bool:
        site = self.sites[index]
        matrix = site.reshape(site.shape[0], -1)
        gram = matrix @ matrix.conj().T
        return np.allclose(gram, np.eye(gram.shape[0]), atol=ISOMETRY_TOL)

    def __str__(self):
        return f"MpsVector(N={len(self)}, d={self.phys_dim}, bonds={self.bond_dimensions})"


def product_mps(local_vectors: Sequence[Sequence[complex]]) -> MpsVector:
    sites = [np.asarray(vector, dtype=np.complex128).reshape(1, -1, 1) for vector in local_vectors]
    return MpsVector(sites=tuple(sites), phys_dim=sites[0].shape[1], canonical_center=None)


def random_mps(num_sites: int, phys_dim: int, bond: int, seed=None, real=False) -> MpsVector:
    rng = np.random.default_rng(seed)
    sites = []
    for index in range(num_sites):
        left = 1 if index == 0 else bond
        right = 1 if index == num_sites - 1 else bond
        shape = (left, phys_dim, right)
        tensor = rng.standard_normal(shape)
        if not real:
            tensor = tensor + 1j * rng.standard_normal(shape)
        sites.append(tensor / np.sqrt(np.prod(shape)))
    return MpsVector(sites=tuple(sites), phys_dim=phys_dim)


def scale(vector: MpsVector, factor: complex) -> MpsVector:
    """Multiply the represented vector by ``factor`` (absorbed on one site)."""
    index = vector.canonical_center if vector.canonical_center is not None else 0
    sites = list(vector.sites)
    sites[index] = sites[index] * factor
    return replace(vector, sites=tuple(sites))


def conjugate_swap(vector: MpsVector) -> MpsVector:
    """Swap ``(s_ket, s_bra)`` on every site and conjugate: the vectorized adjoint."""
    if vector.phys_dim != 4:
        raise DimensionMismatchError("conjugate_swap needs a vectorized operator")
    sites = []
    for site in vector.sites:
        left, _, right = site.shape
        swapped = site.reshape(left, 2, 2, right).transpose(0, 2, 1, 3).reshape(left, 4, right)
        sites.append(swapped.conj())
    return replace(vector, sites=tuple(sites))


def to_dense(vector: MpsVector) -> np.ndarray:
    """Full vector of length ``phys_dim ** N``; site 0 is the most significant index."""
    result = vector.sites[0].reshape(vector.phys_dim, -1)
    for site in vector.sites[1:]:
        result = np.tensordot(result, site, axes=([1], [0]))
        result = result.reshape(-1, site.shape[2])
    return result.reshape(-1)


def canonicalize(vector: MpsVector, center: int) -> MpsVector:
    """Mixed canonical form with the orthogonality center at ``center``."""
    if not 0 <= center < len(vector):
        raise IndexError(f"Site {center} out of range for {len(vector)} sites")

    sites = list(vector.sites)
    for index in range(center):
        q, r = qr_orthogonalize(sites[index], left_axes=(0, 1))
        sites[index] = q
        sites[index + 1] = np.tensordot(r, sites[index + 1], axes=([1], [0]))
    for index in range(len(sites) - 1, center, -1):
        q, r = qr_orthogonalize(sites[index], left_axes=(1, 2))
        sites[index] = q.transpose(2, 0, 1)
        sites[index - 1] = np.tensordot(sites[index - 1], r, axes=([2], [1]))
    return MpsVector(sites=tuple(sites), phys_dim=vector.phys_dim, canonical_center=center)


def compress(
    vector: MpsVector, max_bond: int, rel_tol: float = 0.0
) -> Tuple[MpsVector, float]:
    """
    QR sweep to the right edge, then a truncating SVD sweep back to site 0.

    Each truncation keeps the span of the already truncated right block, so the
    projectors are nested and the returned weight ``1 - prod(1 - w_i)`` equals
    ``1 - <v|v'> / <v|v>`` exactly.
    """
    last = len(vector) - 1
    if vector.canonical_center != last:
        vector = canonicalize(vector, last)

    sites = list(vector.sites)
    kept_fraction = 1.0
    for index in range(last, 0, -1):
        factorization = svd_truncate(sites[index], left_axes=(0,), max_rank=max_bond, rel_tol=rel_tol)
        kept_fraction *= 1.0 - factorization.discarded_weight
        sites[index] = factorization.right_factor
        carry = factorization.left_factor * factorization.singular_values[np.newaxis, :]
        sites[index - 1] = np.tensordot(sites[index - 1], carry, axes=([2], [0]))

    compressed = MpsVector(sites=tuple(sites), phys_dim=vector.phys_dim, canonical_center=0)
    weight = max(1.0 - kept_fraction, 0.0)
    logger.debug(f"Compressed to bonds {compressed.bond_dimensions} (weight {weight:.3e})")
    return compressed, weight


def inner(a: MpsVector, b: MpsVector) -> complex:
    """Exact overlap ``<a|b>``, conjugate-linear in ``a``."""
    if len(a) != len(b) or a.phys_dim != b.phys_dim:
        raise DimensionMismatchError(
            f"Cannot take overlap of {a} and {b}: lengths or physical dimensions differ"
        )
    environment = np.ones((1, 1), dtype=np.complex128)
    for site_a, site_b in zip(a.sites, b.sites):
        environment = einsum("xy,xpz,ypw->zw", environment, site_a.conj(), site_b)
    value = complex(environment[0, 0])
    check_finite(np.asarray(value))
    return value


def norm_sq(vector: MpsVector) -> float:
    return max(inner(vector, vector).real, 0.0)


def norm(vector: MpsVector) -> float:
    return float(np.sqrt(norm_sq(vector)))


def direct_sum(terms: Sequence[Tuple[complex, MpsVector]]) -> MpsVector:
    """Exact representation of ``sum_i c_i |v_i>``; bonds add up."""
    if not terms:
        raise ValueError("Need at least one term")
    first = terms[0][1]
    for _, vector in terms:
        if len(vector) != len(first) or vector.phys_dim != first.phys_dim:
            raise DimensionMismatchError(f"Cannot add {vector} to {first}")

    vectors = [scale(vector, coefficient) for coefficient, vector in terms]
    if len(first) == 1:
        site = sum(vector.sites[0] for vector in vectors)
        return MpsVector(sites=(site,), phys_dim=first.phys_dim)

    sites = [np.concatenate([vector.sites[0] for vector in vectors], axis=2)]
    for index in range(1, len(first) - 1):
        lefts = [vector.sites[index].shape[0] for vector in vectors]
        rights = [vector.sites[index].shape[2] for vector in vectors]
        block = np.zeros((sum(lefts), first.phys_dim, sum(rights)), dtype=np.complex128)
        row, column = 0, 0
        for vector, left, right in zip(vectors, lefts, rights):
            block[row : row + left, :, column : column + right] = vector.sites[index]
            row += left
            column += right
        sites.append(block)
    sites.append(np.concatenate([vector.sites[-1] for vector in vectors], axis=0))
    return MpsVector(sites=tuple(sites), phys_dim=first.phys_dim)


def combine_with_weight(
    terms: Sequence[Tuple[complex, MpsVector]], max_bond: int, rel_tol: float = 0.0
) -> Tuple[MpsVector, float]:
    """Pairwise direct sums, compressing whenever bonds exceed ``2 * max_bond``."""
    kept_fraction = 1.0
    result = direct_sum(terms[:1])
    for term in terms[1:]:
        result = direct_sum([(1.0, result), term])
        if result.max_bond > 2 * max_bond:
            result, weight = compress(result, max_bond, rel_tol)
            kept_fraction *= 1.0 - weight
    result, weight = compress(result, max_bond, rel_tol)
    kept_fraction *= 1.0 - weight
    return result, max(1.0 - kept_fraction, 0.0)


def linear_combine(
    terms: Sequence[Tuple[complex, MpsVector]], max_bond: int, rel_tol: float = 0.0
) -> MpsVector:
    result, _ = combine_with_weight(terms, max_bond, rel_tol)
    return result


@dataclass(frozen=True)
class SchmidtSpectrum:
    cut: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if abs(float(np.sum(self.values**2)) - 1.0) > 1e-10:
            raise ValueError("Schmidt spectrum must be normalized")

    def entropy(self) -> float:
        probabilities = self.values**2
        probabilities = probabilities[probabilities > 0]
        return float(max(-np.sum(probabilities * np.log2(probabilities)), 0.0))


def schmidt_spectrum(vector: MpsVector, cut: int) -> SchmidtSpectrum:
    if not 1 <= cut < len(vector):
        raise IndexError(f"Cut {cut} out of range for {len(vector)} sites")
    centered = canonicalize(vector, cut - 1)
    factorization = svd_truncate(
        centered.sites[cut - 1],
        left_axes=(0, 1),
        max_rank=centered.sites[cut - 1].shape[2] * centered.phys_dim,
        rel_tol=0.0,
    )
    values = factorization.singular_values
    total = np.linalg.norm(values)
    if total == 0.0:
        raise ValueError("Schmidt spectrum of a zero vector is undefined")
    return SchmidtSpectrum(cut=cut, values=values / total)


def entanglement_entropy(vector: MpsVector, cut: int) -> float:
    return schmidt_spectrum(vector, cut).entropy()


def osee(vector: MpsVector, cut: Optional[int] = None) -> float:
    """Operator space entanglement entropy (base 2) of a vectorized operator."""
    if vector.phys_dim != 4:
        raise DimensionMismatchError("OSEE is defined for vectorized operators (phys_dim 4)")
    if len(vector) == 1:
        return 0.0
    if cut is None:
        cut = len(vector) // 2
    return entanglement_entropy(vector, cut)
