"""
Matrix product operators acting on :class:`MpsVector` spaces.

Site tensors have legs ``(left bond, physical out, physical in, right bond)``.
"""

from dataclasses import dataclass, replace
from typing import List, Tuple

import numpy as np
from opt_einsum import contract as einsum

from ensemble_service.exceptions import DimensionMismatchError
from tensors.mps import PHYS_DIMS, MpsVector


@dataclass(frozen=True)
class MpoOperator:
    sites: Tuple[np.ndarray, ...]
    phys_dim: int

    def __post_init__(self):
        object.__setattr__(
            self, "sites", tuple(np.asarray(site, dtype=np.complex128) for site in self.sites)
        )
        MpoOperator.validate_sites(self.sites, self.phys_dim, DimensionMismatchError)

    @staticmethod
    def validate_sites(sites, phys_dim, error_to_raise):
        if phys_dim not in PHYS_DIMS:
            raise error_to_raise(f"Physical dimension must be one of {PHYS_DIMS}")
        for index, site in enumerate(sites):
            if site.ndim != 4 or site.shape[1] != phys_dim or site.shape[2] != phys_dim:
                raise error_to_raise(
                    f"Site {index} has shape {site.shape}, expected (a, {phys_dim}, {phys_dim}, b)"
                )
        if sites[0].shape[0] != 1 or sites[-1].shape[3] != 1:
            raise error_to_raise("Boundary bonds must have extent 1")
        for index in range(len(sites) - 1):
            if sites[index].shape[3] != sites[index + 1].shape[0]:
                raise error_to_raise(
                    f"Bond mismatch between sites {index} and {index + 1}"
                )

    def __len__(self):
        return len(self.sites)

    @property
    def bond_dimensions(self) -> List[int]:
        return [site.shape[3] for site in self.sites[:-1]]

    def scaled(self, factor: float) -> "MpoOperator":
        sites = list(self.sites)
        sites[0] = sites[0] * factor
        return replace(self, sites=tuple(sites))

    def to_dense(self) -> np.ndarray:
        """Dense matrix; only sensible for short chains."""
        dim = self.phys_dim
        result = self.sites[0][0]  # (out, in, right)
        for site in self.sites[1:]:
            result = einsum("oib,bpqc->opiqc", result, site)
            rows, _, cols, _, right = result.shape
            result = result.reshape(rows * dim, cols * dim, right)
        return result[:, :, 0]

    def __str__(self):
        return f"MpoOperator(N={len(self)}, d={self.phys_dim}, bonds={self.bond_dimensions})"


def identity_mpo(num_sites: int, phys_dim: int) -> MpoOperator:
    site = np.eye(phys_dim, dtype=np.complex128).reshape(1, phys_dim, phys_dim, 1)
    return MpoOperator(sites=tuple(site for _ in range(num_sites)), phys_dim=phys_dim)


def apply_mpo(operator: MpoOperator, vector: MpsVector) -> MpsVector:
    """Exact application; output bonds are products of operator and vector bonds."""
    if len(operator) != len(vector) or operator.phys_dim != vector.phys_dim:
        raise DimensionMismatchError(f"Cannot apply {operator} to {vector}")

    sites = []
    for w, a in zip(operator.sites, vector.sites):
        left_w, dim, _, right_w = w.shape
        left_a, _, right_a = a.shape
        site = einsum("wopv,lpr->wlovr", w, a)
        sites.append(site.reshape(left_w * left_a, dim, right_w * right_a))
    return MpsVector(sites=tuple(sites), phys_dim=vector.phys_dim)


def applied_norm_sq(operator: MpoOperator, vector: MpsVector) -> float:
    """``||W v||^2 = <v|W^dagger W|v>`` contracted site by site without forming ``W v``."""
    if len(operator) != len(vector) or operator.phys_dim != vector.phys_dim:
        raise DimensionMismatchError(f"Cannot apply {operator} to {vector}")

    environment = np.ones((1, 1, 1, 1), dtype=np.complex128)
    for w, a in zip(operator.sites, vector.sites):
        environment = einsum(
            "xuvy,xqa,upqb,vprc,yrd->abcd", environment, a.conj(), w.conj(), w, a
        )
    return max(float(environment[0, 0, 0, 0].real), 0.0)
