"""Measurements on vectorized (filtered) density matrices held as MPS."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ensemble_service import settings
from ensemble_service.exceptions import DegenerateNormalizationError, DimensionMismatchError
from spinchain.model import IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, vectorized_identity, vectorized_op
from tensors.mpo import MpoOperator, applied_norm_sq
from tensors.mps import MpsVector, inner, norm_sq

logger = logging.getLogger(__name__)

PAULI = {
    "sx": SIGMA_X,
    "sy": SIGMA_Y,
    "sz": SIGMA_Z,
    "identity": IDENTITY,
}


def mid_chain_site(num_sites: int) -> int:
    """Zero-based index of site ``floor(N / 2)`` counted from 1."""
    return max(num_sites // 2 - 1, 0)


@dataclass(frozen=True)
class ObservableSpec:
    label: str
    operator: np.ndarray = field(repr=False)
    site: Optional[int] = None

    def __post_init__(self):
        operator = np.asarray(self.operator, dtype=np.complex128)
        ObservableSpec.validate_operator(operator, ValueError)
        object.__setattr__(self, "operator", operator)

    @staticmethod
    def validate_operator(operator, error_to_raise):
        if operator.shape != (2, 2):
            raise error_to_raise(f"Observable must be a 2x2 matrix, got {operator.shape}")
        if not np.allclose(operator, operator.conj().T, atol=1e-12):
            raise error_to_raise("Observable must be Hermitian")

    @classmethod
    def from_label(cls, label: str, site: Optional[int] = None) -> "ObservableSpec":
        try:
            return cls(label=label, operator=PAULI[label], site=site)
        except KeyError:
            raise ValueError(
                f"Unknown observable {label!r}; choose from {', '.join(PAULI)}"
            ) from None

    def site_for(self, num_sites: int) -> int:
        return mid_chain_site(num_sites) if self.site is None else self.site

    def __str__(self):
        return self.label


def trace_overlap(rho: MpsVector) -> complex:
    """``<1|rho>``, the trace of the devectorized operator."""
    return inner(vectorized_identity(len(rho)), rho)


def frobenius_sq(rho: MpsVector) -> float:
    return norm_sq(rho)


def expectation_with_residue(rho: MpsVector, spec: ObservableSpec) -> Tuple[float, float]:
    """``tr(O rho) / tr(rho)`` as (real part, imaginary residue)."""
    if rho.phys_dim != 4:
        raise DimensionMismatchError("Expectations need a vectorized operator (phys_dim 4)")
    trace = trace_overlap(rho)
    scale = np.sqrt(frobenius_sq(rho))
    if abs(trace) < 1e-12 * scale or scale == 0.0:
        raise DegenerateNormalizationError(
            f"Vanishing trace |<1|rho>| = {abs(trace):.3e} for ||rho|| = {scale:.3e}"
        )
    numerator = inner(vectorized_op(spec.operator, spec.site_for(len(rho)), len(rho)), rho)
    value = numerator / trace
    if abs(value.imag) > settings.IMAGINARY_RESIDUE_TOL * max(abs(value.real), 1.0):
        logger.warning(f"Observable {spec.label} has imaginary residue {value.imag:.3e}")
    return float(value.real), float(value.imag)


def expectation(rho: MpsVector, spec: ObservableSpec) -> float:
    value, _ = expectation_with_residue(rho, spec)
    return value


def measure(rho: MpsVector, specs) -> Dict[str, float]:
    return {spec.label: expectation(rho, spec) for spec in specs}


def delta_squared(rho: MpsVector, h_c: MpoOperator, alpha: float) -> Tuple[float, float]:
    """
    Off-diagonal width ``||H_C rho||^2 / ||rho||^2`` for the rescaled commutator
    ``h_c`` and its physical value divided by ``alpha^2``.
    """
    norm = frobenius_sq(rho)
    if norm == 0.0:
        raise DegenerateNormalizationError("delta_squared of a zero vector")
    rescaled = applied_norm_sq(h_c, rho) / norm
    return rescaled, rescaled / alpha**2
