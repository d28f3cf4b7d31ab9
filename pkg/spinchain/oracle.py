"""
Dense exact-diagonalization reference for short chains.

Density matrices are kept in the energy eigenbasis whenever possible; the
computational basis is only needed for the operator space entanglement entropy.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence

import numpy as np
import scipy.linalg as la
from scipy.integrate import trapezoid
from scipy.optimize import brentq
from scipy.special import logsumexp

from ensemble_service import settings
from ensemble_service.exceptions import OracleSizeError
from filtering.kernel import scalar_filter
from spinchain.model import (
    SpinChainModel,
    dense_hamiltonian,
    vectorize_dense,
)

logger = logging.getLogger(__name__)

COMPUTATIONAL = "computational"
ENERGY = "energy"


@dataclass(frozen=True)
class SpectralDecomposition:
    energies: np.ndarray
    eigenvectors: np.ndarray
    num_sites: int

    @property
    def dimension(self) -> int:
        return len(self.energies)

    def coefficients(self, psi0: np.ndarray) -> np.ndarray:
        """Amplitudes ``c_n = <E_n|psi0>``."""
        return self.eigenvectors.conj().T @ np.asarray(psi0, dtype=np.complex128)

    def gaps(self) -> np.ndarray:
        return self.energies[:, np.newaxis] - self.energies[np.newaxis, :]

    def operator_in_energy_basis(self, op, site: int) -> np.ndarray:
        """``<E_m|O|E_n>`` for a single-site operator, without building ``O`` densely."""
        vectors = self.eigenvectors
        n = self.num_sites
        tensor = vectors.reshape(2**site, 2, 2 ** (n - site - 1), self.dimension)
        applied = np.einsum("ab,ibjk->iajk", np.asarray(op), tensor).reshape(vectors.shape)
        return vectors.conj().T @ applied

    def operator_diagonal(self, op, site: int) -> np.ndarray:
        vectors = self.eigenvectors
        n = self.num_sites
        tensor = vectors.reshape(2**site, 2, 2 ** (n - site - 1), self.dimension)
        applied = np.einsum("ab,ibjk->iajk", np.asarray(op), tensor).reshape(vectors.shape)
        return np.einsum("ik,ik->k", vectors.conj(), applied)


@dataclass(frozen=True)
class DenseDensity:
    matrix: np.ndarray
    basis: str = COMPUTATIONAL

    def __post_init__(self):
        if self.basis not in (COMPUTATIONAL, ENERGY):
            raise ValueError(f"Unknown basis {self.basis!r}")

    def to_energy_basis(self, spec: SpectralDecomposition) -> "DenseDensity":
        if self.basis == ENERGY:
            return self
        vectors = spec.eigenvectors
        return DenseDensity(vectors.conj().T @ self.matrix @ vectors, basis=ENERGY)

    def to_computational_basis(self, spec: SpectralDecomposition) -> "DenseDensity":
        if self.basis == COMPUTATIONAL:
            return self
        vectors = spec.eigenvectors
        return DenseDensity(vectors @ self.matrix @ vectors.conj().T, basis=COMPUTATIONAL)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @property
    def frobenius_sq(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))

    def is_hermitian(self, atol=1e-10) -> bool:
        return np.allclose(self.matrix, self.matrix.conj().T, atol=atol)


def check_size(num_sites: int, error_to_raise=OracleSizeError):
    if num_sites > settings.ORACLE_MAX_SITES:
        raise error_to_raise(
            f"Dense oracle is limited to N <= {settings.ORACLE_MAX_SITES}, got N={num_sites}"
        )


def diagonalize(model: SpinChainModel) -> SpectralDecomposition:
    check_size(model.N)
    energies, vectors = la.eigh(dense_hamiltonian(model))
    logger.debug(f"Diagonalized {model}: E in [{energies[0]:.6f}, {energies[-1]:.6f}]")
    return SpectralDecomposition(energies=energies, eigenvectors=vectors, num_sites=model.N)


def degeneracy_flag(spec: SpectralDecomposition, gap=settings.DEGENERACY_GAP) -> bool:
    """True when two levels are closer than ``gap``: the filtered limit is then block diagonal."""
    flagged = bool(np.any(np.diff(spec.energies) < gap))
    if flagged:
        logger.warning(f"Near-degenerate levels (gap < {gap}); diagonal ensemble is block diagonal")
    return flagged


def pure_density(psi0: np.ndarray, spec: Optional[SpectralDecomposition] = None) -> DenseDensity:
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if spec is None:
        return DenseDensity(np.outer(psi0, psi0.conj()), basis=COMPUTATIONAL)
    c = spec.coefficients(psi0)
    return DenseDensity(np.outer(c, c.conj()), basis=ENERGY)


def _check_normalized(psi0):
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"Initial state must be normalized, norm is {norm}")


def diagonal_ensemble(psi0: np.ndarray, spec: SpectralDecomposition) -> DenseDensity:
    _check_normalized(psi0)
    weights = np.abs(spec.coefficients(psi0)) ** 2
    return DenseDensity(np.diag(weights).astype(np.complex128), basis=ENERGY)


def _apply_gap_filter(rho0: DenseDensity, spec, weights: np.ndarray) -> DenseDensity:
    rho = rho0.to_energy_basis(spec)
    return DenseDensity(rho.matrix * weights, basis=ENERGY)


def gaussian_filter_exact(rho0: DenseDensity, sigma: float, spec) -> DenseDensity:
    """Multiply entry ``(n, m)`` by ``exp(-(E_n - E_m)^2 / (2 sigma^2))``."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if np.isinf(sigma):
        return rho0.to_energy_basis(spec)
    return _apply_gap_filter(rho0, spec, np.exp(-spec.gaps() ** 2 / (2.0 * sigma**2)))


def chebyshev_filter_exact(
    rho0: DenseDensity, M: int, alpha: float, spec, literal: bool = False
) -> DenseDensity:
    """Multiply entry ``(n, m)`` by the scalar series ``q_M(alpha (E_n - E_m))``."""
    scaled = alpha * spec.gaps()
    if np.max(np.abs(scaled)) >= 1.0:
        raise ValueError("alpha * max|E_n - E_m| must be below 1")
    return _apply_gap_filter(rho0, spec, scalar_filter(scaled, M, literal=literal))


def frobenius_off_diagonal(rho: DenseDensity, spec) -> float:
    matrix = rho.to_energy_basis(spec).matrix
    return float(np.sum(np.abs(matrix) ** 2) - np.sum(np.abs(np.diag(matrix)) ** 2))


def ipr(psi0: np.ndarray, spec: SpectralDecomposition) -> float:
    return float(np.sum(np.abs(spec.coefficients(psi0)) ** 4))


def energy_expectation(psi0: np.ndarray, spec: SpectralDecomposition) -> float:
    weights = np.abs(spec.coefficients(psi0)) ** 2
    return float(np.sum(weights * spec.energies))


def expectation_dense(rho: DenseDensity, op, site: int, spec: SpectralDecomposition) -> float:
    """``tr(O rho) / tr(rho)`` for a single-site operator."""
    matrix = rho.to_energy_basis(spec).matrix
    op_energy = spec.operator_in_energy_basis(op, site)
    value = np.sum(matrix * op_energy.T) / np.trace(matrix)
    return float(value.real)


def delta_squared_dense(rho: DenseDensity, spec, alpha: float = 1.0) -> float:
    """``<rho|H_C^2|rho> / <rho|rho>`` with ``H_C`` scaled by ``alpha``."""
    matrix = rho.to_energy_basis(spec).matrix
    weights = np.abs(matrix) ** 2
    return float(np.sum(weights * (alpha * spec.gaps()) ** 2) / np.sum(weights))


def _canonical_energy(beta: float, energies: np.ndarray) -> float:
    log_weights = -beta * energies
    weights = np.exp(log_weights - logsumexp(log_weights))
    return float(np.sum(weights * energies))


def thermal_reference(
    model: SpinChainModel,
    target_energy: float,
    observables: Optional[Mapping[str, tuple]] = None,
    spec: Optional[SpectralDecomposition] = None,
):
    """
    Solve ``<H>_beta = target_energy`` for beta and return the thermal values of
    ``observables`` (label -> (operator, site)).
    """
    spec = spec or diagonalize(model)
    energies = spec.energies
    if not energies[0] < target_energy < energies[-1]:
        raise ValueError(
            f"Energy {target_energy} outside the canonical range ({energies[0]}, {energies[-1]})"
        )

    def residual(beta):
        return _canonical_energy(beta, energies) - target_energy

    low, high = -1.0, 1.0
    while residual(low) <= 0:
        low *= 2.0
        if low < -1e6:
            raise ValueError(f"Cannot bracket beta for energy {target_energy}")
    while residual(high) >= 0:
        high *= 2.0
        if high > 1e6:
            raise ValueError(f"Cannot bracket beta for energy {target_energy}")
    # <H>_beta decreases with beta, so the bracket has one root
    assert residual(low) > 0 > residual(high)

    beta = brentq(residual, low, high, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    error = abs(residual(beta))
    if error > 1e-10 * model.N:
        logger.warning(f"Thermal energy mismatch {error:.3e} for beta={beta}")

    log_weights = -beta * energies
    weights = np.exp(log_weights - logsumexp(log_weights))
    values = {}
    for label, (op, site) in (observables or {}).items():
        values[label] = float(np.sum(weights * spec.operator_diagonal(op, site).real))
    return beta, values


def osee_exact(rho: DenseDensity, cut: int, spec: Optional[SpectralDecomposition] = None) -> float:
    """OSEE (base 2) of the normalized vectorized ``rho`` across ``cut``."""
    if rho.basis == ENERGY:
        if spec is None:
            raise ValueError("A spectral decomposition is needed to leave the energy basis")
        rho = rho.to_computational_basis(spec)
    dim = rho.matrix.shape[0]
    num_sites = int(round(np.log2(dim)))
    if not 1 <= cut < num_sites:
        raise IndexError(f"Cut {cut} out of range for {num_sites} sites")
    vector = vectorize_dense(rho.matrix, num_sites)
    vector = vector / np.linalg.norm(vector)
    values = la.svdvals(vector.reshape(4**cut, -1))
    probabilities = values**2
    probabilities = probabilities[probabilities > 1e-300]
    return float(max(-np.sum(probabilities * np.log2(probabilities)), 0.0))


def diagonal_osee(psi0: np.ndarray, spec: SpectralDecomposition, cut: int) -> float:
    return osee_exact(diagonal_ensemble(psi0, spec), cut, spec)


def time_average(
    psi0: np.ndarray,
    spec: SpectralDecomposition,
    observables: Mapping[str, tuple],
    window: float = 1e4,
    dt: float = 0.1,
    chunk: int = 4096,
) -> Dict[str, float]:
    """Trapezoidal average of ``<psi(t)|O|psi(t)>`` over ``[0, window]``."""
    c = spec.coefficients(psi0)
    times = np.arange(0.0, window + 0.5 * dt, dt)
    operators = {
        label: spec.operator_in_energy_basis(op, site) for label, (op, site) in observables.items()
    }
    averages = {}
    for label, op_energy in operators.items():
        values = np.empty(len(times))
        for start in range(0, len(times), chunk):
            stop = min(start + chunk, len(times))
            amplitudes = c[np.newaxis, :] * np.exp(
                -1j * np.outer(times[start:stop], spec.energies)
            )
            values[start:stop] = np.sum((amplitudes.conj() @ op_energy) * amplitudes, axis=1).real
        averages[label] = float(trapezoid(values, times) / (times[-1] - times[0]))
    return averages


def filtered_states(
    psi0: np.ndarray, spec: SpectralDecomposition, orders: Sequence[int], alpha: float, literal=False
):
    rho0 = pure_density(psi0, spec)
    for order in orders:
        yield order, chebyshev_filter_exact(rho0, order, alpha, spec, literal=literal)
