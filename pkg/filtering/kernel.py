"""
Jackson-damped Chebyshev series of the delta function at zero.

Only even degrees carry weight::

    Q_M = sum_k (-1)^k (2 - [k == 0]) / pi * gamma_{2k}^M * T_{2k}(x)
"""

import math
from typing import List

import numpy as np
from numpy.polynomial import chebyshev


def _check_order(m, M):
    if M < 0:
        raise ValueError(f"Series order must be non-negative, got M={M}")
    if not 0 <= m <= M:
        raise ValueError(f"Degree {m} outside [0, {M}]")


def jackson_coeff(m: int, M: int, literal: bool = False) -> float:
    """
    Jackson kernel coefficient gamma_m^M.

    The default is the kernel-polynomial form with ``cot(pi / (M + 1))`` on the
    sine term; ``literal=True`` uses ``cos(pi / (M + 1))`` instead.
    """
    _check_order(m, M)
    step = math.pi / (M + 1)
    tail = math.cos(step) if literal else math.cos(step) / math.sin(step)
    return ((M - m + 1) * math.cos(m * step) + math.sin(m * step) * tail) / (M + 1)


def series_coeff(k: int, M: int, literal: bool = False) -> float:
    _check_order(2 * k, M)
    sign = -1.0 if k % 2 else 1.0
    weight = 1.0 if k == 0 else 2.0
    return sign * weight / math.pi * jackson_coeff(2 * k, M, literal=literal)


def chebyshev_coefficients(M: int, literal: bool = False) -> np.ndarray:
    """Coefficients of ``T_0 .. T_M`` in the series (odd degrees are zero)."""
    coefficients = np.zeros(M + 1)
    for k in range(M // 2 + 1):
        coefficients[2 * k] = series_coeff(k, M, literal=literal)
    return coefficients


def scalar_filter(x, M: int, literal: bool = False):
    """Evaluate ``q_M(x)`` on ``x`` in ``[-1, 1]`` by Clenshaw recurrence."""
    return chebyshev.chebval(np.asarray(x, dtype=float), chebyshev_coefficients(M, literal))


def rescaled_width(M: int) -> float:
    if M < 2:
        raise ValueError(f"Width is defined for M >= 2, got M={M}")
    return math.sqrt(math.pi) / M


def sigma_for_order(M: int, alpha: float) -> float:
    """Physical width ``sqrt(pi) / (M alpha)`` of the Gaussian approximated by Q_M."""
    return rescaled_width(M) / alpha


def _peak_terms(M: int, literal: bool) -> List[float]:
    # series_coeff(k, M) * T_2k(0), with T_2k(0) = (-1)^k
    return [series_coeff(k, M, literal=literal) * (-1.0 if k % 2 else 1.0) for k in range(M // 2 + 1)]


def peak_value(M: int, literal: bool = False) -> float:
    """
    ``q_M(0)``.

    ``<1|H_C = 0`` gives ``<1|T_m(H_C)|rho> = T_m(0) <1|rho>``, so this is also
    the trace of the filtered state of a unit-trace input.
    """
    return math.fsum(_peak_terms(M, literal))


def kernel_width(M: int, literal: bool = False) -> float:
    """
    Width of the Gaussian osculating ``q_M`` at its peak, ``sqrt(-q(0) / q''(0))``.

    Uses ``T_2k''(0) = -4 k^2 (-1)^k``.
    """
    if M < 2:
        raise ValueError(f"Width is defined for M >= 2, got M={M}")
    terms = _peak_terms(M, literal)
    curvature = -math.fsum(4.0 * k**2 * value for k, value in enumerate(terms))
    return math.sqrt(-math.fsum(terms) / curvature)


def checkpoint_schedule(M: int, start: int = 16) -> List[int]:
    """Even orders 16, 24, 32, 48, 64, 96, ... up to ``M``, always ending with ``M``."""
    orders = []
    base = start
    while base <= M:
        for order in (base, base * 3 // 2):
            if order <= M and order % 2 == 0:
                orders.append(order)
        base *= 2
    if not orders or orders[-1] != M:
        orders.append(M)
    return sorted(set(orders))
