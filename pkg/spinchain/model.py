"""
Ising chain with transverse and longitudinal fields, open boundaries::

    H = J sum_i Z_i Z_{i+1} + g sum_i X_i + h sum_i Z_i

and its commutator superoperator ``H_C = H (x) 1 - 1 (x) H^T`` on vectorized
operators. Vectorization maps ``rho[s, s']`` on every site to the local index
``k = 2 * s + s'``; the dense helpers below use the same convention.
"""

import enum
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from ensemble_service import settings
from tensors.mpo import MpoOperator
from tensors.mps import MpsVector, product_mps

IDENTITY = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


class InitialState(enum.Enum):
    X_PLUS = "X+"
    X_MINUS = "X-"
    Y_PLUS = "Y+"
    Y_MINUS = "Y-"
    Z_PLUS = "Z+"
    Z_MINUS = "Z-"

    @classmethod
    def from_label(cls, label):
        if isinstance(label, cls):
            return label
        normalized = str(label).strip().upper().replace("P", "+").replace("M", "-")
        for state in cls:
            if state.value == normalized:
                return state
        raise ValueError(f"Unknown initial state {label!r}")

    @property
    def local_vector(self) -> np.ndarray:
        return {
            "X+": np.array([1, 1]) / np.sqrt(2),
            "X-": np.array([1, -1]) / np.sqrt(2),
            "Y+": np.array([1, 1j]) / np.sqrt(2),
            "Y-": np.array([1, -1j]) / np.sqrt(2),
            "Z+": np.array([1, 0]),
            "Z-": np.array([0, 1]),
        }[self.value].astype(np.complex128)

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SpinChainModel:
    J: float
    g: float
    h: float
    N: int
    alpha: float = field(default=0.0)
    norm_bound: float = field(default=0.0)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"A chain needs at least two sites, got N={self.N}")
        bound = commutator_norm_bound(self)
        object.__setattr__(self, "norm_bound", bound)
        if self.alpha == 0.0:
            object.__setattr__(self, "alpha", rescale_alpha(self, settings.ALPHA_MARGIN))
        if bound > 0 and self.alpha * bound > 1.0:
            raise ValueError(
                f"alpha={self.alpha} maps the commutator spectrum outside [-1, 1]"
            )

    @classmethod
    def create(cls, N, J=None, g=None, h=None, margin=None):
        params = dict(settings.DEFAULT_MODEL)
        params.update({key: value for key, value in (("J", J), ("g", g), ("h", h)) if value is not None})
        model = cls(N=N, **params)
        if margin is not None:
            model = model.with_margin(margin)
        return model

    def with_margin(self, margin):
        return SpinChainModel(
            J=self.J, g=self.g, h=self.h, N=self.N, alpha=rescale_alpha(self, margin)
        )

    def __str__(self):
        return f"Ising(J={self.J}, g={self.g}, h={self.h}, N={self.N})"


def commutator_norm_bound(model: SpinChainModel) -> float:
    return 2.0 * ((model.N - 1) * abs(model.J) + model.N * abs(model.g) + model.N * abs(model.h))


def rescale_alpha(model: SpinChainModel, margin: float = settings.ALPHA_MARGIN) -> float:
    """``(1 - margin) / ||H_C||_bound`` with the triangle-inequality bound."""
    if not 0.0 <= margin < 1.0:
        raise ValueError(f"margin must lie in [0, 1), got {margin}")
    bound = commutator_norm_bound(model)
    if bound == 0.0:
        return 1.0 - margin
    return (1.0 - margin) / bound


def _ising_bulk(model: SpinChainModel) -> np.ndarray:
    """Bulk tensor ``W[a, b]`` with channels (start, pending ZZ, done)."""
    bulk = np.zeros((3, 2, 2, 3), dtype=np.complex128)
    bulk[0, :, :, 0] = IDENTITY
    bulk[0, :, :, 1] = SIGMA_Z
    bulk[0, :, :, 2] = model.g * SIGMA_X + model.h * SIGMA_Z
    bulk[1, :, :, 2] = model.J * SIGMA_Z
    bulk[2, :, :, 2] = IDENTITY
    return bulk


def _open_boundaries(bulk: np.ndarray, num_sites: int, phys_dim: int) -> MpoOperator:
    sites = [bulk.copy() for _ in range(num_sites)]
    sites[0] = sites[0][:1]
    sites[-1] = sites[-1][..., -1:]
    return MpoOperator(sites=tuple(sites), phys_dim=phys_dim)


def ising_mpo(model: SpinChainModel) -> MpoOperator:
    return _open_boundaries(_ising_bulk(model), model.N, phys_dim=2)


def commutator_bulk(bulk: np.ndarray) -> np.ndarray:
    """
    Bulk tensor of ``H (x) 1 - 1 (x) H^T`` from the bulk of ``H``.

    The start and done channels are shared by the ket and bra copies; the
    inner channels are duplicated, which gives bond ``2 * chi - 2``.
    """
    chi = bulk.shape[0]
    inner = chi - 2
    dim = 2 * chi - 2
    done = dim - 1

    def ket_channel(a):
        return 0 if a == 0 else (done if a == chi - 1 else a)

    def bra_channel(a):
        return 0 if a == 0 else (done if a == chi - 1 else a + inner)

    result = np.zeros((dim, 4, 4, dim), dtype=np.complex128)
    for a in range(chi):
        for b in range(chi):
            local = bulk[a, :, :, b]
            if not np.any(local):
                continue
            if (a, b) in ((0, 0), (chi - 1, chi - 1)):
                result[ket_channel(a), :, :, ket_channel(b)] = np.kron(IDENTITY, IDENTITY)
                continue
            result[ket_channel(a), :, :, ket_channel(b)] += np.kron(local, IDENTITY)
            # one sign per path: on the transition into the done channel
            sign = -1.0 if b == chi - 1 else 1.0
            result[bra_channel(a), :, :, bra_channel(b)] += sign * np.kron(IDENTITY, local.T)
    return result


def commutator_mpo(model: SpinChainModel, rescaled: bool = False) -> MpoOperator:
    """Commutator MPO on phys_dim 4; ``rescaled`` multiplies by ``model.alpha``."""
    operator = _open_boundaries(commutator_bulk(_ising_bulk(model)), model.N, phys_dim=4)
    return operator.scaled(model.alpha) if rescaled else operator


def product_state(state, num_sites: int) -> MpsVector:
    if num_sites < 2:
        raise ValueError(f"A chain needs at least two sites, got N={num_sites}")
    state = InitialState.from_label(state)
    return product_mps([state.local_vector for _ in range(num_sites)])


def vectorized_density(psi: MpsVector) -> MpsVector:
    """``|psi><psi|`` as a phys_dim-4 product vector with site tensors ``psi_s conj(psi_s')``."""
    if psi.phys_dim != 2:
        raise ValueError("vectorized_density expects a spin state (phys_dim 2)")
    if psi.max_bond != 1:
        raise ValueError("vectorized_density only supports product states")
    local_vectors = []
    for site in psi.sites:
        local = site.reshape(2)
        local_vectors.append(np.kron(local, local.conj()))
    vector = product_mps(local_vectors)
    total = np.prod([np.linalg.norm(local) for local in local_vectors])
    if total == 0:
        raise ValueError("Cannot vectorize a zero state")
    return MpsVector(
        sites=tuple(site / total ** (1.0 / len(vector)) for site in vector.sites), phys_dim=4
    )


def vectorized_op(op, site: int, num_sites: int) -> MpsVector:
    if not 0 <= site < num_sites:
        raise IndexError(f"Site {site} out of range for {num_sites} sites")
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (2, 2):
        raise ValueError(f"Local operator must be 2x2, got shape {op.shape}")
    local_vectors = [IDENTITY.reshape(4) for _ in range(num_sites)]
    local_vectors[site] = op.reshape(4)
    return product_mps(local_vectors)


def vectorized_identity(num_sites: int) -> MpsVector:
    return vectorized_op(IDENTITY, 0, num_sites)


# Dense helpers (small N only)


def local_operator(op, site: int, num_sites: int) -> np.ndarray:
    factors = [np.eye(2)] * num_sites
    factors[site] = op
    return reduce(np.kron, factors)


def dense_hamiltonian(model: SpinChainModel) -> np.ndarray:
    """Kronecker-sum construction; real because only X and Z enter."""
    sx = SIGMA_X.real
    sz = SIGMA_Z.real
    dim = 2**model.N
    hamiltonian = np.zeros((dim, dim))
    for site in range(model.N - 1):
        hamiltonian += model.J * local_operator(sz, site, model.N) @ local_operator(
            sz, site + 1, model.N
        )
    for site in range(model.N):
        hamiltonian += model.g * local_operator(sx, site, model.N)
        hamiltonian += model.h * local_operator(sz, site, model.N)
    return hamiltonian


def dense_state(state, num_sites: int) -> np.ndarray:
    local = InitialState.from_label(state).local_vector
    return reduce(np.kron, [local] * num_sites)


def vectorize_dense(rho: np.ndarray, num_sites: int) -> np.ndarray:
    """Map ``rho[s_1..s_N, s'_1..s'_N]`` to the site-interleaved vector."""
    tensor = np.asarray(rho).reshape((2,) * (2 * num_sites))
    order = [axis for site in range(num_sites) for axis in (site, site + num_sites)]
    return tensor.transpose(order).reshape(-1)


def devectorize_dense(vector: np.ndarray, num_sites: int) -> np.ndarray:
    tensor = np.asarray(vector).reshape((2,) * (2 * num_sites))
    order = list(range(0, 2 * num_sites, 2)) + list(range(1, 2 * num_sites, 2))
    dim = 2**num_sites
    return tensor.transpose(order).reshape(dim, dim)
