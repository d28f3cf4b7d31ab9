"""
Chebyshev recurrence on vectorized density matrices.

``T_{m+1} = 2 H_C T_m - T_{m-1}`` is run once up to degree ``M``. Every
scheduled checkpoint order ``c`` owns an accumulator that collects
``sum_{2k <= c} series_coeff(k, c) T_{2k}``, so the state reported at a
checkpoint is the full filter of order ``c``, not a partial sum of order ``M``.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

from ensemble_service import settings
from ensemble_service.exceptions import DimensionMismatchError, TruncationBudgetExceeded
from filtering.kernel import checkpoint_schedule, series_coeff
from spinchain.observables import ObservableSpec, delta_squared, frobenius_sq, measure, trace_overlap
from tensors import storage
from tensors.mpo import MpoOperator, apply_mpo
from tensors.mps import MpsVector, combine_with_weight, compress, osee, scale

logger = logging.getLogger(__name__)


def _merge_weights(*weights: float) -> float:
    kept = 1.0
    for weight in weights:
        kept *= 1.0 - weight
    return max(1.0 - kept, 0.0)


@dataclass(frozen=True)
class FilterConfig:
    M: int
    max_bond: int
    rel_tol: float = settings.REL_TOL
    checkpoint_orders: Tuple[int, ...] = ()
    abort_weight: float = settings.ABORT_WEIGHT
    stored_degrees: Tuple[int, ...] = ()
    literal: bool = False
    alpha: float = 1.0
    observables: Tuple[ObservableSpec, ...] = ()

    def __post_init__(self):
        FilterConfig.validate(self, ValueError)
        orders = self.checkpoint_orders
        if not orders:
            orders = checkpoint_schedule(self.M) if self.M else (0,)
        object.__setattr__(self, "checkpoint_orders", tuple(sorted(set(orders) | {self.M})))
        object.__setattr__(self, "stored_degrees", tuple(sorted(set(self.stored_degrees))))
        object.__setattr__(self, "observables", tuple(self.observables))

    @staticmethod
    def validate(cfg, error_to_raise):
        if cfg.M < 0 or cfg.M % 2:
            raise error_to_raise(f"M must be even and non-negative, got {cfg.M}")
        if cfg.max_bond < 1:
            raise error_to_raise(f"max_bond must be positive, got {cfg.max_bond}")
        if not 0.0 <= cfg.rel_tol < 1.0:
            raise error_to_raise(f"rel_tol must lie in [0, 1), got {cfg.rel_tol}")
        if cfg.alpha <= 0.0:
            raise error_to_raise(f"alpha must be positive, got {cfg.alpha}")
        for order in cfg.checkpoint_orders:
            if order % 2 or not 0 <= order <= cfg.M:
                raise error_to_raise(f"Checkpoint order {order} is not an even order in [0, {cfg.M}]")
        for degree in cfg.stored_degrees:
            if not 0 <= degree <= cfg.M:
                raise error_to_raise(f"Stored degree {degree} outside [0, {cfg.M}]")


@dataclass(frozen=True)
class CheckpointRecord:
    order: int
    delta_sq: float
    delta_sq_physical: float
    frobenius_sq: float
    trace: complex
    osee_half: float
    observables: Dict[str, float]
    max_bond_used: int
    cumulative_discarded_weight: float

    def to_dict(self) -> dict:
        data = asdict(self)
        data["trace"] = [self.trace.real, self.trace.imag]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "CheckpointRecord":
        data = dict(data)
        real, imag = data.pop("trace")
        return cls(trace=complex(real, imag), **data)


@dataclass
class FilterRun:
    order: int
    t_prev: Optional[MpsVector]
    t_curr: MpsVector
    accumulators: Dict[int, MpsVector]
    accumulator_weights: Dict[int, float] = field(default_factory=dict)
    order_done: int = 0
    discarded_weight: float = 0.0
    checkpoints: List[CheckpointRecord] = field(default_factory=list)
    stored: Dict[int, MpsVector] = field(default_factory=dict)

    @property
    def accumulator(self) -> MpsVector:
        return self.accumulators[self.order]

    @property
    def is_complete(self) -> bool:
        return self.order_done >= self.order

    @property
    def max_bond_used(self) -> int:
        vectors = [self.t_curr, *self.accumulators.values()]
        if self.t_prev is not None:
            vectors.append(self.t_prev)
        return max(vector.max_bond for vector in vectors)

    def save(self, path, metadata=None):
        networks = {"t_curr": self.t_curr}
        if self.t_prev is not None:
            networks["t_prev"] = self.t_prev
        for order, vector in self.accumulators.items():
            networks[f"acc_{order}"] = vector
        for degree, vector in self.stored.items():
            networks[f"stored_{degree}"] = vector
        header = {
            "order": self.order,
            "order_done": self.order_done,
            "discarded_weight": self.discarded_weight,
            "accumulator_weights": {str(key): value for key, value in self.accumulator_weights.items()},
            "checkpoints": [record.to_dict() for record in self.checkpoints],
            "extra": metadata or {},
        }
        return storage.save_networks(path, networks, header)

    @classmethod
    def load(cls, path) -> "FilterRun":
        networks, header = storage.load_networks(path)

        def collect(prefix):
            return {
                int(name[len(prefix):]): vector
                for name, vector in networks.items()
                if name.startswith(prefix)
            }

        return cls(
            order=header["order"],
            t_prev=networks.get("t_prev"),
            t_curr=networks["t_curr"],
            accumulators=collect("acc_"),
            accumulator_weights={int(key): value for key, value in header["accumulator_weights"].items()},
            order_done=header["order_done"],
            discarded_weight=header["discarded_weight"],
            checkpoints=[CheckpointRecord.from_dict(record) for record in header["checkpoints"]],
            stored=collect("stored_"),
        )


def record_checkpoint(run: FilterRun, order: int, h_c: MpoOperator, cfg: FilterConfig) -> CheckpointRecord:
    rho = run.accumulators[order]
    rescaled, physical = delta_squared(rho, h_c, cfg.alpha)
    record = CheckpointRecord(
        order=order,
        delta_sq=rescaled,
        delta_sq_physical=physical,
        frobenius_sq=frobenius_sq(rho),
        trace=trace_overlap(rho),
        osee_half=osee(rho),
        observables=measure(rho, cfg.observables),
        max_bond_used=max(rho.max_bond, run.max_bond_used),
        cumulative_discarded_weight=_merge_weights(
            run.discarded_weight, run.accumulator_weights.get(order, 0.0)
        ),
    )
    run.checkpoints.append(record)
    logger.info(
        f"Checkpoint M={order}: delta^2={physical:.6e} |rho|^2={record.frobenius_sq:.6e} "
        f"bond={record.max_bond_used} weight={record.cumulative_discarded_weight:.3e}"
    )
    return record


def _accumulate(run: FilterRun, degree: int, vector: MpsVector, cfg: FilterConfig):
    k = degree // 2
    for order in cfg.checkpoint_orders:
        if order < degree:
            continue
        coefficient = series_coeff(k, order, literal=cfg.literal)
        updated, weight = combine_with_weight(
            [(1.0, run.accumulators[order]), (coefficient, vector)], cfg.max_bond, cfg.rel_tol
        )
        run.accumulators[order] = updated
        run.accumulator_weights[order] = _merge_weights(run.accumulator_weights.get(order, 0.0), weight)


def _check_budget(run: FilterRun, cfg: FilterConfig):
    if run.discarded_weight > cfg.abort_weight:
        logger.warning(
            f"Aborting at order {run.order_done}: discarded weight {run.discarded_weight:.3e}"
        )
        raise TruncationBudgetExceeded(run.order_done, run.discarded_weight, cfg.abort_weight)


def advance(run: FilterRun, h_c: MpoOperator, cfg: FilterConfig) -> FilterRun:
    """Compute ``T_{m+1}`` from ``T_m`` and ``T_{m-1}`` and fold it into the accumulators."""
    if run.is_complete:
        raise ValueError(f"Run already reached order {run.order}")
    degree = run.order_done + 1
    image = apply_mpo(h_c, run.t_curr)
    if run.t_prev is None:
        new, weight = compress(image, cfg.max_bond, cfg.rel_tol)
    else:
        new, weight = combine_with_weight([(2.0, image), (-1.0, run.t_prev)], cfg.max_bond, cfg.rel_tol)
    run.discarded_weight = _merge_weights(run.discarded_weight, weight)
    run.t_prev, run.t_curr, run.order_done = run.t_curr, new, degree
    logger.debug(f"Degree {degree}: bonds {new.bond_dimensions} weight {weight:.3e}")

    if degree in cfg.stored_degrees:
        run.stored[degree] = new
    _check_budget(run, cfg)

    if degree % 2 == 0:
        _accumulate(run, degree, new, cfg)
        if degree in cfg.checkpoint_orders:
            record_checkpoint(run, degree, h_c, cfg)
    return run


def start_filter(rho0: MpsVector, cfg: FilterConfig) -> FilterRun:
    """Degree-0 state: ``T_0 = rho0`` and every accumulator at ``rho0 / pi``."""
    if rho0.phys_dim != 4:
        raise DimensionMismatchError("The filter acts on vectorized operators (phys_dim 4)")
    base = scale(rho0, series_coeff(0, 0))
    run = FilterRun(
        order=cfg.M,
        t_prev=None,
        t_curr=rho0,
        accumulators={order: base for order in cfg.checkpoint_orders},
        accumulator_weights={order: 0.0 for order in cfg.checkpoint_orders},
    )
    if 0 in cfg.stored_degrees:
        run.stored[0] = rho0
    return run


def resume_filter(run: FilterRun, h_c: MpoOperator, cfg: FilterConfig) -> FilterRun:
    while not run.is_complete:
        advance(run, h_c, cfg)
    return run


def run_filter(rho0: MpsVector, h_c: MpoOperator, cfg: FilterConfig) -> FilterRun:
    logger.info(f"Filtering {len(rho0)} sites to order M={cfg.M} (max_bond={cfg.max_bond})")
    run = start_filter(rho0, cfg)
    if 0 in cfg.checkpoint_orders:
        record_checkpoint(run, 0, h_c, cfg)
    return resume_filter(run, h_c, cfg)
