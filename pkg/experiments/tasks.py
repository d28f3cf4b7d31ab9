"""
Work units executed by the worker pool.

Each task receives a plain dict payload, owns its run directory and returns a
summary dict; nothing is shared between tasks.
"""

import logging
import math
from pathlib import Path

import numpy as np
import yaml

from ensemble_service import settings
from ensemble_service.exceptions import DegenerateNormalizationError, TruncationBudgetExceeded
from experiments.serializers import (
    CheckpointRowSerializer,
    ExactSweepRowSerializer,
    OracleRowSerializer,
)
from experiments.utils import write_table
from filtering.kernel import checkpoint_schedule, peak_value, sigma_for_order
from filtering.recurrence import FilterConfig, record_checkpoint, resume_filter, start_filter
from spinchain import oracle
from spinchain.model import (
    SpinChainModel,
    commutator_mpo,
    dense_state,
    product_state,
    vectorized_density,
)
from spinchain.observables import ObservableSpec

logger = logging.getLogger(__name__)

RUN_FAILURES = (
    TruncationBudgetExceeded,
    DegenerateNormalizationError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


def run_label(num_sites: int, state: str, order: int, schedule=None) -> str:
    state = state.replace("+", "p").replace("-", "m")
    suffix = f"_{schedule}" if schedule else ""
    return f"N{num_sites}_{state}_M{order}{suffix}"


def build_model(config: dict, num_sites: int) -> SpinChainModel:
    params = config["model"]
    return SpinChainModel.create(
        num_sites, J=params["J"], g=params["g"], h=params["h"], margin=params["margin"]
    )


def observable_specs(config: dict):
    return [ObservableSpec.from_label(label) for label in config["observables"]]


def checkpoint_orders(config: dict, order: int):
    requested = [value for value in config["filter"]["checkpoints"] if value <= order]
    if not requested:
        requested = checkpoint_schedule(order) if order else [0]
    return tuple(sorted(set(requested) | {order}))


def order_sigma(order: int, alpha: float) -> float:
    return math.inf if order < 2 else sigma_for_order(order, alpha)


def _run_columns(model: SpinChainModel, state: str, order: int, config: dict) -> dict:
    return {
        "N": model.N,
        "state": state,
        "M": order,
        "max_bond": config["filter"]["max_bond"],
        "rel_tol": float(config["filter"]["rel_tol"]),
        "alpha": model.alpha,
    }


def checkpoint_row(record, run_columns: dict, alpha: float, literal: bool = False) -> dict:
    row = dict(run_columns)
    row.update(
        order=record.order,
        sigma=order_sigma(record.order, alpha),
        delta_sq=record.delta_sq,
        delta_sq_physical=record.delta_sq_physical,
        frobenius_sq=record.frobenius_sq,
        trace_real=record.trace.real,
        trace_imag=record.trace.imag,
        trace_expected=peak_value(record.order, literal=literal),
        osee_half=record.osee_half,
        max_bond_used=record.max_bond_used,
        cumulative_discarded_weight=record.cumulative_discarded_weight,
        status="ok",
        error="",
    )
    row.update(record.observables)
    return row


def oracle_rows(model, state, orders, specs, config, run_columns):
    """Dense reference values for each checkpoint order of one run."""
    spec = oracle.diagonalize(model)
    degenerate = oracle.degeneracy_flag(spec)
    psi0 = dense_state(state, model.N)
    rho0 = oracle.pure_density(psi0, spec)
    rho_d = oracle.diagonal_ensemble(psi0, spec)
    energy = oracle.energy_expectation(psi0, spec)
    observables = {item.label: (item.operator, item.site_for(model.N)) for item in specs}

    beta, thermal = None, {}
    if config["thermal"]:
        try:
            beta, thermal = oracle.thermal_reference(model, energy, observables, spec)
        except ValueError as exc:
            logger.warning(f"No thermal reference for {model}: {exc}")

    shared = dict(run_columns, ipr=oracle.ipr(psi0, spec), energy=energy, beta=beta, degenerate=degenerate)
    rows = []
    for order in orders:
        rho = oracle.chebyshev_filter_exact(
            rho0, order, model.alpha, spec, literal=config["filter"]["literal"]
        )
        sigma = order_sigma(order, model.alpha)
        gaussian = oracle.gaussian_filter_exact(rho0, sigma, spec)
        row = dict(
            shared,
            order=order,
            sigma=sigma,
            delta_sq_physical=oracle.delta_squared_dense(rho, spec),
            frobenius_sq=rho.frobenius_sq,
            osee_half=_exact_osee(rho, spec, config),
        )
        for label, (op, site) in observables.items():
            row[label] = oracle.expectation_dense(rho, op, site, spec)
            row[f"{label}_gaussian"] = oracle.expectation_dense(gaussian, op, site, spec)
            row[f"{label}_diagonal"] = oracle.expectation_dense(rho_d, op, site, spec)
            row[f"{label}_thermal"] = thermal.get(label)
        rows.append(row)
    return rows


def _exact_osee(rho, spec, config):
    if not config["osee"] or spec.num_sites > settings.ORACLE_OSEE_MAX_SITES:
        return None
    return oracle.osee_exact(rho, spec.num_sites // 2, spec)


def exact_sweep(model: SpinChainModel, state: str, orders, specs, config: dict):
    """
    Dense filtering sweep over ``orders``: delta, norm, observables and their
    distance to the diagonal ensemble, plus the OSEE when enabled.
    """
    spec = oracle.diagonalize(model)
    degenerate = oracle.degeneracy_flag(spec)
    psi0 = dense_state(state, model.N)
    rho_d = oracle.diagonal_ensemble(psi0, spec)
    observables = {item.label: (item.operator, item.site_for(model.N)) for item in specs}
    diagonal = {
        label: oracle.expectation_dense(rho_d, op, site, spec) for label, (op, site) in observables.items()
    }
    shared = dict(
        _run_columns(model, state, max(orders), config),
        max_bond=None,
        rel_tol=None,
        ipr=oracle.ipr(psi0, spec),
        osee_diagonal=_exact_osee(rho_d, spec, config),
        degenerate=degenerate,
    )

    rows = []
    filtered = oracle.filtered_states(
        psi0, spec, orders, model.alpha, literal=config["filter"]["literal"]
    )
    for order, rho in filtered:
        delta_sq = oracle.delta_squared_dense(rho, spec)
        row = dict(
            shared,
            order=order,
            sigma=order_sigma(order, model.alpha),
            inverse_delta=1.0 / math.sqrt(delta_sq) if delta_sq > 0 else math.inf,
            delta_sq_physical=delta_sq,
            frobenius_sq=rho.frobenius_sq,
            osee_half=_exact_osee(rho, spec, config),
        )
        for label, (op, site) in observables.items():
            value = oracle.expectation_dense(rho, op, site, spec)
            row[label] = value
            row[f"{label}_diagonal"] = diagonal[label]
            row[f"{label}_error"] = abs(value - diagonal[label])
        rows.append(row)
    return rows


def _model_summary(model: SpinChainModel) -> dict:
    return {"J": model.J, "g": model.g, "h": model.h, "alpha": model.alpha, "norm_bound": model.norm_bound}


def _write_manifest(path: Path, data: dict):
    with open(path, "w") as stream:
        yaml.safe_dump(data, stream, sort_keys=True)


def execute_run(payload: dict) -> dict:
    """Filter one (N, state, M) combination and write its tables under ``run_dir``."""
    config = payload["config"]
    num_sites, state, order = payload["N"], payload["state"], payload["M"]
    run_dir = Path(payload["run_dir"])
    run_dir.mkdir(parents=True, exist_ok=True)

    model = build_model(config, num_sites)
    specs = observable_specs(config)
    run_columns = _run_columns(model, state, order, config)
    filter_attrs = config["filter"]
    cfg = FilterConfig(
        M=order,
        max_bond=filter_attrs["max_bond"],
        rel_tol=filter_attrs["rel_tol"],
        checkpoint_orders=checkpoint_orders(config, order),
        abort_weight=filter_attrs["abort_weight"],
        stored_degrees=tuple(degree for degree in filter_attrs["stored_degrees"] if degree <= order),
        literal=filter_attrs["literal"],
        alpha=model.alpha,
        observables=tuple(specs),
    )
    logger.info(f"Starting run {run_dir.name}: {model}, state {state}, alpha={model.alpha:.6e}")

    rho0 = vectorized_density(product_state(state, num_sites))
    h_c = commutator_mpo(model, rescaled=True)
    run = start_filter(rho0, cfg)
    status, error = "ok", ""
    try:
        if 0 in cfg.checkpoint_orders:
            record_checkpoint(run, 0, h_c, cfg)
        resume_filter(run, h_c, cfg)
    except RUN_FAILURES as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"
        logger.warning(f"Run {run_dir.name} failed: {error}")

    serializer = CheckpointRowSerializer(observables=[item.label for item in specs])
    rows = [
        serializer.to_row(checkpoint_row(record, run_columns, model.alpha, cfg.literal))
        for record in run.checkpoints
    ]
    if status != "ok":
        rows.append(serializer.to_row(dict(run_columns, order=run.order_done, status=status, error=error)))
    files = ["checkpoints.tsv", "state.npz"]
    write_table(run_dir / "checkpoints.tsv", serializer.get_fields(), rows)
    run.save(run_dir / "state.npz", metadata={"N": num_sites, "state": state, "alpha": model.alpha})

    if config["oracle"] and num_sites <= settings.ORACLE_MAX_SITES:
        oracle_serializer = OracleRowSerializer(observables=[item.label for item in specs])
        reference = oracle_rows(model, state, cfg.checkpoint_orders, specs, config, run_columns)
        write_table(
            run_dir / "oracle.tsv",
            oracle_serializer.get_fields(),
            [oracle_serializer.to_row(row) for row in reference],
        )
        files.append("oracle.tsv")

    summary = {
        "name": run_dir.name,
        "mode": "mps",
        "N": num_sites,
        "state": state,
        "M": order,
        "schedule": payload.get("schedule"),
        "status": status,
        "error": error,
        "run_dir": str(run_dir),
    }
    _write_manifest(
        run_dir / "manifest.yaml",
        dict(
            summary,
            model=_model_summary(model),
            filter={
                "max_bond": cfg.max_bond,
                "rel_tol": cfg.rel_tol,
                "checkpoints": list(cfg.checkpoint_orders),
                "abort_weight": cfg.abort_weight,
                "literal": cfg.literal,
            },
            order_done=run.order_done,
            discarded_weight=float(run.discarded_weight),
            files=files,
            seed=config["seed"],
            notes=config["notes"],
        ),
    )
    logger.info(f"Finished run {run_dir.name} with status {status}")
    return summary


def execute_exact(payload: dict) -> dict:
    """Dense sweep for one (N, state) combination."""
    config = payload["config"]
    num_sites, state, order = payload["N"], payload["state"], payload["M"]
    run_dir = Path(payload["run_dir"])
    run_dir.mkdir(parents=True, exist_ok=True)

    model = build_model(config, num_sites)
    specs = observable_specs(config)
    orders = checkpoint_orders(config, order)
    serializer = ExactSweepRowSerializer(observables=[item.label for item in specs])
    rows = exact_sweep(model, state, orders, specs, config)
    write_table(run_dir / "exact.tsv", serializer.get_fields(), [serializer.to_row(row) for row in rows])

    summary = {
        "name": run_dir.name,
        "mode": "exact",
        "N": num_sites,
        "state": state,
        "M": order,
        "schedule": None,
        "status": "ok",
        "error": "",
        "run_dir": str(run_dir),
    }
    _write_manifest(
        run_dir / "manifest.yaml",
        dict(
            summary,
            model=_model_summary(model),
            orders=list(orders),
            files=["exact.tsv"],
            seed=config["seed"],
            notes=config["notes"],
        ),
    )
    return summary
