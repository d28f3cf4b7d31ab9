import copy
import math
from collections import defaultdict

from jsonschema import Draft202012Validator

from ensemble_service import settings
from ensemble_service.exceptions import ConfigValidationError
from experiments.recipes import SCHEDULES, schedule_order
from spinchain.model import InitialState
from spinchain.observables import PAULI

DEFAULT_CONFIG = {
    "name": "experiment",
    "description": "",
    "mode": "mps",
    "model": {
        **settings.DEFAULT_MODEL,
        "margin": settings.ALPHA_MARGIN,
    },
    "sizes": [],
    "initial_states": ["X+"],
    "filter": {
        "M": None,
        "schedules": [],
        "max_bond": 64,
        "rel_tol": settings.REL_TOL,
        "checkpoints": [],
        "abort_weight": settings.ABORT_WEIGHT,
        "stored_degrees": [],
        "literal": False,
    },
    "observables": ["sx", "sz"],
    "oracle": False,
    "thermal": False,
    "osee": True,
    "output_dir": str(settings.OUTPUT_DIR),
    "seed": 0,
    "workers": None,
    "notes": "",
}

_number = {"type": "number"}
_positive_int = {"type": "integer", "minimum": 1}
_int_list = {"type": "array", "items": {"type": "integer", "minimum": 0}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "sizes", "initial_states", "filter", "observables"],
    "properties": {
        "name": {"type": "string", "minLength": 1, "pattern": "^[A-Za-z0-9_.+-]+$"},
        "description": {"type": "string"},
        "mode": {"enum": ["mps", "exact"]},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "J": _number,
                "g": _number,
                "h": _number,
                "margin": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "sizes": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "integer", "minimum": 2},
        },
        "initial_states": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "filter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M": {"type": ["integer", "null"], "minimum": 0},
                "schedules": {"type": "array", "items": {"enum": list(SCHEDULES)}},
                "max_bond": _positive_int,
                "rel_tol": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "checkpoints": _int_list,
                "abort_weight": {"type": "number", "exclusiveMinimum": 0},
                "stored_degrees": _int_list,
                "literal": {"type": "boolean"},
            },
        },
        "observables": {"type": "array", "minItems": 1, "items": {"enum": list(PAULI)}},
        "oracle": {"type": "boolean"},
        "thermal": {"type": "boolean"},
        "osee": {"type": "boolean"},
        "output_dir": {"type": "string", "minLength": 1},
        "seed": {"type": "integer"},
        "workers": {"type": ["integer", "null"], "minimum": 1},
        "notes": {"type": "string"},
    },
}


def merge_defaults(data, defaults=None):
    """Recursively fill missing keys of ``data`` from ``defaults``."""
    merged = copy.deepcopy(DEFAULT_CONFIG if defaults is None else defaults)
    for key, value in (data or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_defaults(value, merged[key])
        else:
            merged[key] = copy.deepcopy(value)
    return merged


NUMERIC_FIELDS = (
    ("model", "J"),
    ("model", "g"),
    ("model", "h"),
    ("model", "margin"),
    ("filter", "rel_tol"),
    ("filter", "abort_weight"),
)


def coerce_numbers(attrs):
    """YAML 1.1 reads exponents without a dot (``1e-8``) as strings."""
    for section, key in NUMERIC_FIELDS:
        section_attrs = attrs.get(section)
        value = section_attrs.get(key) if isinstance(section_attrs, dict) else None
        if isinstance(value, str):
            try:
                attrs[section][key] = float(value)
            except ValueError:
                pass
    return attrs


def _path(error):
    return ".".join(str(part) for part in error.absolute_path) or "non_field_errors"


class ExperimentConfigSerializer:
    schema = CONFIG_SCHEMA

    def __init__(self, data):
        self.initial_data = data
        self._errors = None
        self._validated_data = None

    def is_valid(self, raise_exception=False) -> bool:
        errors = defaultdict(list)
        attrs = coerce_numbers(merge_defaults(self.initial_data))
        for error in Draft202012Validator(self.schema).iter_errors(attrs):
            errors[_path(error)].append(error.message)
        if not errors:
            try:
                attrs = self.validate(attrs)
            except ConfigValidationError as exc:
                errors.update(exc.errors)
        self._errors = dict(errors)
        self._validated_data = None if errors else attrs
        if errors and raise_exception:
            raise ConfigValidationError(self._errors)
        return not errors

    @property
    def errors(self):
        if self._errors is None:
            raise AssertionError("Call is_valid() before accessing errors")
        return self._errors

    @property
    def validated_data(self):
        if self._validated_data is None:
            raise AssertionError("Call is_valid() on valid data before accessing validated_data")
        return self._validated_data

    def validate(self, attrs):
        errors = defaultdict(list)
        filter_attrs = attrs["filter"]

        sizes = sorted(set(attrs["sizes"]))
        for size in sizes:
            if size > settings.MAX_SITES:
                errors["sizes"].append(f"N={size} exceeds the desk-scale limit {settings.MAX_SITES}")
        attrs["sizes"] = sizes

        states = []
        for label in attrs["initial_states"]:
            try:
                states.append(str(InitialState.from_label(label)))
            except ValueError as exc:
                errors["initial_states"].append(str(exc))
        attrs["initial_states"] = list(dict.fromkeys(states))

        order = filter_attrs["M"]
        schedules = filter_attrs["schedules"]
        if (order is None) == (not schedules):
            errors["filter"].append("Set exactly one of filter.M and filter.schedules")
        if order is not None:
            if order % 2:
                errors["filter.M"].append(f"M must be even, got {order}")
            if order > settings.MAX_ORDER:
                errors["filter.M"].append(f"M={order} exceeds the desk-scale limit {settings.MAX_ORDER}")
            for name in ("checkpoints", "stored_degrees"):
                for degree in filter_attrs[name]:
                    if degree > order:
                        errors[f"filter.{name}"].append(f"{degree} exceeds M={order}")
        for schedule in schedules:
            for size in sizes:
                scheduled = schedule_order(schedule, size)
                if scheduled > settings.MAX_ORDER:
                    errors["filter.schedules"].append(
                        f"{schedule} gives M={scheduled} at N={size}, "
                        f"above the desk-scale limit {settings.MAX_ORDER}"
                    )
        for checkpoint in filter_attrs["checkpoints"]:
            if checkpoint % 2:
                errors["filter.checkpoints"].append(f"Checkpoint order {checkpoint} is odd")
        if filter_attrs["max_bond"] > settings.MAX_BOND:
            errors["filter.max_bond"].append(
                f"max_bond={filter_attrs['max_bond']} exceeds the desk-scale limit {settings.MAX_BOND}"
            )

        if attrs["mode"] == "exact":
            if order is None:
                errors["filter.M"].append("Exact sweeps need an explicit M")
            for size in sizes:
                if size > settings.ORACLE_MAX_SITES:
                    errors["sizes"].append(
                        f"Exact sweeps are limited to N <= {settings.ORACLE_MAX_SITES}, got N={size}"
                    )
        if attrs["thermal"] and not attrs["oracle"]:
            errors["thermal"].append("The thermal reference needs oracle: true")

        if errors:
            raise ConfigValidationError(dict(errors))
        return attrs


class RowSerializer:
    """Flat, deterministic text rendering of result rows."""

    fields = ()

    def __init__(self, observables=()):
        self.observables = tuple(observables)

    def get_fields(self):
        return self.fields

    @staticmethod
    def format_value(value):
        if value is None:
            return ""
        if isinstance(value, bool):
            return "1" if value else "0"
        if isinstance(value, float):
            if math.isinf(value):
                return "inf" if value > 0 else "-inf"
            return format(value, ".17g")
        return str(value)

    def to_row(self, data: dict) -> dict:
        return {name: self.format_value(data.get(name)) for name in self.get_fields()}


class RunRowSerializer(RowSerializer):
    """Every row identifies its run so figures can be rebuilt from tables alone."""

    run_fields = ("N", "state", "M", "max_bond", "rel_tol", "alpha")


class CheckpointRowSerializer(RunRowSerializer):
    fields = RunRowSerializer.run_fields + (
        "order",
        "sigma",
        "delta_sq",
        "delta_sq_physical",
        "frobenius_sq",
        "trace_real",
        "trace_imag",
        "trace_expected",
        "osee_half",
        "max_bond_used",
        "cumulative_discarded_weight",
    )
    trailing_fields = ("status", "error")

    def get_fields(self):
        return self.fields + self.observables + self.trailing_fields


class OracleRowSerializer(RunRowSerializer):
    fields = RunRowSerializer.run_fields + (
        "order",
        "sigma",
        "delta_sq_physical",
        "frobenius_sq",
        "osee_half",
        "ipr",
        "energy",
        "beta",
        "degenerate",
    )

    def get_fields(self):
        columns = []
        for label in self.observables:
            columns += [label, f"{label}_gaussian", f"{label}_diagonal", f"{label}_thermal"]
        return self.fields + tuple(columns)


class ExactSweepRowSerializer(RunRowSerializer):
    fields = RunRowSerializer.run_fields + (
        "order",
        "sigma",
        "inverse_delta",
        "delta_sq_physical",
        "frobenius_sq",
        "osee_half",
        "osee_diagonal",
        "ipr",
        "degenerate",
    )

    def get_fields(self):
        columns = []
        for label in self.observables:
            columns += [label, f"{label}_diagonal", f"{label}_error"]
        return self.fields + tuple(columns)


class ProfileRowSerializer(RowSerializer):
    fields = ("degree", "tolerance", "bond", "stored_bond")


class FitRowSerializer(RowSerializer):
    fields = ("x", "y", "slope", "intercept", "r_squared", "range_min", "range_max", "points", "law")
