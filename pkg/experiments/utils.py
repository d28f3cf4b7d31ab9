import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from scipy import stats

from ensemble_service import settings
from ensemble_service.exceptions import ConfigValidationError
from tensors.mps import MpsVector, compress

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    range: Tuple[float, float]
    points: int

    def __str__(self):
        return f"slope={self.slope:.4f} r^2={self.r_squared:.4f} on [{self.range[0]}, {self.range[1]}]"


def _select(xs, ys, range):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have the same length")
    mask = np.ones(xs.shape, dtype=bool)
    if range is not None:
        low, high = range
        mask &= (xs >= low) & (xs <= high)
    xs, ys = xs[mask], ys[mask]
    if len(xs) < 3:
        raise ValueError(f"Need at least 3 points in range, got {len(xs)}")
    return xs, ys


def _line(xs, ys, fit_xs, fit_ys) -> FitResult:
    fit = stats.linregress(fit_xs, fit_ys)
    r_squared = min(max(fit.rvalue**2, 0.0), 1.0)
    return FitResult(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(r_squared),
        range=(float(xs.min()), float(xs.max())),
        points=len(xs),
    )


def fit_power_law(xs, ys, range: Optional[Tuple[float, float]] = None) -> FitResult:
    """Least-squares line through ``(log x, log y)`` restricted to ``range`` on x."""
    xs, ys = _select(xs, ys, range)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("Power-law fits need positive values")
    return _line(xs, ys, np.log(xs), np.log(ys))


def fit_linear(xs, ys, range: Optional[Tuple[float, float]] = None) -> FitResult:
    """Least-squares line through ``(x, y)`` restricted to ``range`` on x."""
    xs, ys = _select(xs, ys, range)
    return _line(xs, ys, xs, ys)


def write_table(path, fields: Sequence[str], rows: Iterable[Dict[str, str]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as stream:
        writer = csv.DictWriter(stream, fieldnames=list(fields), delimiter=settings.TABLE_DELIMITER)
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"Wrote {path}")
    return path


def read_table(path) -> List[Dict[str, str]]:
    with open(path, newline="") as stream:
        return list(csv.DictReader(stream, delimiter=settings.TABLE_DELIMITER))


def column(rows, name: str, where: Optional[Dict[str, str]] = None) -> np.ndarray:
    """Float values of ``name`` over rows matching every ``where`` entry; empty cells are skipped."""
    values = []
    for row in rows:
        if name not in row:
            raise KeyError(f"Table has no column {name!r}")
        if where and any(row.get(key) != value for key, value in where.items()):
            continue
        if row[name] != "":
            values.append(float(row[name]))
    return np.asarray(values)


def paired_columns(rows, x: str, y: str, where=None) -> Tuple[np.ndarray, np.ndarray]:
    selected = [
        row
        for row in rows
        if row.get(x, "") != "" and row.get(y, "") != ""
        and not (where and any(row.get(key) != value for key, value in where.items()))
    ]
    return column(selected, x), column(selected, y)


def load_config(path) -> dict:
    with open(path) as stream:
        data = yaml.safe_load(stream)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigValidationError(f"{path} must hold a mapping of sections")
    return data


def parse_overrides(args: Sequence[str]) -> Dict[str, object]:
    """``--filter.M=64`` style arguments to ``{"filter.M": 64}`` with YAML typing."""
    overrides = {}
    for arg in args:
        if not arg.startswith("--") or "=" not in arg:
            raise ConfigValidationError({"overrides": [f"Expected --key=value, got {arg!r}"]})
        key, raw = arg[2:].split("=", 1)
        if not key:
            raise ConfigValidationError({"overrides": [f"Empty key in {arg!r}"]})
        overrides[key] = yaml.safe_load(raw) if raw else ""
    return overrides


def apply_overrides(data: dict, overrides: Dict[str, object]) -> dict:
    data = dict(data)
    for key, value in overrides.items():
        target = data
        parts = key.split(".")
        for part in parts[:-1]:
            child = target.get(part)
            child = dict(child) if isinstance(child, dict) else {}
            target[part] = child
            target = child
        target[parts[-1]] = value
    return data


def required_bond(vector: MpsVector, tolerance: float) -> int:
    """Smallest bond whose compression deficit ``1 - <v|v'>/<v|v>`` is at most ``tolerance``."""
    low, high = 1, max(vector.max_bond, 1)
    if compress(vector, low)[1] <= tolerance:
        return low
    while high - low > 1:
        middle = (low + high) // 2
        _, weight = compress(vector, middle)
        if weight <= tolerance:
            high = middle
        else:
            low = middle
    return high


def truncation_profile(vectors: Dict[int, MpsVector], tolerances: Sequence[float]) -> List[dict]:
    rows = []
    for degree in sorted(vectors):
        vector = vectors[degree]
        for tolerance in tolerances:
            bond = required_bond(vector, tolerance)
            rows.append(
                {
                    "degree": degree,
                    "tolerance": float(tolerance),
                    "bond": bond,
                    "stored_bond": vector.max_bond,
                }
            )
            logger.debug(f"Degree {degree}: tolerance {tolerance:.1e} needs bond {bond}")
    return rows


def gather_runs(experiment_dir, table: str, columns: Sequence[str]) -> List[dict]:
    """
    First row of ``table`` from every successful run in the experiment manifest,
    restricted to ``columns``. Per-run constants such as ``osee_diagonal`` become
    one point per (N, state).
    """
    experiment_dir = Path(experiment_dir)
    with open(experiment_dir / "manifest.yaml") as stream:
        manifest = yaml.safe_load(stream)
    rows = []
    for summary in manifest["runs"]:
        if summary["status"] != "ok":
            logger.warning(f"Skipping failed run {summary['name']}")
            continue
        table_rows = read_table(experiment_dir / summary["name"] / table)
        if not table_rows:
            continue
        first = table_rows[0]
        for name in columns:
            if name not in first:
                raise KeyError(f"{table} of {summary['name']} has no column {name!r}")
        rows.append({name: first[name] for name in columns})
    return rows
