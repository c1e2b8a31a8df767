"""
JSON and CSV formats of the command-line frontend.

Floats are written with `repr` precision in JSON and `%.17g` in CSV, so files
read back bit-exactly. Non-finite floats are written as `null`.
"""

import functools
import hashlib
import json
import logging
import math
from collections.abc import Callable, Mapping
from pathlib import Path
from typing import Any

import numpy as np

from .dma import DmaProblem, SolutionReport
from .exceptions import ValidationError
from .momentlib import (
    DiracMixture,
    MomentTable,
    ScalarGaussian,
    ScalarGaussianMixture,
    Weighting,
)
from .multiindex import as_multi_index
from .pwcdensity import PwcDensity, heights
from .solver import SolverOptions

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"

type Density = ScalarGaussian | ScalarGaussianMixture | DiracMixture


def _reads[**P, R](what: str) -> Callable[[Callable[P, R]], Callable[P, R]]:
    """Reports wrongly typed JSON values in `what` as a ValidationError."""

    def decorate(func: Callable[P, R]) -> Callable[P, R]:
        @functools.wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> R:
            try:
                return func(*args, **kwargs)
            except ValidationError:
                raise
            except (AttributeError, TypeError, ValueError) as exc:
                raise ValidationError(f"Malformed {what}: {exc}") from exc

        return wrapper

    return decorate


def _require(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if not isinstance(obj, Mapping):
        raise ValidationError(f"Expected a JSON object for {where}.")
    if key not in obj:
        raise ValidationError(f"Missing key '{key}' in {where}.")
    return obj[key]


def to_jsonable(value: Any) -> Any:
    """Plain JSON types from numpy scalars and arrays; NaN and inf become None."""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, ensure_ascii=False) + "\n"


def digest(obj: Any) -> str:
    """SHA-256 of the canonical (sorted, compact) JSON form of `obj`."""
    canonical = json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_json(path: Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path: Path) -> Any:
    """Parses a JSON file; `json.JSONDecodeError` carries the parse diagnostic."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


# --- Moment tables and problems ---


def table_to_json(table: MomentTable) -> dict[str, Any]:
    return {
        "dim": table.dim,
        "order": table.order,
        "entries": [
            {"index": kappa.to_json(), "value": value}
            for kappa, value in table.entries.items()
        ],
    }


def _entries(items: Any, dim: int, where: str) -> dict:
    if not isinstance(items, list):
        raise ValidationError(f"Expected a list of moment entries in {where}.")
    entries = {}
    for item in items:
        index = as_multi_index(tuple(_require(item, "index", where)))
        if index.dim != dim:
            raise ValidationError(
                f"Index {list(index.exponents)} in {where} does not have "
                f"dimension {dim}."
            )
        if index in entries:
            raise ValidationError(
                f"Duplicate index {list(index.exponents)} in {where}."
            )
        entries[index] = float(_require(item, "value", where))
    return entries


@_reads("moment table")
def table_from_json(obj: Mapping[str, Any]) -> MomentTable:
    dim = int(_require(obj, "dim", "moment table"))
    entries = _entries(_require(obj, "entries", "moment table"), dim, "moment table")
    order = obj.get("order")
    return MomentTable.from_values(dim, entries, None if order is None else int(order))


def _weighting_to_json(weighting: Weighting) -> Any:
    if weighting is None or isinstance(weighting, str):
        return weighting
    return [{"index": k.to_json(), "weight": w} for k, w in weighting.items()]


def _weighting_from_json(obj: Any) -> Weighting:
    if obj is None or isinstance(obj, str):
        return obj
    return {
        as_multi_index(tuple(_require(item, "index", "weighting"))): float(
            _require(item, "weight", "weighting")
        )
        for item in obj
    }


def problem_to_json(problem: DmaProblem) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "dim": problem.dim,
        "L": problem.L,
        "symmetric": problem.symmetric,
        "mean": problem.prescribed_mean,
        "moments": table_to_json(problem.target)["entries"],
        "order": problem.target.order,
        "weights": problem.weights,
        "weighting": _weighting_to_json(problem.weighting),
        "solver": problem.opts.to_dict(),
    }
    return to_jsonable(obj)


@_reads("problem")
def problem_from_json(obj: Mapping[str, Any]) -> DmaProblem:
    """Reads the problem schema; "mean" is required exactly when symmetric."""
    dim = int(_require(obj, "dim", "problem"))
    L = int(_require(obj, "L", "problem"))
    symmetric = bool(obj.get("symmetric", False))
    mean = obj.get("mean")
    if symmetric and mean is None:
        raise ValidationError("Symmetric problems need a 'mean'.")

    entries = _entries(_require(obj, "moments", "problem"), dim, "problem moments")
    order = obj.get("order")
    if order is not None:
        order = int(order)
    target = MomentTable.from_values(dim, entries, order)
    weights = obj.get("weights")
    return DmaProblem(
        dim=dim,
        L=L,
        target=target,
        symmetric=symmetric,
        prescribed_mean=None if mean is None else np.asarray(mean, dtype=float),
        weights=None if weights is None else np.asarray(weights, dtype=float),
        opts=SolverOptions.from_mapping(obj.get("solver")),
        weighting=_weighting_from_json(obj.get("weighting")),
    )


# --- Solutions ---


def report_to_json(report: SolutionReport, problem: DmaProblem) -> dict[str, Any]:
    obj = {
        "case": str(report.case),
        "method": report.method,
        "seed": report.seed,
        "converged": report.converged,
        "message": report.trace.message,
        "moment_residual_norm": report.moment_residual_norm,
        "entropy": report.entropy,
        "mixture": {
            "locations": report.mixture.locations,
            "weights": report.mixture.weights,
        },
        "diameters": report.diameters,
        "residuals": [
            {"index": kappa.to_json(), "value": value}
            for kappa, value in report.residuals
        ],
        "target": table_to_json(problem.target),
        "options": problem.opts.to_dict(),
        "trace": report.trace.to_dict(),
    }
    return to_jsonable(obj)


@_reads("solution")
def solution_from_json(
    obj: Mapping[str, Any],
) -> tuple[DiracMixture, np.ndarray | None, MomentTable | None, float]:
    """Mixture, diameters, target table and slack of a written solution."""
    mixture_obj = _require(obj, "mixture", "solution")
    locations = np.asarray(_require(mixture_obj, "locations", "solution"), dtype=float)
    weights = np.asarray(_require(mixture_obj, "weights", "solution"), dtype=float)
    mixture = DiracMixture(locations, weights, check_distinct=False)

    diameters = obj.get("diameters")
    if diameters is not None:
        diameters = np.asarray(diameters, dtype=float)
    target = table_from_json(obj["target"]) if obj.get("target") else None
    eps_slack = float(obj.get("options", {}).get("eps_slack", 0.0))
    return mixture, diameters, target, eps_slack


@_reads("density spec")
def density_from_json(obj: Mapping[str, Any]) -> Density:
    """
    Reads a density spec. A written solution (it has a "mixture" key) counts
    as a Dirac mixture.
    """
    if isinstance(obj, Mapping) and "mixture" in obj:
        mixture, _, _, _ = solution_from_json(obj)
        return mixture

    kind = _require(obj, "type", "density spec")
    if kind == "gaussian":
        return ScalarGaussian(
            float(_require(obj, "mean", "gaussian")),
            float(_require(obj, "std", "gaussian")),
        )
    if kind == "gaussian-mixture":
        components = tuple(
            (
                float(_require(c, "weight", "gaussian-mixture component")),
                ScalarGaussian(
                    float(_require(c, "mean", "gaussian-mixture component")),
                    float(_require(c, "std", "gaussian-mixture component")),
                ),
            )
            for c in _require(obj, "components", "gaussian-mixture")
        )
        return ScalarGaussianMixture(components)
    if kind == "dirac-mixture":
        locations = np.asarray(_require(obj, "locations", "dirac-mixture"), dtype=float)
        if locations.ndim == 1:
            locations = locations[:, None]
        if obj.get("weights") is None:
            return DiracMixture.equally_weighted(locations)
        return DiracMixture(locations, np.asarray(obj["weights"], dtype=float))
    raise ValidationError(
        f"Unknown density type '{kind}'; expected gaussian, gaussian-mixture or "
        "dirac-mixture."
    )


# --- CSV ---


def _write_csv(path: Path, columns: list[str], data: np.ndarray) -> None:
    np.savetxt(
        path, data, fmt=CSV_FORMAT, delimiter=",", header=",".join(columns), comments=""
    )


def _coordinate_columns(dim: int) -> list[str]:
    return [f"x{k + 1}" for k in range(dim)]


def write_points_csv(
    path: Path, mixture: DiracMixture, diameters: np.ndarray | None
) -> None:
    """Columns x1..xN, d, w; d is nan when no diameters exist."""
    d = np.full(mixture.size, np.nan) if diameters is None else diameters
    data = np.column_stack([mixture.locations, d, mixture.weights])
    _write_csv(path, [*_coordinate_columns(mixture.dim), "d", "w"], data)


def write_pwc_csv(path: Path, density: PwcDensity) -> None:
    """Columns x1..xN, d, w, h with h the constant density on each sphere."""
    mixture = density.mixture
    data = np.column_stack(
        [mixture.locations, density.diameters, mixture.weights, heights(density)]
    )
    _write_csv(path, [*_coordinate_columns(mixture.dim), "d", "w", "h"], data)


def write_curve_csv(path: Path, columns: list[str], data: np.ndarray) -> None:
    _write_csv(path, columns, np.asarray(data, dtype=float))
