"""Cause distributions from tabular demographic data.

Encodes mixed cause variables (numeric, binned numeric, categorical) into
real vectors suitable for the L1 ground metric, builds per-unit discrete
distributions from count tables, and estimates the Lipschitz constant of
the conditional-outcome map from survey microdata or gridded samples.

Categorical variables use a half-hot encoding: the active level's
coordinate is 1/2 and the rest are 0, so two distinct levels are at L1
distance exactly 1 whatever the level count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import SchemaViolationError
from .ot import AtomSet, DiscreteDistribution

__all__ = [
    "Variable",
    "CausesSchema",
    "SurveyMicrodata",
    "GridSamples",
    "LipschitzEstimate",
    "one_half_hot",
    "encode_cause_point",
    "build_distributions",
    "estimate_lipschitz",
]

KINDS = ("numeric", "categorical", "binned_numeric")


@dataclass(frozen=True)
class Variable:
    """One cause variable: its name, kind, and kind-specific metadata."""

    name: str
    kind: str
    levels: Optional[tuple[str, ...]] = None
    bin_edges: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.levels:
                raise ValueError(f"variable {self.name!r}: categorical needs levels")
            if len(set(self.levels)) != len(self.levels):
                raise ValueError(f"variable {self.name!r}: duplicate levels")
            object.__setattr__(self, "levels", tuple(self.levels))
        elif self.kind == "binned_numeric":
            edges = tuple(float(e) for e in (self.bin_edges or ()))
            if len(edges) < 2 or any(
                b <= a for a, b in zip(edges, edges[1:])
            ):
                raise ValueError(
                    f"variable {self.name!r}: bin_edges must be >= 2 strictly "
                    "increasing values"
                )
            object.__setattr__(self, "bin_edges", edges)

    @property
    def width(self) -> int:
        """Number of encoded coordinates this variable occupies."""
        return len(self.levels) if self.kind == "categorical" else 1


@dataclass(frozen=True)
class CausesSchema:
    """Ordered cause variables plus per-output-coordinate scale multipliers."""

    variables: tuple[Variable, ...]
    scale: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        variables = tuple(self.variables)
        if not variables:
            raise ValueError("schema needs at least one variable")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names in schema")
        object.__setattr__(self, "variables", variables)
        if self.scale is not None:
            sc = tuple(float(s) for s in self.scale)
            if len(sc) != self.dimension:
                raise ValueError(
                    f"scale has {len(sc)} entries for {self.dimension} "
                    "encoded coordinates"
                )
            if any(s <= 0 for s in sc):
                raise ValueError("scale multipliers must be positive")
            object.__setattr__(self, "scale", sc)

    @property
    def dimension(self) -> int:
        return sum(v.width for v in self.variables)

    @property
    def scale_vector(self) -> np.ndarray:
        if self.scale is None:
            return np.ones(self.dimension)
        return np.asarray(self.scale, dtype=np.float64)


def one_half_hot(level_index: int, k: int) -> np.ndarray:
    """Half-hot encoding: coordinate level_index is 1/2, the rest 0."""
    if not 0 <= level_index < k:
        raise ValueError(f"level index {level_index} out of range for {k} levels")
    v = np.zeros(k)
    v[level_index] = 0.5
    return v


def _encode_variable(var: Variable, value) -> np.ndarray:
    if var.kind == "numeric":
        x = float(value)
        if not np.isfinite(x):
            raise SchemaViolationError(f"variable {var.name!r}: non-finite value")
        return np.array([x])
    if var.kind == "binned_numeric":
        x = float(value)
        edges = var.bin_edges
        if not edges[0] <= x <= edges[-1]:
            raise SchemaViolationError(
                f"variable {var.name!r}: value {x!r} outside bins "
                f"[{edges[0]}, {edges[-1]}]"
            )
        idx = min(int(np.searchsorted(edges, x, side="right")) - 1, len(edges) - 2)
        idx = max(idx, 0)
        return np.array([(edges[idx] + edges[idx + 1]) / 2.0])
    levels = var.levels
    value = str(value)
    if value not in levels:
        raise SchemaViolationError(
            f"variable {var.name!r}: unknown level {value!r} "
            f"(expected one of {', '.join(levels)})"
        )
    return one_half_hot(levels.index(value), len(levels))


def encode_cause_point(
    values: Union[Mapping[str, object], Sequence[object]],
    schema: CausesSchema,
) -> np.ndarray:
    """Encode one observation's cause values into a real vector.

    Numeric values pass through, binned numerics map to their bin midpoint,
    categoricals map to half-hot blocks; the concatenation is multiplied by
    the schema's scale factors.  values may be a mapping keyed by variable
    name or a sequence in schema order.
    """
    if isinstance(values, Mapping):
        missing = [v.name for v in schema.variables if v.name not in values]
        if missing:
            raise SchemaViolationError(
                f"missing cause value(s): {', '.join(missing)}"
            )
        parts = [_encode_variable(v, values[v.name]) for v in schema.variables]
    else:
        if len(values) != len(schema.variables):
            raise SchemaViolationError(
                f"{len(values)} values for {len(schema.variables)} variables"
            )
        parts = [
            _encode_variable(v, x) for v, x in zip(schema.variables, values)
        ]
    return np.concatenate(parts) * schema.scale_vector


def build_distributions(
    table: Iterable[tuple],
    schema: CausesSchema,
) -> dict[str, DiscreteDistribution]:
    """Per-unit cause distributions from rows of (unit, values, weight).

    Rows with identical encoded cause points accumulate their weights.  All
    units share one atom set spanning the union of observed cause points,
    ordered lexicographically by coordinates, so the result is invariant to
    the input row order.
    """
    masses: dict[str, dict[bytes, float]] = {}
    points: dict[bytes, np.ndarray] = {}
    unit_order: list[str] = []
    for row_no, row in enumerate(table):
        try:
            unit, values, weight = row
        except ValueError as exc:
            raise ValueError(
                f"row {row_no}: expected (unit, values, weight)"
            ) from exc
        weight = float(weight)
        if not np.isfinite(weight) or weight < 0:
            raise ValueError(
                f"row {row_no}: weight must be finite and non-negative"
            )
        x = encode_cause_point(values, schema)
        key = x.tobytes()
        points.setdefault(key, x)
        if unit not in masses:
            masses[unit] = {}
            unit_order.append(unit)
        cell = masses[unit]
        cell[key] = cell.get(key, 0.0) + weight
    if not points:
        raise ValueError("empty cause table")
    pts = np.vstack([points[k] for k in sorted(points)])
    order = np.lexsort(pts.T[::-1])  # lexicographic by coordinate
    pts = pts[order]
    atom_set = AtomSet(pts)
    index = {pt.tobytes(): i for i, pt in enumerate(atom_set.points)}
    out: dict[str, DiscreteDistribution] = {}
    for unit in unit_order:
        probs = np.zeros(len(atom_set))
        for key, mass in masses[unit].items():
            probs[index[key]] += mass
        if probs.sum() <= 0:
            raise SchemaViolationError(f"unit {unit!r} has zero total mass")
        out[unit] = DiscreteDistribution(atom_set, probs)
    return out


# ---------------------------------------------------------------------------
# Lipschitz estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LipschitzEstimate:
    """Largest observed outcome change per unit of L1 cause distance."""

    ell: float
    n_pairs: int
    argmax_pair: tuple[np.ndarray, np.ndarray]

    def __post_init__(self) -> None:
        if self.ell < 0:
            raise ValueError("ell must be non-negative")


class SurveyMicrodata:
    """Individual rows of cause values with an outcome and optional weight."""

    def __init__(
        self,
        schema: CausesSchema,
        rows: Iterable[tuple],
    ) -> None:
        encoded = []
        outcomes = []
        weights = []
        for row_no, row in enumerate(rows):
            if len(row) == 2:
                values, outcome = row
                weight = 1.0
            elif len(row) == 3:
                values, outcome, weight = row
            else:
                raise ValueError(
                    f"row {row_no}: expected (values, outcome[, weight])"
                )
            outcome = float(outcome)
            weight = float(weight)
            if not np.isfinite(outcome):
                raise ValueError(f"row {row_no}: outcome must be finite")
            if not np.isfinite(weight) or weight < 0:
                raise ValueError(
                    f"row {row_no}: weight must be finite and non-negative"
                )
            encoded.append(encode_cause_point(values, schema))
            outcomes.append(outcome)
            weights.append(weight)
        if not encoded:
            raise ValueError("survey has no rows")
        self.schema = schema
        self.points = np.vstack(encoded)
        self.outcomes = np.asarray(outcomes)
        self.weights = np.asarray(weights)

    def __len__(self) -> int:
        return self.points.shape[0]

    def cell_means(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct encoded points with their (weighted) mean outcomes."""
        keys = [p.tobytes() for p in self.points]
        first: dict[bytes, int] = {}
        for i, k in enumerate(keys):
            first.setdefault(k, i)
        uniq = sorted(first, key=lambda k: first[k])
        sums = {k: 0.0 for k in uniq}
        mass = {k: 0.0 for k in uniq}
        for k, y, w in zip(keys, self.outcomes, self.weights):
            sums[k] += w * y
            mass[k] += w
        pts = []
        means = []
        for k in uniq:
            if mass[k] <= 0:
                continue  # all-zero-weight cell carries no information
            pts.append(self.points[first[k]])
            means.append(sums[k] / mass[k])
        return np.vstack(pts), np.asarray(means)


@dataclass(frozen=True)
class GridSamples:
    """A function sampled on fixed cause points, one column per period."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if pts.shape[0] != vals.shape[0]:
            raise ValueError("points and values must have equal row counts")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(vals))):
            raise ValueError("points and values must be finite")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("grid points must be distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)


def _max_pair_ratio(points: np.ndarray, values: np.ndarray):
    """Max |value difference| / L1 point distance over distinct pairs.

    values may have several columns (periods); the max runs over all of
    them.  Ties resolve to the lexicographically first (period, i, k).
    """
    n = points.shape[0]
    dist = np.abs(points[:, None, :] - points[None, :, :]).sum(axis=2)
    np.fill_diagonal(dist, np.inf)  # mask self-pairs
    best = -1.0
    best_pair = (0, 0)
    n_pairs = 0
    for col in range(values.shape[1]):
        diff = np.abs(values[:, col][:, None] - values[:, col][None, :])
        ratios = diff / dist
        flat = int(np.argmax(ratios))
        i, k = divmod(flat, n)
        n_pairs += n * (n - 1) // 2
        if ratios[i, k] > best:
            best = float(ratios[i, k])
            best_pair = (i, k)
    return best, best_pair, n_pairs


def estimate_lipschitz(
    data: Union[SurveyMicrodata, GridSamples],
) -> LipschitzEstimate:
    """Smallest Lipschitz constant consistent with the observed points.

    For survey microdata, rows are grouped by distinct encoded cause point
    and the ratio uses cell-mean outcomes.  For gridded samples with
    several periods, the max also runs over the periods, giving a constant
    valid for every period.
    """
    if isinstance(data, SurveyMicrodata):
        pts, means = data.cell_means()
        values = means[:, None]
    elif isinstance(data, GridSamples):
        pts, values = data.points, data.values
    else:
        raise TypeError("expected SurveyMicrodata or GridSamples")
    if pts.shape[0] < 2:
        raise ValueError("need at least 2 distinct cause points")
    ell, (i, k), n_pairs = _max_pair_ratio(pts, values)
    return LipschitzEstimate(
        ell=max(ell, 0.0),
        n_pairs=n_pairs,
        argmax_pair=(pts[i].copy(), pts[k].copy()),
    )
