"""File formats: panel CSV, distribution JSON, cause schema, survey CSV,
and the JSON result document emitted by the CLI.

Floats are serialized with repr (shortest round-trip), so files re-ingest
bit-identically and re-runs are byte-identical apart from the timestamp.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping, Optional, Sequence

import numpy as np

from ._version import __version__
from .causes import CausesSchema, SurveyMicrodata, Variable
from .errors import InputDataError, SchemaViolationError
from .estimators import FitResult, PanelData
from .ot import AtomSet, DiscreteDistribution

__all__ = [
    "PanelTable",
    "read_panel_table",
    "write_panel_csv",
    "read_dists_json",
    "write_dists_json",
    "read_schema_json",
    "read_survey_csv",
    "result_document",
    "apply_bounds",
    "write_result_json",
    "read_result_json",
]


def _sorted_labels(labels: Sequence[str]) -> list[str]:
    """Ascending labels: numeric order when every label parses as a number."""
    try:
        nums = [float(x) for x in labels]
    except ValueError:
        return sorted(labels)
    return [lab for _, lab in sorted(zip(nums, labels))]


@dataclass(frozen=True)
class PanelTable:
    """Raw long-format panel: units, ascending period labels, outcome matrix."""

    unit_ids: tuple[str, ...]
    period_labels: tuple[str, ...]
    outcomes: np.ndarray

    def to_panel(self, target: str, t0_label: str) -> PanelData:
        """Bind a target unit and the first intervention period label."""
        if target not in self.unit_ids:
            raise SchemaViolationError(
                f"unknown target unit {target!r} "
                f"(panel units: {', '.join(self.unit_ids)})"
            )
        if t0_label not in self.period_labels:
            raise SchemaViolationError(
                f"unknown intervention period label {t0_label!r}"
            )
        return PanelData(
            unit_ids=self.unit_ids,
            outcomes=self.outcomes,
            target_index=self.unit_ids.index(target),
            t0=self.period_labels.index(t0_label),
            period_labels=self.period_labels,
        )


def read_panel_table(path: str) -> PanelTable:
    """Parse a long-format panel CSV with header unit,period,outcome.

    Period labels are sorted ascending (numerically when all labels parse
    as numbers) and the table must be dense: one row per unit and period.
    """
    cells: dict[tuple[str, str], float] = {}
    units: list[str] = []
    labels: list[str] = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != [
                "unit",
                "period",
                "outcome",
            ]:
                raise InputDataError(
                    f"{path}:1: expected header 'unit,period,outcome'"
                )
            for line_no, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != 3:
                    raise InputDataError(
                        f"{path}:{line_no}: expected 3 fields, got {len(row)}"
                    )
                unit, period, outcome = (f.strip() for f in row)
                try:
                    y = float(outcome)
                except ValueError:
                    raise InputDataError(
                        f"{path}:{line_no}: outcome {outcome!r} is not a number"
                    ) from None
                if not np.isfinite(y):
                    raise InputDataError(
                        f"{path}:{line_no}: outcome must be finite"
                    )
                key = (unit, period)
                if key in cells:
                    raise InputDataError(
                        f"{path}:{line_no}: duplicate entry for unit "
                        f"{unit!r}, period {period!r}"
                    )
                cells[key] = y
                if unit not in units:
                    units.append(unit)
                if period not in labels:
                    labels.append(period)
    except OSError as exc:
        raise InputDataError(f"{path}: {exc.strerror or exc}") from exc
    if not cells:
        raise InputDataError(f"{path}: panel file has no data rows")
    labels = _sorted_labels(labels)
    missing = [
        (u, p) for u in units for p in labels if (u, p) not in cells
    ]
    if missing:
        u, p = missing[0]
        raise InputDataError(
            f"{path}: panel is not dense; missing outcome for unit {u!r}, "
            f"period {p!r} ({len(missing)} missing in total)"
        )
    outcomes = np.array([[cells[(u, p)] for p in labels] for u in units])
    return PanelTable(tuple(units), tuple(labels), outcomes)


def write_panel_csv(path: str, panel: PanelData) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "period", "outcome"])
        for j, unit in enumerate(panel.unit_ids):
            for t, label in enumerate(panel.period_labels):
                writer.writerow([unit, label, repr(float(panel.outcomes[j, t]))])


# ---------------------------------------------------------------------------
# Distribution JSON
# ---------------------------------------------------------------------------


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputDataError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputDataError(
            f"{path}:{exc.lineno}: invalid JSON ({exc.msg})"
        ) from exc


def read_dists_json(path: str) -> dict[str, DiscreteDistribution]:
    """Load unit distributions sharing one atom set.

    Expected shape: {"dimension": d, "atoms": [[d reals]...],
    "units": {"<unit>": [probs aligned to atoms]}}.  Probabilities are
    renormalized on load, with a warning when they are off by more than 1e-6.
    """
    doc = _load_json(path)
    for key in ("dimension", "atoms", "units"):
        if not isinstance(doc, dict) or key not in doc:
            raise InputDataError(f"{path}: missing key {key!r}")
    try:
        atoms = np.asarray(doc["atoms"], dtype=np.float64)
    except ValueError:
        raise InputDataError(f"{path}: atoms must be an array of vectors") from None
    if atoms.ndim == 1:
        atoms = atoms[:, None]
    if atoms.ndim != 2 or atoms.shape[1] != int(doc["dimension"]):
        raise InputDataError(
            f"{path}: atoms have dimension {atoms.shape[-1] if atoms.ndim == 2 else '?'}"
            f", expected {doc['dimension']}"
        )
    try:
        atom_set = AtomSet(atoms)
    except ValueError as exc:
        raise InputDataError(f"{path}: {exc}") from exc
    out: dict[str, DiscreteDistribution] = {}
    for unit, probs in doc["units"].items():
        p = np.asarray(probs, dtype=np.float64)
        if p.shape != (len(atom_set),):
            raise InputDataError(
                f"{path}: unit {unit!r} has {p.size} probabilities for "
                f"{len(atom_set)} atoms"
            )
        if np.any(p < 0) or not np.all(np.isfinite(p)) or p.sum() <= 0:
            raise InputDataError(
                f"{path}: unit {unit!r} has invalid probabilities"
            )
        if abs(float(p.sum()) - 1.0) > 1e-6:
            warnings.warn(
                f"{path}: unit {unit!r} probabilities sum to {p.sum():.9g}; "
                "renormalizing",
                stacklevel=2,
            )
        out[unit] = DiscreteDistribution(atom_set, p)
    if not out:
        raise InputDataError(f"{path}: no units in distribution file")
    return out


def write_dists_json(path: str, dists: Mapping[str, DiscreteDistribution]) -> None:
    units = list(dists)
    if not units:
        raise ValueError("no distributions to write")
    base = dists[units[0]].atom_set
    for u in units:
        if not dists[u].atom_set.same_as(base):
            raise ValueError("all units must share one atom set to serialize")
    doc = {
        "dimension": base.dimension,
        "atoms": [[float(c) for c in pt] for pt in base.points],
        "units": {u: [float(p) for p in dists[u].probs] for u in units},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Cause schema and survey microdata
# ---------------------------------------------------------------------------


def read_schema_json(path: str) -> CausesSchema:
    doc = _load_json(path)
    if not isinstance(doc, dict) or "variables" not in doc:
        raise InputDataError(f"{path}: missing key 'variables'")
    variables = []
    for spec in doc["variables"]:
        try:
            variables.append(
                Variable(
                    name=spec["name"],
                    kind=spec["kind"],
                    levels=tuple(spec["levels"]) if "levels" in spec else None,
                    bin_edges=tuple(spec["bin_edges"])
                    if "bin_edges" in spec
                    else None,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputDataError(f"{path}: bad variable entry: {exc}") from exc
    scale = tuple(doc["scale"]) if "scale" in doc and doc["scale"] is not None else None
    try:
        return CausesSchema(variables=tuple(variables), scale=scale)
    except ValueError as exc:
        raise InputDataError(f"{path}: {exc}") from exc


def read_survey_csv(path: str, schema: CausesSchema) -> SurveyMicrodata:
    """Parse survey rows: one column per schema variable, plus outcome
    and an optional weight column."""
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [
                v.name for v in schema.variables if v.name not in header
            ]
            if missing or "outcome" not in header:
                need = [v.name for v in schema.variables] + ["outcome"]
                raise InputDataError(
                    f"{path}:1: header must include {', '.join(need)}"
                )
            has_weight = "weight" in header
            for line_no, record in enumerate(reader, start=2):
                values = {v.name: record[v.name] for v in schema.variables}
                try:
                    outcome = float(record["outcome"])
                    weight = float(record["weight"]) if has_weight else 1.0
                except (TypeError, ValueError):
                    raise InputDataError(
                        f"{path}:{line_no}: outcome/weight must be numeric"
                    ) from None
                rows.append((values, outcome, weight))
    except OSError as exc:
        raise InputDataError(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise InputDataError(f"{path}: survey file has no data rows")
    try:
        return SurveyMicrodata(schema, rows)
    except (ValueError, SchemaViolationError) as exc:
        raise InputDataError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Result documents
# ---------------------------------------------------------------------------


def result_document(
    *,
    panel: PanelData,
    fit: FitResult,
    ell: Optional[float] = None,
    lam: Optional[float] = None,
    config_echo: Optional[dict] = None,
) -> dict:
    """Assemble the JSON-serializable record of one fit.

    Per-period bound fields (lower/upper/inside) start as nulls; use
    apply_bounds to fill them once a Lipschitz constant is chosen.
    """
    synth = fit.weights.values @ panel.donor_outcomes
    periods = [
        {
            "period_label": panel.period_labels[t],
            "observed_target": float(panel.target_outcomes[t]),
            "synthetic": float(synth[t]),
            "lower": None,
            "upper": None,
            "inside": None,
        }
        for t in range(panel.n_periods)
    ]
    weights = {u: float(x) for u, x in zip(panel.donor_ids, fit.weights.values)}
    best = (
        {u: float(x) for u, x in zip(panel.donor_ids, fit.best_weights.values)}
        if fit.best_weights is not None
        else None
    )
    return {
        "tool": "scbounds",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "method": fit.method,
        "target": panel.target_id,
        "t0_label": panel.period_labels[panel.t0],
        "units": list(panel.donor_ids),
        "weights": weights,
        "best_weights": best,
        "objective": {
            "total": fit.objective_value,
            "w1": fit.w1_at_solution,
            "pre_fit_max_abs_error": fit.pre_fit_max_abs_error,
            "best_total": fit.best_objective_value,
        },
        "ell": ell,
        "lambda": lam,
        "epochs_run": fit.epochs_run,
        "early_stopped": fit.early_stopped,
        "config": dict(config_echo or {}),
        "periods": periods,
    }


def apply_bounds(doc: dict, ell: float) -> dict:
    """Fill interval bounds and inside flags into a result document.

    The half-width is ell * W1 for standard/m_bound fits and additionally
    includes the pre-period max fit error for james_bound fits.  Returns a
    new document; the input is not modified.
    """
    if ell < 0:
        raise ValueError("ell must be non-negative")
    w1 = doc.get("objective", {}).get("w1")
    if w1 is None:
        raise SchemaViolationError(
            "fit document has no W1 value; intervals need cause distributions"
        )
    half = ell * float(w1)
    if doc.get("method") == "james_bound":
        pre_err = doc.get("objective", {}).get("pre_fit_max_abs_error")
        if pre_err is None:
            raise SchemaViolationError(
                "james_bound document lacks pre_fit_max_abs_error"
            )
        half += float(pre_err)
    out = json.loads(json.dumps(doc))  # deep copy via round-trip
    out["ell"] = ell
    out["half_width"] = half
    for rec in out["periods"]:
        rec["lower"] = rec["synthetic"] - half
        rec["upper"] = rec["synthetic"] + half
        rec["inside"] = bool(
            rec["lower"] <= rec["observed_target"] <= rec["upper"]
        )
    return out


def write_result_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_result_json(path: str) -> dict:
    doc = _load_json(path)
    for key in ("method", "weights", "objective", "periods"):
        if not isinstance(doc, dict) or key not in doc:
            raise InputDataError(f"{path}: missing key {key!r}")
    return doc
