"""Synthetic-control estimators, misspecification bounds, and intervals.

Three fits share one projected-descent engine: the standard pre-period
least-squares fit, the cause-distribution fit minimizing W1 between the
target distribution and the donor mixture, and the combined fit that adds
the worst pre-period residual to a lambda-scaled W1 term.  Around any
fitted weights, intervals of half-width ell * W1 (plus the pre-period max
error for the combined bound) enclose the expected counterfactual.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import SchemaViolationError
from .ot import (
    DiscreteDistribution,
    align_to_union,
    l1_cost_matrix,
    w1_entropic,
    _w1_exact_core,
    _WarmTransport,
)
from .simplex import PgdConfig, PgdResult, Weights, pgd_minimize

__all__ = [
    "PanelData",
    "FitResult",
    "MisspecInterval",
    "CoverageReport",
    "PlaceboResult",
    "METHODS",
    "fit_standard_sc",
    "fit_m_bound",
    "fit_james_bound",
    "synthetic_series",
    "m_bound_value",
    "m_intervals",
    "james_bound_value",
    "james_intervals",
    "placebo_study",
    "coverage_report",
]

METHODS = ("standard", "m_bound", "james_bound")


@dataclass(frozen=True)
class PanelData:
    """Outcome panel: units by periods, one target unit, intervention at t0.

    outcomes[j, t] is unit j's outcome in period t (outcome units, e.g.
    packs per capita).  Periods 0..t0-1 are pre-intervention.
    """

    unit_ids: tuple[str, ...]
    outcomes: np.ndarray
    target_index: int
    t0: int
    period_labels: tuple

    def __post_init__(self) -> None:
        y = np.ascontiguousarray(self.outcomes, dtype=np.float64)
        if y.ndim != 2:
            raise ValueError("outcomes must be a (units, periods) matrix")
        n_units, n_periods = y.shape
        if len(self.unit_ids) != n_units:
            raise ValueError("unit_ids length does not match outcome rows")
        if len(set(self.unit_ids)) != n_units:
            raise ValueError("unit_ids must be unique")
        if len(self.period_labels) != n_periods:
            raise ValueError("period_labels length does not match outcome columns")
        if n_periods < 2:
            raise ValueError("panel needs at least 2 periods")
        if n_units < 2:
            raise ValueError("panel needs at least one donor besides the target")
        if not 0 <= self.target_index < n_units:
            raise ValueError("target_index out of range")
        if not 0 <= self.t0 < n_periods:
            raise ValueError("t0 out of range")
        if not np.all(np.isfinite(y)):
            raise ValueError("outcomes must be finite")
        y.flags.writeable = False
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "period_labels", tuple(self.period_labels))

    @property
    def n_periods(self) -> int:
        return self.outcomes.shape[1]

    @property
    def donor_indices(self) -> tuple[int, ...]:
        return tuple(
            j for j in range(len(self.unit_ids)) if j != self.target_index
        )

    @property
    def donor_ids(self) -> tuple[str, ...]:
        return tuple(self.unit_ids[j] for j in self.donor_indices)

    @property
    def target_id(self) -> str:
        return self.unit_ids[self.target_index]

    @property
    def target_outcomes(self) -> np.ndarray:
        return self.outcomes[self.target_index]

    @property
    def donor_outcomes(self) -> np.ndarray:
        return self.outcomes[list(self.donor_indices)]


@dataclass(frozen=True)
class FitResult:
    """Fitted weights plus the objective decomposition at the solution.

    w1_at_solution is always the exact Wasserstein distance at the returned
    weights (None for the standard fit when no distributions were supplied);
    pre_fit_max_abs_error is None for the distribution-only fit, which never
    reads outcomes.  best_weights is the lowest-objective iterate seen by
    the descent, reported alongside the final iterate.
    """

    weights: Weights
    method: str
    objective_value: float
    w1_at_solution: Optional[float] = None
    pre_fit_max_abs_error: Optional[float] = None
    best_weights: Optional[Weights] = None
    best_objective_value: Optional[float] = None
    epochs_run: int = 0
    early_stopped: bool = False
    trace: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.w1_at_solution is not None and self.w1_at_solution < -1e-12:
            raise ValueError("w1_at_solution must be non-negative")
        if (
            self.pre_fit_max_abs_error is not None
            and self.pre_fit_max_abs_error < 0
        ):
            raise ValueError("pre_fit_max_abs_error must be non-negative")


@dataclass(frozen=True)
class MisspecInterval:
    """Per-period synthetic outcome with symmetric misspecification bounds."""

    period: int
    synthetic: float
    half_width: float
    lower: float
    upper: float

    @classmethod
    def around(cls, period: int, synthetic: float, half_width: float) -> "MisspecInterval":
        if half_width < 0:
            raise ValueError("half_width must be non-negative")
        return cls(
            period=period,
            synthetic=synthetic,
            half_width=half_width,
            lower=synthetic - half_width,
            upper=synthetic + half_width,
        )

    def contains(self, y: float) -> bool:
        return self.lower <= y <= self.upper


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def _prepare_distribution_fit(
    p0: DiscreteDistribution,
    donors: Sequence[DiscreteDistribution],
    solver: str,
    epsilon: Optional[float],
):
    """Shared setup: donor-union registry, fixed cost matrix, solver closure."""
    if len(donors) == 0:
        raise ValueError("donor list must be non-empty")
    donors = align_to_union(donors)
    union = donors[0].atom_set
    cost = l1_cost_matrix(p0.atom_set, union)
    P = np.stack([d.probs for d in donors])
    C = cost.entries
    if solver == "exact":
        warm = _WarmTransport(p0.probs, C)

        def solve(q: np.ndarray):
            value, psi = warm.solve(q)
            return value, value, psi

    elif solver == "entropic":
        eps = epsilon
        if eps is None:
            eps = 0.01 * float(np.median(C))
        if not eps > 0:
            raise ValueError("epsilon must be positive")

        def solve(q: np.ndarray):
            sol = w1_entropic(
                p0, DiscreteDistribution(union, q), cost, epsilon=eps
            )
            # Descend on the smooth regularized objective; its gradient in
            # the mixture masses is exactly the dual potential.
            return sol.regularized_value, sol.value, sol.dual_target

    else:
        raise ValueError(f"unknown solver {solver!r} (expected 'exact' or 'entropic')")

    def exact_w1(q: np.ndarray) -> float:
        value, _, _, _, _, _ = _w1_exact_core(p0.probs, q, C)
        return value

    return donors, P, solve, exact_w1


def fit_standard_sc(panel: PanelData, config: PgdConfig) -> FitResult:
    """Standard SC: minimize the pre-period sum of squared errors."""
    if panel.t0 < 1:
        raise ValueError("standard SC needs at least one pre-intervention period")
    y0 = panel.target_outcomes[: panel.t0]
    Yd = panel.donor_outcomes[:, : panel.t0]

    def objective(w: np.ndarray):
        r = y0 - w @ Yd
        return float(r @ r), -2.0 * (Yd @ r)

    res = pgd_minimize(objective, Weights.uniform(Yd.shape[0]), config)
    pre_err = float(np.abs(y0 - res.weights.values @ Yd).max())
    return _fit_result("standard", res, w1=None, pre_err=pre_err)


def fit_m_bound(
    p0: DiscreteDistribution,
    donors: Sequence[DiscreteDistribution],
    config: PgdConfig,
    solver: str = "exact",
    epsilon: Optional[float] = None,
) -> FitResult:
    """Distribution fit: minimize W1 between p0 and the donor mixture.

    Uses only the cause distributions, never the outcome panel.  The
    reported w1_at_solution and objective are always computed with the
    exact solver, whichever solver drove the descent.
    """
    donors, P, solve, exact_w1 = _prepare_distribution_fit(
        p0, donors, solver, epsilon
    )

    def objective(w: np.ndarray):
        obj, _, psi = solve(w @ P)
        return obj, P @ psi

    res = pgd_minimize(objective, Weights.uniform(len(donors)), config)
    w1 = exact_w1(res.weights.values @ P)
    return _fit_result("m_bound", res, w1=w1, pre_err=None, objective=w1)


def fit_james_bound(
    panel: PanelData,
    p0: DiscreteDistribution,
    donors: Sequence[DiscreteDistribution],
    lam: float,
    config: PgdConfig,
    solver: str = "exact",
    epsilon: Optional[float] = None,
) -> FitResult:
    """Combined fit: worst pre-period residual plus lam times W1.

    The max term's subgradient uses the earliest period attaining the
    maximum absolute residual.
    """
    if panel.t0 < 1:
        raise ValueError("the combined fit needs at least one pre-intervention period")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if len(donors) != len(panel.donor_indices):
        raise ValueError(
            f"{len(donors)} donor distributions for {len(panel.donor_indices)} "
            "panel donors"
        )
    donors, P, solve, exact_w1 = _prepare_distribution_fit(
        p0, donors, solver, epsilon
    )
    y0 = panel.target_outcomes[: panel.t0]
    Yd = panel.donor_outcomes[:, : panel.t0]

    def objective(w: np.ndarray):
        obj_w1, _, psi = solve(w @ P)
        r = y0 - w @ Yd
        t_star = int(np.argmax(np.abs(r)))
        max_err = abs(float(r[t_star]))
        grad = -np.sign(r[t_star]) * Yd[:, t_star] + lam * (P @ psi)
        return max_err + lam * obj_w1, grad

    res = pgd_minimize(objective, Weights.uniform(len(donors)), config)
    w_final = res.weights.values
    w1 = exact_w1(w_final @ P)
    pre_err = float(np.abs(y0 - w_final @ Yd).max())
    return _fit_result(
        "james_bound", res, w1=w1, pre_err=pre_err, objective=pre_err + lam * w1
    )


def _fit_result(
    method: str,
    res: PgdResult,
    w1: Optional[float],
    pre_err: Optional[float],
    objective: Optional[float] = None,
) -> FitResult:
    return FitResult(
        weights=res.weights,
        method=method,
        objective_value=res.value if objective is None else objective,
        w1_at_solution=w1,
        pre_fit_max_abs_error=pre_err,
        best_weights=res.best_weights,
        best_objective_value=res.best_value,
        epochs_run=res.epochs_run,
        early_stopped=res.early_stopped,
        trace=res.trace,
    )


# ---------------------------------------------------------------------------
# Series, bounds, intervals
# ---------------------------------------------------------------------------


def synthetic_series(panel: PanelData, w: Weights) -> np.ndarray:
    """Weighted donor outcome series over every period, pre and post."""
    if len(w) != len(panel.donor_indices):
        raise ValueError(
            f"weight length {len(w)} does not match donor count "
            f"{len(panel.donor_indices)}"
        )
    return w.values @ panel.donor_outcomes


def m_bound_value(ell: float, w1: float) -> float:
    """Misspecification bound: ell * W1, in outcome units."""
    if ell < 0 or w1 < 0:
        raise ValueError("ell and w1 must be non-negative")
    return ell * w1


def m_intervals(
    panel: PanelData, w: Weights, ell: float, w1: float
) -> list[MisspecInterval]:
    """Constant-width intervals synthetic +- ell*W1 for every period."""
    half = m_bound_value(ell, w1)
    synth = synthetic_series(panel, w)
    return [
        MisspecInterval.around(t, float(synth[t]), half)
        for t in range(panel.n_periods)
    ]


def james_bound_value(
    panel: PanelData, w: Weights, ell: float, w1_observed: float
) -> float:
    """ell * W1 on the observed causes plus the worst pre-period fit error.

    Uses observed outcomes as plug-in estimates of the expected outcomes in
    the fit-error term; the unobservable remainder term of the underlying
    bound is excluded.
    """
    if panel.t0 < 1:
        raise ValueError("the combined bound needs at least one pre-intervention period")
    synth = synthetic_series(panel, w)
    pre = slice(0, panel.t0)
    fit_term = float(np.abs(panel.target_outcomes[pre] - synth[pre]).max())
    return m_bound_value(ell, w1_observed) + fit_term


def james_intervals(
    panel: PanelData, w: Weights, ell: float, w1_observed: float
) -> list[MisspecInterval]:
    """Constant-width intervals using the combined bound as half-width."""
    half = james_bound_value(panel, w, ell, w1_observed)
    synth = synthetic_series(panel, w)
    return [
        MisspecInterval.around(t, float(synth[t]), half)
        for t in range(panel.n_periods)
    ]


# ---------------------------------------------------------------------------
# Placebo study and coverage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlaceboResult:
    """One donor treated as target: its panel view, fit, and intervals."""

    unit: str
    panel: PanelData
    fit: FitResult
    intervals: tuple[MisspecInterval, ...]


def _placebo_panel(panel: PanelData, unit: str) -> PanelData:
    """Panel with `unit` as target and the true target excluded entirely."""
    keep = [j for j in range(len(panel.unit_ids)) if j != panel.target_index]
    ids = [panel.unit_ids[j] for j in keep]
    return PanelData(
        unit_ids=tuple(ids),
        outcomes=panel.outcomes[keep],
        target_index=ids.index(unit),
        t0=panel.t0,
        period_labels=panel.period_labels,
    )


def placebo_study(
    panel: PanelData,
    distributions: Mapping[str, DiscreteDistribution],
    method: str,
    *,
    ell: float,
    lam: Optional[float] = None,
    config: PgdConfig,
    solver: str = "exact",
    epsilon: Optional[float] = None,
    workers: int = 1,
) -> dict[str, PlaceboResult]:
    """Re-fit with each donor treated as the target.

    The true target never enters any placebo donor pool.  Each placebo unit
    gets the chosen fit plus its misspecification intervals (combined-bound
    intervals for the james_bound method, ell*W1 intervals otherwise).
    Results are keyed and ordered by donor unit.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if ell < 0:
        raise ValueError("ell must be non-negative")
    missing = [u for u in panel.unit_ids if u not in distributions]
    if missing:
        raise SchemaViolationError(
            f"no cause distribution for unit(s): {', '.join(missing)}"
        )
    if method == "james_bound" and lam is None:
        lam = ell  # default per the combined bound's hyperparameter choice

    def run(unit: str) -> PlaceboResult:
        sub = _placebo_panel(panel, unit)
        p0 = distributions[unit]
        donor_dists = [distributions[u] for u in sub.donor_ids]
        if method == "standard":
            fit = fit_standard_sc(sub, config)
            aligned = align_to_union([p0, *donor_dists])
            cost = l1_cost_matrix(aligned[0].atom_set, aligned[0].atom_set)
            q = fit.weights.values @ np.stack([d.probs for d in aligned[1:]])
            w1, _, _, _, _, _ = _w1_exact_core(
                aligned[0].probs, q, cost.entries
            )
            fit = FitResult(
                weights=fit.weights,
                method=fit.method,
                objective_value=fit.objective_value,
                w1_at_solution=w1,
                pre_fit_max_abs_error=fit.pre_fit_max_abs_error,
                best_weights=fit.best_weights,
                best_objective_value=fit.best_objective_value,
                epochs_run=fit.epochs_run,
                early_stopped=fit.early_stopped,
                trace=fit.trace,
            )
            intervals = m_intervals(sub, fit.weights, ell, w1)
        elif method == "m_bound":
            fit = fit_m_bound(p0, donor_dists, config, solver, epsilon)
            intervals = m_intervals(sub, fit.weights, ell, fit.w1_at_solution)
        else:
            fit = fit_james_bound(
                sub, p0, donor_dists, lam, config, solver, epsilon
            )
            intervals = james_intervals(
                sub, fit.weights, ell, fit.w1_at_solution
            )
        return PlaceboResult(unit, sub, fit, tuple(intervals))

    units = list(panel.donor_ids)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, units))
    else:
        results = [run(u) for u in units]
    return {u: r for u, r in zip(units, results)}


@dataclass(frozen=True)
class CoverageReport:
    """Per-period inside/outside flags with pre/post summaries."""

    inside: tuple[bool, ...]
    t0: int

    @property
    def pre_inside(self) -> int:
        return sum(self.inside[: self.t0])

    @property
    def pre_total(self) -> int:
        return self.t0

    @property
    def post_inside(self) -> int:
        return sum(self.inside[self.t0 :])

    @property
    def post_total(self) -> int:
        return len(self.inside) - self.t0

    @property
    def all_pre_inside(self) -> bool:
        return self.pre_inside == self.pre_total

    @property
    def all_post_inside(self) -> bool:
        return self.post_inside == self.post_total


def coverage_report(
    panel: PanelData, intervals: Sequence[MisspecInterval]
) -> CoverageReport:
    """Flag, per period, whether the observed target outcome is inside."""
    periods = sorted(iv.period for iv in intervals)
    if periods != list(range(panel.n_periods)):
        raise ValueError(
            "intervals must cover every panel period exactly once"
        )
    by_period = {iv.period: iv for iv in intervals}
    y = panel.target_outcomes
    flags = tuple(
        by_period[t].contains(float(y[t])) for t in range(panel.n_periods)
    )
    return CoverageReport(inside=flags, t0=panel.t0)
