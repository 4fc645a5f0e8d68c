"""Synthetic benchmark: closed-form conditional outcomes on a 1D cause grid.

Six units named g20..g70 hold (discretized) normal cause distributions
centered at their nominal means.  Outcomes are exact expectations of a
fixed conditional-outcome surface f(x, t) under each unit's distribution,
so the target's own series doubles as the ground-truth counterfactual.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .causes import GridSamples, LipschitzEstimate, estimate_lipschitz
from .estimators import PanelData
from .ot import AtomSet, DiscreteDistribution

__all__ = [
    "DgpConfig",
    "f_xt",
    "unit_distribution",
    "generate_panel",
    "dgp_grid_samples",
    "dgp_lipschitz",
]

# Coefficients of the outcome surface, kept as exact rationals and converted
# to float once.  Layout: quartic-in-x blocks multiplying t^2, the softplus
# ramp log(exp(t/3 - 20/3) + 1), and a static block, plus t and a constant.
_T2 = [
    float(Fraction(-13, 2_100_000_000)),
    float(Fraction(71, 78_750_000)),
    float(Fraction(-10_141, 252_000_000)),
    float(Fraction(12_521, 12_600_000)),
]
_RAMP = [
    float(Fraction(57, 14_000_000)),
    float(Fraction(-16, 21_875)),
    float(Fraction(21_283, 560_000)),
    float(Fraction(-14_003, 28_000)),
]
_STATIC = [
    float(Fraction(-43, 13_300_000)),
    float(Fraction(1_313, 1_496_250)),
    float(Fraction(-359_953, 4_788_000)),
    float(Fraction(401_813, 239_400)),
]
_CONSTANT = 40.0


def f_xt(x, t):
    """Expected outcome at cause value x and time t (vectorized)."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    ramp = np.logaddexp(t / 3.0 - 20.0 / 3.0, 0.0)
    x2 = x * x
    x3 = x2 * x
    x4 = x2 * x2
    quartic_t2 = _T2[0] * x4 + _T2[1] * x3 + _T2[2] * x2 + _T2[3] * x
    quartic_ramp = _RAMP[0] * x4 + _RAMP[1] * x3 + _RAMP[2] * x2 + _RAMP[3] * x
    static = _STATIC[0] * x4 + _STATIC[1] * x3 + _STATIC[2] * x2 + _STATIC[3] * x
    return (t * t) * quartic_t2 + t + ramp * quartic_ramp + static + _CONSTANT


@dataclass(frozen=True)
class DgpConfig:
    """Benchmark geometry: unit means, cause grid, panel extent."""

    unit_means: tuple[float, ...] = (20.0, 45.0, 50.0, 60.0, 65.0, 70.0)
    sigma: float = 5.0
    atom_count: int = 200
    atom_max: float = 90.0
    periods: int = 50
    t0: int = 15
    target_mean: float = 45.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "unit_means", tuple(float(m) for m in self.unit_means))
        if len(self.unit_means) < 2:
            raise ValueError("need at least two units")
        if len(set(self.unit_means)) != len(self.unit_means):
            raise ValueError("unit means must be distinct")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.atom_count < 2:
            raise ValueError("atom_count must be at least 2")
        if not self.atom_max > 0:
            raise ValueError("atom_max must be positive")
        if not 0 < self.t0 < self.periods:
            raise ValueError("need 0 < t0 < periods")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def grid(self) -> np.ndarray:
        k = np.arange(self.atom_count, dtype=np.float64)
        return self.atom_max * k / (self.atom_count - 1)

    def unit_name(self, mean: float) -> str:
        return f"g{mean:g}"


def unit_distribution(
    mean: float, config: DgpConfig, atom_set: Optional[AtomSet] = None
) -> DiscreteDistribution:
    """Normal weights on the cause grid, normalized to a distribution."""
    if atom_set is None:
        atom_set = AtomSet(config.grid)
    x = atom_set.points[:, 0]
    masses = np.exp(-0.5 * ((x - mean) / config.sigma) ** 2)
    return DiscreteDistribution(atom_set, masses)


def generate_panel(
    config: DgpConfig = DgpConfig(),
) -> tuple[PanelData, dict[str, DiscreteDistribution], np.ndarray]:
    """Panel, per-unit cause distributions, and the true target series.

    Outcomes are exact expectations y_jt = sum_k f(x_k, t) p_j(x_k); with
    noise_sigma > 0, Gaussian noise is added to the panel while the returned
    truth stays noiseless.  No intervention is simulated, so the target's
    expectation series is the counterfactual for every period.
    """
    if config.target_mean not in config.unit_means:
        raise ValueError(
            f"target mean {config.target_mean:g} is not among unit means"
        )
    atom_set = AtomSet(config.grid)
    names = [config.unit_name(m) for m in config.unit_means]
    dists = {
        name: unit_distribution(m, config, atom_set)
        for name, m in zip(names, config.unit_means)
    }
    t = np.arange(config.periods, dtype=np.float64)
    F = f_xt(atom_set.points[:, 0][:, None], t[None, :])
    Y = np.stack([dists[name].probs @ F for name in names])
    target_index = names.index(config.unit_name(config.target_mean))
    truth = Y[target_index].copy()
    if config.noise_sigma > 0:
        rng = np.random.default_rng(config.seed)
        Y = Y + rng.normal(0.0, config.noise_sigma, Y.shape)
    panel = PanelData(
        unit_ids=tuple(names),
        outcomes=Y,
        target_index=target_index,
        t0=config.t0,
        period_labels=tuple(range(config.periods)),
    )
    return panel, dists, truth


def dgp_grid_samples(config: DgpConfig = DgpConfig()) -> GridSamples:
    """The outcome surface sampled on the cause grid, one column per period."""
    x = config.grid
    t = np.arange(config.periods, dtype=np.float64)
    return GridSamples(points=x, values=f_xt(x[:, None], t[None, :]))


def dgp_lipschitz(config: DgpConfig = DgpConfig()) -> LipschitzEstimate:
    """Lipschitz constant of the outcome surface over grid and periods."""
    return estimate_lipschitz(dgp_grid_samples(config))
