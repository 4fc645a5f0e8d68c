"""Euclidean projection onto the probability simplex and projected descent.

One deterministic engine serves all three estimators: it only needs a
callback returning the objective value and a subgradient at the current
weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NumericalFailureError

__all__ = ["Weights", "PgdConfig", "PgdResult", "project_simplex", "pgd_minimize"]

# Consecutive sub-tolerance epochs required before the optional early stop.
EARLY_STOP_PATIENCE = 100


@dataclass(frozen=True)
class Weights:
    """A point on the probability simplex."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("weights must form a non-empty vector")
        if np.any(v < 0) or abs(float(v.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def uniform(cls, size: int) -> "Weights":
        return cls(np.full(size, 1.0 / size))


@dataclass(frozen=True)
class PgdConfig:
    """Projected-descent settings: constant step size, fixed epoch budget.

    tolerance, when set, enables early stopping once the infinity norm of
    the weight change stays below it for EARLY_STOP_PATIENCE consecutive
    epochs; by default the full epoch budget runs.
    """

    learning_rate: float = 5e-6
    epochs: int = 200_000
    tolerance: Optional[float] = None
    trace_every: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.trace_every < 0:
            raise ValueError("trace_every must be non-negative")


@dataclass(frozen=True)
class PgdResult:
    """Final iterate plus the best iterate seen, with an optional trace."""

    weights: Weights
    value: float
    best_weights: Weights
    best_value: float
    epochs_run: int
    early_stopped: bool
    trace: tuple[tuple[int, float], ...]


def project_simplex(v) -> Weights:
    """Euclidean projection onto the simplex (sort-and-threshold).

    Inputs already on the simplex are returned unchanged, which makes the
    projection exactly idempotent.
    """
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("projection input must be a non-empty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("projection input must be finite")
    if np.all(x >= 0) and abs(float(x.sum()) - 1.0) <= 1e-12:
        return Weights(x.copy())
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, x.size + 1)
    rho = int(np.max(idx[u * idx > css]))
    theta = css[rho - 1] / rho
    return Weights(np.maximum(x - theta, 0.0))


def pgd_minimize(
    objective_with_subgradient: Callable[[np.ndarray], tuple[float, np.ndarray]],
    w0: Weights,
    config: PgdConfig,
) -> PgdResult:
    """Projected (sub)gradient descent over the simplex.

    Each epoch evaluates the callback at the current weights and applies
    w <- project_simplex(w - lr * g).  The run is fully deterministic and
    tracks the best iterate alongside the last one (subgradient steps on a
    non-smooth objective need not decrease monotonically).
    """
    w = w0.values
    if w.size == 1:
        # Zero-dimensional simplex: the single vertex is the only point.
        value, _ = objective_with_subgradient(w)
        if not np.isfinite(value):
            raise NumericalFailureError("objective returned a non-finite value at epoch 0")
        only = Weights(np.array([1.0]))
        return PgdResult(
            weights=only,
            value=float(value),
            best_weights=only,
            best_value=float(value),
            epochs_run=0,
            early_stopped=False,
            trace=(),
        )
    lr = config.learning_rate
    trace: list[tuple[int, float]] = []
    best_w = w
    best_value = np.inf
    calm_epochs = 0
    early_stopped = False
    epochs_run = 0
    for epoch in range(config.epochs):
        value, grad = objective_with_subgradient(w)
        if not np.isfinite(value):
            raise NumericalFailureError(
                f"objective returned a non-finite value at epoch {epoch}"
            )
        if value < best_value:
            best_value = value
            best_w = w
        if config.trace_every and epoch % config.trace_every == 0:
            trace.append((epoch, float(value)))
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != w.shape:
            raise ValueError(
                f"subgradient length {grad.size} does not match weight "
                f"length {w.size} (epoch {epoch})"
            )
        new_w = project_simplex(w - lr * grad).values
        epochs_run = epoch + 1
        if config.tolerance is not None:
            if float(np.abs(new_w - w).max()) < config.tolerance:
                calm_epochs += 1
            else:
                calm_epochs = 0
        w = new_w
        if config.tolerance is not None and calm_epochs >= EARLY_STOP_PATIENCE:
            early_stopped = True
            break
    final_value, _ = objective_with_subgradient(w)
    if not np.isfinite(final_value):
        raise NumericalFailureError(
            f"objective returned a non-finite value at epoch {epochs_run}"
        )
    if final_value < best_value:
        best_value = final_value
        best_w = w
    return PgdResult(
        weights=Weights(w),
        value=float(final_value),
        best_weights=Weights(best_w),
        best_value=float(best_value),
        epochs_run=epochs_run,
        early_stopped=early_stopped,
        trace=tuple(trace),
    )
