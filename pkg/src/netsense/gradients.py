"""Gradient containers and the residual (error-feedback) arithmetic.

All values are float64 numpy arrays of a fixed dimension D. Vectors are
validated to be finite on construction, so downstream operations can assume
clean inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, CorruptGradientError


def _as_finite_array(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigurationError(f"{what} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise CorruptGradientError(f"{what} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class GradientVector:
    """A flat gradient over all model parameters at one training step."""

    values: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", _as_finite_array(self.values, "gradient"))
        if self.step_index < 0:
            raise ConfigurationError("step_index must be >= 0")

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ResidualBuffer:
    """Per-worker carry-over of gradient mass that was not transmitted."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_finite_array(self.values, "residual"))

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, dimension: int) -> "ResidualBuffer":
        return cls(np.zeros(dimension, dtype=np.float64))


def _check_same_dimension(a, b):
    if a.dimension != b.dimension:
        raise ConfigurationError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )


def l2_norm(g: GradientVector) -> float:
    """Euclidean norm of the gradient."""
    return float(np.linalg.norm(g.values))


def accumulate(g: GradientVector, r: ResidualBuffer) -> GradientVector:
    """Add the residual carried over from previous steps onto a fresh gradient.

    Neither input is mutated.
    """
    _check_same_dimension(g, r)
    return GradientVector(g.values + r.values, step_index=g.step_index)


def update_residual(
    accumulated: GradientVector, transmitted_dense: GradientVector
) -> ResidualBuffer:
    """Residual left behind after transmission: accumulated - transmitted."""
    _check_same_dimension(accumulated, transmitted_dense)
    return ResidualBuffer(accumulated.values - transmitted_dense.values)
