"""Adaptive gradient compression: quantize, prune, then top-k sparsify.

The pipeline runs per worker and per step:

    accumulate residual -> adaptive half-precision quantization
    -> magnitude pruning of small-weight parameters -> top-k selection

Every stage is a pure function. Arithmetic stays in float64 throughout; the
``precision`` tag drives exact wire-size accounting (4 bytes per value at
full precision, 2 at half), and at half precision values are additionally
rounded through IEEE float16 so the transmitted numbers are exactly
representable in the narrow format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, CorruptPayloadError
from .gradients import GradientVector, ResidualBuffer, accumulate, l2_norm, update_residual

PRECISION_FULL = "full32"
PRECISION_HALF = "half16"

VALUE_WIDTH_BYTES = {PRECISION_FULL: 4, PRECISION_HALF: 2}


@dataclass(frozen=True)
class CompressionConfig:
    """Thresholds and wire-format constants, fixed for a whole run."""

    quantize_ratio_threshold: float = 0.05  # engage half precision below this ratio
    density_threshold: float = 1e-6  # skip quantization for effectively-zero gradients
    index_width_bytes: int = 4
    header_bytes: int = 16

    def __post_init__(self):
        if not 0.0 <= self.quantize_ratio_threshold <= 1.0:
            raise ConfigurationError("quantize_ratio_threshold must be in [0, 1]")
        if self.density_threshold < 0.0:
            raise ConfigurationError("density_threshold must be >= 0")
        if self.index_width_bytes <= 0 or self.header_bytes < 0:
            raise ConfigurationError("wire-format widths must be positive")


@dataclass(frozen=True)
class PruneMask:
    """Parameter indices excluded from this step's transmission."""

    excluded: np.ndarray
    pruning_rate: float

    def __post_init__(self):
        idx = np.asarray(self.excluded, dtype=np.int64)
        object.__setattr__(self, "excluded", np.sort(idx))
        if not 0.0 <= self.pruning_rate <= 0.5:
            raise ConfigurationError("pruning_rate must be in [0, 0.5]")


@dataclass(frozen=True)
class CompressedPayload:
    """Sparse encoding of the kept gradient entries with exact byte accounting."""

    indices: np.ndarray
    values: np.ndarray
    precision: str
    wire_size_bytes: int
    source_step: int

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.indices.shape != self.values.shape:
            raise ConfigurationError("indices and values must have equal length")
        if self.precision not in VALUE_WIDTH_BYTES:
            raise ConfigurationError(f"unknown precision {self.precision!r}")

    @property
    def kept_count(self) -> int:
        return self.indices.shape[0]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def keep_count(ratio: float, dimension: int) -> int:
    """Number of coordinates transmitted at a given compression ratio."""
    return max(1, round_half_up(ratio * dimension))


def wire_size_bytes(kept: int, precision: str, cfg: CompressionConfig) -> int:
    return cfg.header_bytes + kept * cfg.index_width_bytes + kept * VALUE_WIDTH_BYTES[precision]


def adaptive_quantize(
    g: GradientVector, ratio: float, cfg: CompressionConfig
) -> tuple[GradientVector, str, float]:
    """Drop to half precision when compression is severe and the gradient is live.

    Returns the (possibly rounded) gradient, the precision tag, and the ratio,
    doubled to compensate the halved per-value cost when quantization fires.
    """
    if not 0.0 < ratio <= 1.0:
        raise ConfigurationError(f"ratio must be in (0, 1], got {ratio}")
    if ratio < cfg.quantize_ratio_threshold and l2_norm(g) > cfg.density_threshold:
        rounded = g.values.astype(np.float16).astype(np.float64)
        return (
            GradientVector(rounded, step_index=g.step_index),
            PRECISION_HALF,
            min(1.0, 2.0 * ratio),
        )
    return g, PRECISION_FULL, ratio


def prune_mask(weights: np.ndarray, ratio: float) -> PruneMask:
    """Select the smallest-magnitude weights for one-step exclusion.

    The exclusion count is floor(0.5 * (1 - ratio) * D); ties go to the lower
    index. Parameters are only skipped for transmission, never removed.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ConfigurationError(f"ratio must be in [0, 1], got {ratio}")
    w = np.asarray(weights, dtype=np.float64)
    rate = 0.5 * (1.0 - ratio)
    n_excluded = int(math.floor(rate * w.shape[0]))
    if n_excluded == 0:
        return PruneMask(np.empty(0, dtype=np.int64), rate)
    order = np.argsort(np.abs(w), kind="stable")
    return PruneMask(order[:n_excluded], rate)


def apply_mask(g: GradientVector, m: PruneMask) -> GradientVector:
    """Zero the gradient entries of pruned parameters."""
    if m.excluded.size == 0:
        return g
    if m.excluded[0] < 0 or m.excluded[-1] >= g.dimension:
        raise ConfigurationError("prune mask index out of range")
    out = g.values.copy()
    out[m.excluded] = 0.0
    return GradientVector(out, step_index=g.step_index)


def topk_sparsify(
    g: GradientVector,
    ratio: float,
    cfg: CompressionConfig | None = None,
    precision: str = PRECISION_FULL,
) -> CompressedPayload:
    """Keep the k = max(1, round(ratio * D)) largest-magnitude entries.

    Ties break toward the lower index; payload indices are sorted ascending.
    """
    if not 0.0 < ratio <= 1.0:
        raise ConfigurationError(f"ratio must be in (0, 1], got {ratio}")
    cfg = cfg or CompressionConfig()
    k = keep_count(ratio, g.dimension)
    # stable argsort of -|g|: equal magnitudes keep ascending index order
    order = np.argsort(-np.abs(g.values), kind="stable")
    kept = np.sort(order[:k])
    return CompressedPayload(
        indices=kept,
        values=g.values[kept],
        precision=precision,
        wire_size_bytes=wire_size_bytes(k, precision, cfg),
        source_step=g.step_index,
    )


def densify(p: CompressedPayload, dimension: int) -> GradientVector:
    """Receiver-side decode: scatter payload values into a zero vector."""
    if p.kept_count:
        if int(p.indices[0]) < 0 or int(p.indices[-1]) >= dimension:
            raise CorruptPayloadError(
                f"payload index out of range for dimension {dimension}"
            )
    out = np.zeros(dimension, dtype=np.float64)
    out[p.indices] = p.values
    return GradientVector(out, step_index=p.source_step)


def compress(
    g: GradientVector,
    residual: ResidualBuffer,
    weights: np.ndarray,
    ratio: float,
    cfg: CompressionConfig | None = None,
) -> tuple[CompressedPayload, ResidualBuffer]:
    """Full per-step pipeline; returns the payload and the updated residual.

    The residual is taken against the transmitted values as decoded by the
    receiver, so accumulated == densify(payload) + residual' holds exactly at
    full precision and within per-value float16 rounding at half precision.
    """
    cfg = cfg or CompressionConfig()
    acc = accumulate(g, residual)
    quantized, precision, effective_ratio = adaptive_quantize(acc, ratio, cfg)
    mask = prune_mask(weights, effective_ratio)
    masked = apply_mask(quantized, mask)
    payload = topk_sparsify(masked, effective_ratio, cfg, precision)
    transmitted = densify(payload, g.dimension)
    return payload, update_residual(acc, transmitted)


def predicted_wire_size(ratio: float, dimension: int, cfg: CompressionConfig) -> int:
    """Exact wire size the pipeline will produce for a live gradient.

    Mirrors the quantization gate (assuming the gradient passes the density
    check) so the controller can size a round before compressing it.
    """
    if ratio < cfg.quantize_ratio_threshold:
        precision = PRECISION_HALF
        effective_ratio = min(1.0, 2.0 * ratio)
    else:
        precision = PRECISION_FULL
        effective_ratio = ratio
    return wire_size_bytes(keep_count(effective_ratio, dimension), precision, cfg)


def dense_wire_size(dimension: int, cfg: CompressionConfig | None = None) -> int:
    """Bytes for an uncompressed gradient: header plus D full-width values."""
    cfg = cfg or CompressionConfig()
    return cfg.header_bytes + dimension * VALUE_WIDTH_BYTES[PRECISION_FULL]
