"""Bandwidth-sensing adaptive gradient compression with a deterministic
bottleneck-link simulation for evaluating it against static baselines."""

from .compression import (
    CompressedPayload,
    CompressionConfig,
    PruneMask,
    adaptive_quantize,
    apply_mask,
    compress,
    densify,
    prune_mask,
    topk_sparsify,
)
from .config import (
    ExperimentConfig,
    ModelConfig,
    NetworkConfig,
    RunConfig,
    load_config,
    make_preset,
)
from .controller import (
    ControllerConfig,
    IntervalMeasurement,
    RatioController,
    measure_ebb,
)
from .gradients import (
    GradientVector,
    ResidualBuffer,
    accumulate,
    l2_norm,
    update_residual,
)
from .netsim import (
    BottleneckLink,
    CollectiveModel,
    DegradingSchedule,
    FluctuatingSchedule,
    StaticSchedule,
    TransferResult,
    collective_volume,
    make_schedule,
)
from .records import ExperimentRecord, read_records_csv, write_records_csv
from .training import RunResult, run_training

__all__ = [
    "CompressedPayload",
    "CompressionConfig",
    "PruneMask",
    "adaptive_quantize",
    "apply_mask",
    "compress",
    "densify",
    "prune_mask",
    "topk_sparsify",
    "ExperimentConfig",
    "ModelConfig",
    "NetworkConfig",
    "RunConfig",
    "load_config",
    "make_preset",
    "ControllerConfig",
    "IntervalMeasurement",
    "RatioController",
    "measure_ebb",
    "GradientVector",
    "ResidualBuffer",
    "accumulate",
    "l2_norm",
    "update_residual",
    "BottleneckLink",
    "CollectiveModel",
    "DegradingSchedule",
    "FluctuatingSchedule",
    "StaticSchedule",
    "TransferResult",
    "collective_volume",
    "make_schedule",
    "ExperimentRecord",
    "read_records_csv",
    "write_records_csv",
    "RunResult",
    "run_training",
]
