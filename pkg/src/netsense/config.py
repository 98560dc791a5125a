"""Experiment configuration: defaults, INI file parsing, scenario presets.

A config file is standard INI (``configparser``) with one section per
subsystem::

    [experiment]
    name = my-run
    [model]
    task = quadratic
    dimension = 2000
    [run]
    strategies = netsense,topk_static,allreduce_dense
    [controller]
    growth_increment = 0.01
    [compression]
    quantize_ratio_threshold = 0.05
    [network]
    schedule = static
    static_levels_bps = 5.6e6,1.4e7,3.5e7

Every key maps 1:1 onto a field of the matching config dataclass; unknown
sections or keys are rejected so typos fail fast. ``--override`` values use
``section.key=value`` with the same names.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field, fields, replace

from .compression import CompressionConfig
from .controller import ControllerConfig
from .errors import ConfigurationError
from .netsim import (
    BandwidthSchedule,
    DegradingSchedule,
    FluctuatingSchedule,
    StaticSchedule,
)

STRATEGY_NETSENSE = "netsense"
STRATEGY_TOPK = "topk_static"
STRATEGY_DENSE = "allreduce_dense"
ALL_STRATEGIES = (STRATEGY_NETSENSE, STRATEGY_TOPK, STRATEGY_DENSE)


@dataclass(frozen=True)
class ModelConfig:
    task: str = "quadratic"  # quadratic | clusters | mlp
    dimension: int = 2000  # the mlp task derives its own dimension
    workers: int = 8
    batch_size: int = 32
    learning_rate: float = 0.05

    def __post_init__(self):
        if self.task not in ("quadratic", "clusters", "mlp"):
            raise ConfigurationError(f"unknown task {self.task!r}")
        if self.dimension < 2 or self.workers < 2:
            raise ConfigurationError("need dimension >= 2 and workers >= 2")
        if self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigurationError("batch_size and learning_rate must be positive")


@dataclass(frozen=True)
class NetworkConfig:
    schedule: str = "static"  # static | degrading | fluctuating
    static_bandwidth_bps: float = 5.6e6
    static_levels_bps: tuple[float, ...] = ()  # run-matrix levels; empty -> single
    degrading_start_bps: float = 2.0e7
    degrading_end_bps: float = 2.0e6
    degrading_step_bps: float = 2.0e6
    degrading_dwell_s: float = 0.5
    fluctuating_base_bps: float = 1.12e7
    fluctuating_cross_bps: float = 5.6e6
    fluctuating_off_s: float = 0.25
    fluctuating_on_s: float = 0.25
    prop_delay_s: float = 0.002
    queue_cap_bits: float = 0.0  # 0 -> default of 4 x BDP at the initial level
    compute_time_s: float = 0.001
    sparse_merge_s_per_value: float = 0.0

    def __post_init__(self):
        if self.schedule not in ("static", "degrading", "fluctuating"):
            raise ConfigurationError(f"unknown schedule {self.schedule!r}")
        if self.prop_delay_s <= 0 or self.compute_time_s < 0:
            raise ConfigurationError("delays must be positive")

    def schedule_spec(self, level_bps: float | None = None) -> BandwidthSchedule:
        if self.schedule == "static":
            return StaticSchedule(level_bps or self.static_bandwidth_bps)
        if self.schedule == "degrading":
            return DegradingSchedule(
                self.degrading_start_bps,
                self.degrading_end_bps,
                self.degrading_step_bps,
                self.degrading_dwell_s,
            )
        return FluctuatingSchedule(
            self.fluctuating_base_bps,
            self.fluctuating_cross_bps,
            self.fluctuating_off_s,
            self.fluctuating_on_s,
        )

    def initial_capacity_bps(self, level_bps: float | None = None) -> float:
        if self.schedule == "static":
            return level_bps or self.static_bandwidth_bps
        if self.schedule == "degrading":
            return self.degrading_start_bps
        return self.fluctuating_base_bps

    def queue_capacity_bits(self, level_bps: float | None = None) -> float:
        if self.queue_cap_bits > 0:
            return self.queue_cap_bits
        bdp = self.initial_capacity_bps(level_bps) * 2.0 * self.prop_delay_s
        return 4.0 * bdp

    def levels(self) -> tuple[float, ...]:
        if self.schedule == "static" and self.static_levels_bps:
            return self.static_levels_bps
        return (self.initial_capacity_bps(),)


@dataclass(frozen=True)
class RunConfig:
    strategies: tuple[str, ...] = ALL_STRATEGIES
    seed: int = 42
    step_budget: int = 600
    eval_every: int = 10
    target_accuracy: float = 0.0  # 0 disables the accuracy stop
    target_loss: float = 0.0  # 0 disables the loss stop
    topk_static_rate: float = 0.1
    topk_static_residual: bool = True
    pin_ratio: float = 0.0  # >0 pins the adaptive strategy's ratio (testing aid)
    convergence_band: float = 0.005  # half-width around the accuracy target
    convergence_evals: int = 20  # consecutive in-band evaluations required

    def __post_init__(self):
        for s in self.strategies:
            if s not in ALL_STRATEGIES:
                raise ConfigurationError(f"unknown strategy {s!r}")
        if self.step_budget < 1 or self.eval_every < 1:
            raise ConfigurationError("step_budget and eval_every must be >= 1")
        if not 0.0 < self.topk_static_rate <= 1.0:
            raise ConfigurationError("topk_static_rate must be in (0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    model: ModelConfig = field(default_factory=ModelConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    compression: CompressionConfig = field(default_factory=CompressionConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    run: RunConfig = field(default_factory=RunConfig)


_SECTION_TYPES = {
    "model": ModelConfig,
    "controller": ControllerConfig,
    "compression": CompressionConfig,
    "network": NetworkConfig,
    "run": RunConfig,
}


def _parse_value(raw: str, target_type):
    raw = raw.strip()
    if target_type is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"expected a boolean, got {raw!r}")
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    if target_type is str:
        return raw
    # tuple fields: comma separated, element type inferred from the default
    if isinstance(target_type, tuple):
        elem = target_type[1]
        if not raw:
            return ()
        return tuple(elem(part.strip()) for part in raw.split(",") if part.strip())
    raise ConfigurationError(f"unsupported config field type {target_type!r}")


def _field_type(dc_field):
    t = dc_field.type
    mapping = {"int": int, "float": float, "str": str, "bool": bool}
    if t in mapping:
        return mapping[t]
    if t in (int, float, str, bool):
        return t
    if "tuple[str" in str(t):
        return ("tuple", str)
    if "tuple[float" in str(t):
        return ("tuple", float)
    raise ConfigurationError(f"unsupported config field type {t!r}")


def _apply_section(instance, items: dict[str, str]):
    known = {f.name: f for f in fields(instance)}
    updates = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigurationError(
                f"unknown key {key!r} for section [{type(instance).__name__}]"
            )
        updates[key] = _parse_value(raw, _field_type(known[key]))
    return replace(instance, **updates)


def load_config(path, overrides: list[str] | None = None) -> ExperimentConfig:
    """Read an INI config file and apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"config file not found: {path}")
    return _build_config(parser, overrides or [])


def config_from_overrides(
    base: ExperimentConfig, overrides: list[str]
) -> ExperimentConfig:
    """Apply ``section.key=value`` overrides to an existing config."""
    sections: dict[str, dict[str, str]] = {}
    name = base.name
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigurationError(
                f"override must look like section.key=value, got {ov!r}"
            )
        target, value = ov.split("=", 1)
        section, key = target.split(".", 1)
        if section == "experiment":
            if key != "name":
                raise ConfigurationError(f"unknown key {key!r} for section [experiment]")
            name = value
            continue
        sections.setdefault(section, {})[key] = value
    parts = {
        "model": base.model,
        "controller": base.controller,
        "compression": base.compression,
        "network": base.network,
        "run": base.run,
    }
    for section, items in sections.items():
        if section not in parts:
            raise ConfigurationError(f"unknown config section [{section}]")
        parts[section] = _apply_section(parts[section], items)
    return ExperimentConfig(name=name, **parts)


def _build_config(parser: configparser.ConfigParser, overrides: list[str]) -> ExperimentConfig:
    cfg = ExperimentConfig()
    name = cfg.name
    parts = {
        "model": cfg.model,
        "controller": cfg.controller,
        "compression": cfg.compression,
        "network": cfg.network,
        "run": cfg.run,
    }
    for section in parser.sections():
        if section == "experiment":
            for key, value in parser.items(section):
                if key != "name":
                    raise ConfigurationError(
                        f"unknown key {key!r} for section [experiment]"
                    )
                name = value
            continue
        if section not in _SECTION_TYPES:
            raise ConfigurationError(f"unknown config section [{section}]")
        parts[section] = _apply_section(parts[section], dict(parser.items(section)))
    built = ExperimentConfig(name=name, **parts)
    if overrides:
        built = config_from_overrides(built, overrides)
    return built


# ---------------------------------------------------------------------------
# scenario presets
#
# Bandwidths are desk-scaled: the default model's dense ring volume is about
# 1.1e5 bits, and levels are chosen so the dense-payload / BDP ratio spans
# the congested-to-comfortable range the full-scale scenarios probe.


def preset_static_bw() -> ExperimentConfig:
    model = ModelConfig(task="clusters", dimension=2048, workers=8)
    network = NetworkConfig(
        schedule="static",
        static_levels_bps=(5.6e6, 1.4e7, 3.5e7),
        queue_cap_bits=2.5e5,  # above the dense round so baselines stay deliverable
        sparse_merge_s_per_value=2e-7,
    )
    run = RunConfig(step_budget=400, eval_every=10, target_accuracy=0.9)
    return ExperimentConfig(
        name="static-bw", model=model, network=network, run=run
    )


def preset_degrading_bw() -> ExperimentConfig:
    model = ModelConfig(task="clusters", dimension=2048, workers=8)
    network = NetworkConfig(
        schedule="degrading",
        degrading_start_bps=2.0e7,
        degrading_end_bps=2.0e6,
        degrading_step_bps=2.0e6,
        degrading_dwell_s=0.5,
        queue_cap_bits=3.2e5,
    )
    run = RunConfig(step_budget=900, eval_every=10)
    return ExperimentConfig(
        name="degrading-bw", model=model, network=network, run=run
    )


def preset_fluctuating_bw() -> ExperimentConfig:
    model = ModelConfig(task="clusters", dimension=2048, workers=8)
    network = NetworkConfig(
        schedule="fluctuating",
        fluctuating_base_bps=1.12e7,
        fluctuating_cross_bps=5.6e6,
        fluctuating_off_s=0.25,
        fluctuating_on_s=0.25,
        queue_cap_bits=2.5e5,
    )
    run = RunConfig(step_budget=700, eval_every=10)
    return ExperimentConfig(
        name="fluctuating-bw", model=model, network=network, run=run
    )


PRESETS = {
    "static-bw": preset_static_bw,
    "degrading-bw": preset_degrading_bw,
    "fluctuating-bw": preset_fluctuating_bw,
}


def make_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return PRESETS[name]()
