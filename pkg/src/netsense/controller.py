"""Bandwidth sensing and compression-ratio control.

The controller runs one instance per training job and is driven once per
gradient-transmission interval:

 * ``observe`` ingests the previous round's measurement (size, completion
   time, loss flag), updates the bottleneck-bandwidth / propagation-delay
   estimators, and handles the startup-phase exit.
 * ``plan_round`` decides the compression ratio for the upcoming round:
   a fast additive ramp during startup, and in the sensing phase either a
   bandwidth probe or the AIMD rule against the estimated
   bandwidth-delay product.

Estimator notes. Per-interval bandwidth samples (size / rtt) only reach link
capacity while the transfer actually fills the pipe; below that they measure
the transfer itself. A plain sliding-window max therefore decays toward the
offered load whenever the loop keeps payloads under the BDP, and the
operating point spirals down. To keep the estimate honest the controller
adds a capacity ratchet on top of the window: any sample taken while the
round's rtt was inflated (the pipe was full, so size/rtt equals the
then-current capacity) replaces the ratchet; other samples can only raise
it. Occasional measurement-only probe rounds push one transfer slightly
past the estimated BDP so the ratchet is re-validated even in steady state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

from .errors import ConfigurationError, EstimatorNotReady, MeasurementError

PHASE_STARTUP = "startup"
PHASE_NETSENSE = "netsense"


@dataclass(frozen=True)
class ControllerConfig:
    decrease_factor: float = 0.5  # multiplicative cut when over the BDP threshold
    startup_increment: float = 0.05  # additive ratio step during the startup ramp
    growth_increment: float = 0.01  # additive ratio step below the BDP threshold
    bdp_fraction: float = 0.9  # act when payload exceeds this fraction of BDP
    ratio_floor: float = 0.005
    ratio_init: float = 0.01
    window_intervals: int = 10  # sliding window for the max/min estimators
    rtt_inflation_factor: float = 1.25  # startup-exit congestion criterion
    saturation_rtt_factor: float = 1.1  # rtt inflation that marks a capacity sample
    probe_period: int = 25  # sensing intervals between probes; 0 disables probing
    probe_gain: float = 1.25  # probe targets gain * bdp_fraction * BDP bits

    def __post_init__(self):
        if not 0.0 < self.decrease_factor < 1.0:
            raise ConfigurationError("decrease_factor must be in (0, 1)")
        if self.startup_increment <= 0 or self.growth_increment <= 0:
            raise ConfigurationError("ratio increments must be positive")
        if not 0.0 < self.ratio_floor <= self.ratio_init <= 1.0:
            raise ConfigurationError("need 0 < ratio_floor <= ratio_init <= 1")
        if self.window_intervals < 1:
            raise ConfigurationError("window_intervals must be >= 1")
        if self.rtt_inflation_factor <= 1.0 or self.saturation_rtt_factor <= 1.0:
            raise ConfigurationError("rtt factors must exceed 1")
        if self.probe_period < 0:
            raise ConfigurationError("probe_period must be >= 0")


@dataclass(frozen=True)
class IntervalMeasurement:
    """One transmission round as seen on the bottleneck."""

    interval_index: int
    data_size_bits: float
    rtt_s: float
    loss: bool = False

    def __post_init__(self):
        if self.data_size_bits <= 0:
            raise MeasurementError("data_size_bits must be > 0")
        if self.rtt_s <= 0:
            raise MeasurementError("rtt_s must be > 0")


@dataclass(frozen=True)
class RoundPlan:
    """Controller decision for the next round."""

    ratio: float
    is_probe: bool = False


def measure_ebb(m: IntervalMeasurement) -> float:
    """Per-interval bandwidth sample in bits/sec: transferred size over rtt."""
    if m.rtt_s <= 0:
        raise MeasurementError("rtt must be positive")
    return m.data_size_bits / m.rtt_s


class RatioController:
    """Adaptive compression-ratio controller with startup and sensing phases."""

    def __init__(self, cfg: ControllerConfig | None = None):
        self.cfg = cfg or ControllerConfig()
        self.ratio: float = self.cfg.ratio_init
        self.phase: str = PHASE_STARTUP
        w = self.cfg.window_intervals
        self._bw_window: deque[tuple[int, float]] = deque(maxlen=w)
        self._rtt_window: deque[tuple[int, float]] = deque(maxlen=w)
        self._capacity_ratchet: float | None = None
        self._sensing_rounds = 0

    # ------------------------------------------------------------------
    # estimators

    @property
    def btlbw(self) -> float | None:
        """Bottleneck-bandwidth estimate: windowed max, backed by the ratchet."""
        samples = [ebb for _, ebb in self._bw_window]
        if self._capacity_ratchet is not None:
            samples.append(self._capacity_ratchet)
        return max(samples) if samples else None

    @property
    def rtprop(self) -> float | None:
        """Propagation-delay estimate: windowed min of round completion times."""
        if not self._rtt_window:
            return None
        return min(rtt for _, rtt in self._rtt_window)

    def update_estimates(self, m: IntervalMeasurement) -> None:
        ebb = measure_ebb(m)
        self._bw_window.append((m.interval_index, ebb))
        self._rtt_window.append((m.interval_index, m.rtt_s))
        rtprop = self.rtprop
        saturated = m.loss or (
            rtprop is not None and m.rtt_s >= self.cfg.saturation_rtt_factor * rtprop
        )
        if saturated:
            # The pipe was full, so this sample equals the capacity available
            # during the round; it may replace a stale, higher ratchet.
            self._capacity_ratchet = ebb
        elif self._capacity_ratchet is None:
            self._capacity_ratchet = ebb
        else:
            self._capacity_ratchet = max(self._capacity_ratchet, ebb)

    def compute_bdp(self) -> float:
        """Estimated bandwidth-delay product in bits."""
        btlbw, rtprop = self.btlbw, self.rtprop
        if btlbw is None or rtprop is None:
            raise EstimatorNotReady("no measurements recorded yet")
        return btlbw * rtprop

    # ------------------------------------------------------------------
    # control rules

    def congestion_detected(self, m: IntervalMeasurement) -> bool:
        """Loss, or rtt inflated beyond the configured factor of rtprop."""
        if m.loss:
            return True
        rtprop = self.rtprop
        if rtprop is None:
            return False
        return m.rtt_s > self.cfg.rtt_inflation_factor * rtprop

    def startup_step(self, congestion_seen: bool) -> None:
        """Ramp the ratio quickly; hand over to sensing on first congestion."""
        if self.phase != PHASE_STARTUP:
            raise ConfigurationError("startup_step called outside startup phase")
        if congestion_seen:
            self.phase = PHASE_NETSENSE
        else:
            self.ratio = min(1.0, self.ratio + self.cfg.startup_increment)

    def adjust_ratio(self, data_size_bits: float) -> None:
        """AIMD update against the BDP threshold.

        Over threshold: multiplicative decrease to a hard floor. Under:
        additive recovery toward full transmission.
        """
        if self.phase != PHASE_NETSENSE:
            raise ConfigurationError("adjust_ratio requires the sensing phase")
        bdp = self.compute_bdp()
        if data_size_bits > self.cfg.bdp_fraction * bdp:
            self.ratio = max(self.cfg.ratio_floor, self.ratio * self.cfg.decrease_factor)
        else:
            self.ratio = min(1.0, self.ratio + self.cfg.growth_increment)

    # ------------------------------------------------------------------
    # per-round orchestration

    def observe(self, m: IntervalMeasurement) -> None:
        """Ingest the previous round's measurement."""
        self.update_estimates(m)
        if self.phase == PHASE_STARTUP:
            self.startup_step(self.congestion_detected(m))

    def plan_round(self, predict_volume_bits: Callable[[float], float]) -> RoundPlan:
        """Choose the transmit ratio for the upcoming round.

        ``predict_volume_bits`` maps a candidate ratio to the exact number of
        bits the round would place on the bottleneck.
        """
        if self.phase == PHASE_STARTUP:
            return RoundPlan(ratio=self.ratio)
        self._sensing_rounds += 1
        if (
            self.cfg.probe_period > 0
            and self._sensing_rounds % self.cfg.probe_period == 0
        ):
            target = self.cfg.probe_gain * self.cfg.bdp_fraction * self.compute_bdp()
            probe_ratio = self._ratio_for_volume(predict_volume_bits, target)
            return RoundPlan(ratio=probe_ratio, is_probe=True)
        self.adjust_ratio(predict_volume_bits(self.ratio))
        return RoundPlan(ratio=self.ratio)

    def _ratio_for_volume(
        self, predict: Callable[[float], float], target_bits: float
    ) -> float:
        """Smallest ratio whose predicted volume reaches ``target_bits``.

        The size function is increasing except for a single downward jump
        where the quantization gate disengages, so a coarse scan locates the
        candidate segment and bisection refines it.
        """
        floor = self.cfg.ratio_floor
        if predict(1.0) <= target_bits:
            return 1.0
        grid = 256
        ratios = [floor + (1.0 - floor) * i / grid for i in range(grid + 1)]
        best = None
        prev = ratios[0]
        for r in ratios:
            if predict(r) >= target_bits:
                lo, hi = prev, r
                for _ in range(50):
                    mid = 0.5 * (lo + hi)
                    if predict(mid) >= target_bits:
                        hi = mid
                    else:
                        lo = mid
                if best is None or predict(hi) < predict(best):
                    best = hi
                break
            prev = r
        return best if best is not None else 1.0
