"""Fluid-flow simulation of a single shared bottleneck link.

Transfers are continuous bit volumes served FIFO at the link's residual
capacity (configured capacity minus competing cross-traffic). Completion
times come from exact piecewise integration of the rate profile, so runs
are deterministic to the bit.

Round-trip accounting: a transfer first waits for the backlog queued ahead
of it, then its own service overlaps the propagation round trip, so

    rtt = wait_behind_backlog + max(2 * prop_delay, own_service_time)

which makes measured rtt flat at 2 * prop_delay while a round fits within
the pipe's bandwidth-delay product and grow once it exceeds it. Arrivals
that would push the queue past its capacity are dropped and reported as
loss, not errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import ConfigurationError, SimulationError

RING_ALLREDUCE_DENSE = "ring_allreduce_dense"
ALLGATHER_SPARSE = "allgather_sparse"


# ---------------------------------------------------------------------------
# rate profiles and bandwidth schedules


class RateProfile:
    """Piecewise-constant rate in bits/sec over simulated time."""

    def value(self, t: float) -> float:
        raise NotImplementedError

    def next_change(self, t: float) -> float:
        """First time strictly after ``t`` where the rate may change."""
        raise NotImplementedError


class ConstantRate(RateProfile):
    def __init__(self, rate_bps: float):
        self.rate_bps = float(rate_bps)

    def value(self, t: float) -> float:
        return self.rate_bps

    def next_change(self, t: float) -> float:
        return math.inf


class StaircaseRate(RateProfile):
    """Monotone non-increasing staircase: start down to end by step per dwell."""

    def __init__(self, start_bps: float, end_bps: float, step_bps: float, dwell_s: float):
        self.start_bps = float(start_bps)
        self.end_bps = float(end_bps)
        self.step_bps = float(step_bps)
        self.dwell_s = float(dwell_s)
        self.n_levels = int(math.floor((self.start_bps - self.end_bps) / self.step_bps)) + 1

    def _level_index(self, t: float) -> int:
        if t < 0:
            return 0
        return min(int(math.floor(t / self.dwell_s)), self.n_levels - 1)

    def value(self, t: float) -> float:
        return max(self.end_bps, self.start_bps - self._level_index(t) * self.step_bps)

    def next_change(self, t: float) -> float:
        idx = self._level_index(t)
        if idx >= self.n_levels - 1:
            return math.inf
        return (idx + 1) * self.dwell_s


class SquareWaveRate(RateProfile):
    """Off/on cross-traffic pulse train; each cycle starts with the off span."""

    def __init__(self, rate_bps: float, off_s: float, on_s: float):
        self.rate_bps = float(rate_bps)
        self.off_s = float(off_s)
        self.on_s = float(on_s)
        self.period_s = self.off_s + self.on_s

    def value(self, t: float) -> float:
        pos = t % self.period_s
        return self.rate_bps if pos >= self.off_s else 0.0

    def next_change(self, t: float) -> float:
        cycle = math.floor(t / self.period_s)
        pos = t - cycle * self.period_s
        if pos < self.off_s:
            boundary = cycle * self.period_s + self.off_s
        else:
            boundary = (cycle + 1) * self.period_s
        if boundary <= t:  # float roundoff at an exact boundary
            boundary = t + self.period_s
        return boundary


@dataclass(frozen=True)
class StaticSchedule:
    level_bps: float


@dataclass(frozen=True)
class DegradingSchedule:
    start_bps: float
    end_bps: float
    step_bps: float
    dwell_s: float


@dataclass(frozen=True)
class FluctuatingSchedule:
    base_bps: float
    cross_rate_bps: float
    off_s: float
    on_s: float


BandwidthSchedule = StaticSchedule | DegradingSchedule | FluctuatingSchedule


def make_schedule(spec: BandwidthSchedule) -> tuple[RateProfile, RateProfile]:
    """Build (capacity, cross_traffic) rate profiles from a schedule spec."""
    if isinstance(spec, StaticSchedule):
        if spec.level_bps <= 0:
            raise ConfigurationError("static bandwidth must be positive")
        return ConstantRate(spec.level_bps), ConstantRate(0.0)
    if isinstance(spec, DegradingSchedule):
        if spec.end_bps > spec.start_bps:
            raise ConfigurationError("degrading schedule must not increase")
        if spec.end_bps <= 0 or spec.step_bps <= 0 or spec.dwell_s <= 0:
            raise ConfigurationError("degrading schedule parameters must be positive")
        return (
            StaircaseRate(spec.start_bps, spec.end_bps, spec.step_bps, spec.dwell_s),
            ConstantRate(0.0),
        )
    if isinstance(spec, FluctuatingSchedule):
        if spec.base_bps <= 0 or spec.cross_rate_bps < 0:
            raise ConfigurationError("fluctuating schedule rates must be positive")
        if spec.cross_rate_bps >= spec.base_bps:
            raise ConfigurationError("cross traffic must leave residual capacity")
        if spec.off_s < 0 or spec.on_s <= 0:
            raise ConfigurationError("fluctuating periods must be positive")
        return (
            ConstantRate(spec.base_bps),
            SquareWaveRate(spec.cross_rate_bps, spec.off_s, spec.on_s),
        )
    raise ConfigurationError(f"unknown schedule spec {spec!r}")


# ---------------------------------------------------------------------------
# bottleneck link


@dataclass(frozen=True)
class TransferResult:
    rtt_s: float
    delivered: bool
    bits_on_bottleneck: float


class BottleneckLink:
    """Single FIFO bottleneck shared by all workers' collective traffic."""

    def __init__(
        self,
        capacity: RateProfile,
        cross_traffic: RateProfile | None = None,
        prop_delay_s: float = 0.002,
        queue_cap_bits: float = math.inf,
        trace_hook: Callable[[float, str, float, float], None] | None = None,
    ):
        if prop_delay_s <= 0:
            raise ConfigurationError("prop_delay_s must be positive")
        self.capacity = capacity
        self.cross_traffic = cross_traffic or ConstantRate(0.0)
        self.prop_delay_s = float(prop_delay_s)
        self.queue_cap_bits = float(queue_cap_bits)
        self.clock = 0.0
        self.backlog_bits = 0.0
        self.loss_count = 0
        self._trace = trace_hook

    def residual_rate(self, t: float) -> float:
        return max(0.0, self.capacity.value(t) - self.cross_traffic.value(t))

    def _next_boundary(self, t: float) -> float:
        return min(self.capacity.next_change(t), self.cross_traffic.next_change(t))

    def advance(self, until: float) -> None:
        """Drain the queue up to ``until`` following the rate profiles."""
        if until < self.clock:
            raise ConfigurationError("cannot advance the link backwards in time")
        t = self.clock
        while t < until:
            seg_end = min(until, self._next_boundary(t))
            if self.backlog_bits > 0.0:
                drained = self.residual_rate(t) * (seg_end - t)
                self.backlog_bits = max(0.0, self.backlog_bits - drained)
            t = seg_end
        self.clock = until

    def _finish_time(self, start: float, bits: float) -> float:
        """Time at which ``bits`` complete service if started at ``start``."""
        t = start
        remaining = bits
        while remaining > 1e-12:
            rate = self.residual_rate(t)
            boundary = self._next_boundary(t)
            if rate <= 0.0:
                if math.isinf(boundary):
                    raise SimulationError("link has zero capacity forever; transfer stuck")
                t = boundary
                continue
            span = remaining / rate
            if t + span <= boundary:
                return t + span
            remaining -= rate * (boundary - t)
            t = boundary
        return t

    def transmit(self, bits: float, start_time: float) -> TransferResult:
        """Offer one round's volume to the link at ``start_time``.

        Returns the measured round completion time. A volume that does not
        fit in the queue is dropped and reported as loss; the rtt then
        reflects the time the sender spent discovering the failure.
        """
        if bits <= 0:
            raise ConfigurationError("transfer must carry a positive number of bits")
        self.advance(start_time)
        backlog_clear = self._finish_time(start_time, self.backlog_bits)
        wait = backlog_clear - start_time
        service = self._finish_time(backlog_clear, bits) - backlog_clear
        rtt = wait + max(2.0 * self.prop_delay_s, service)
        if self.backlog_bits + bits > self.queue_cap_bits:
            self.loss_count += 1
            if self._trace:
                self._trace(start_time, "drop", bits, self.backlog_bits)
            return TransferResult(rtt_s=rtt, delivered=False, bits_on_bottleneck=0.0)
        self.backlog_bits += bits
        if self._trace:
            self._trace(start_time, "enqueue", bits, self.backlog_bits)
        return TransferResult(rtt_s=rtt, delivered=True, bits_on_bottleneck=bits)


# ---------------------------------------------------------------------------
# collective-communication cost model


@dataclass(frozen=True)
class CollectiveModel:
    """Per-worker traffic model for one gradient synchronization round.

    ``sparse_merge_s_per_value`` charges receiver-side decode/merge work for
    gathered sparse payloads; dense ring reduction is treated as free since
    it is fused into the transfer path.
    """

    kind: str
    worker_count: int
    sparse_merge_s_per_value: float = 0.0

    def __post_init__(self):
        if self.kind not in (RING_ALLREDUCE_DENSE, ALLGATHER_SPARSE):
            raise ConfigurationError(f"unknown collective kind {self.kind!r}")
        if self.worker_count < 2:
            raise ConfigurationError("collectives need at least 2 workers")
        if self.sparse_merge_s_per_value < 0:
            raise ConfigurationError("merge cost must be >= 0")


def collective_volume(c: CollectiveModel, payload_bits: float) -> float:
    """Bits one worker moves through the bottleneck for a payload of given size."""
    if payload_bits <= 0:
        raise ConfigurationError("payload_bits must be positive")
    n = c.worker_count
    if c.kind == RING_ALLREDUCE_DENSE:
        return 2.0 * (n - 1) / n * payload_bits
    return (n - 1.0) * payload_bits


def sync_overhead_s(c: CollectiveModel, values_per_payload: int) -> float:
    """Host-side cost of combining the gathered payloads, outside the link."""
    if c.kind == ALLGATHER_SPARSE:
        return c.sparse_merge_s_per_value * values_per_payload * (c.worker_count - 1)
    return 0.0
