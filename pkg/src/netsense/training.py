"""Synchronous data-parallel SGD over the simulated bottleneck link.

Each step: every worker produces a local gradient, the active strategy
turns it into a payload, the collective's traffic crosses the link once,
and the averaged densified gradients update the shared parameters. The
adaptive strategy closes the loop by feeding the round's measurement back
into the ratio controller before planning the next round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import compression as comp
from .config import (
    STRATEGY_DENSE,
    STRATEGY_NETSENSE,
    STRATEGY_TOPK,
    ExperimentConfig,
)
from .controller import IntervalMeasurement, RatioController, RoundPlan
from .errors import ConfigurationError
from .gradients import GradientVector, ResidualBuffer, accumulate, update_residual
from .models import make_task
from .netsim import (
    ALLGATHER_SPARSE,
    RING_ALLREDUCE_DENSE,
    BottleneckLink,
    CollectiveModel,
    collective_volume,
    make_schedule,
    sync_overhead_s,
)
from .records import ExperimentRecord


def collective_for_strategy(strategy: str, workers: int, merge_cost: float) -> CollectiveModel:
    if strategy == STRATEGY_DENSE:
        return CollectiveModel(RING_ALLREDUCE_DENSE, workers)
    return CollectiveModel(ALLGATHER_SPARSE, workers, sparse_merge_s_per_value=merge_cost)


@dataclass
class WorkerAudit:
    """Cumulative per-worker sums for conservation checks."""

    raw_gradients: np.ndarray
    transmitted: np.ndarray


@dataclass
class RunResult:
    records: list[ExperimentRecord]
    final_params: np.ndarray
    steps_run: int
    wall_clock_s: float
    best_accuracy: float
    final_loss: float
    reached_target: bool
    target_step: int | None = None
    target_time_s: float | None = None
    final_residuals: list[ResidualBuffer] = field(default_factory=list)
    audit: list[WorkerAudit] | None = None


def build_link(cfg: ExperimentConfig, level_bps: float | None = None) -> BottleneckLink:
    capacity, cross = make_schedule(cfg.network.schedule_spec(level_bps))
    return BottleneckLink(
        capacity,
        cross,
        prop_delay_s=cfg.network.prop_delay_s,
        queue_cap_bits=cfg.network.queue_capacity_bits(level_bps),
    )


def run_training(
    cfg: ExperimentConfig,
    strategy: str,
    level_bps: float | None = None,
    audit: bool = False,
) -> RunResult:
    """Train one (strategy, bandwidth) cell and collect per-step records."""
    if strategy not in (STRATEGY_NETSENSE, STRATEGY_TOPK, STRATEGY_DENSE):
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    mcfg, rcfg, ccfg = cfg.model, cfg.run, cfg.compression
    task = make_task(
        mcfg.task, mcfg.dimension, mcfg.workers, rcfg.seed, batch_size=mcfg.batch_size
    )
    dim = task.dimension
    workers = mcfg.workers
    link = build_link(cfg, level_bps)
    rng = np.random.default_rng([rcfg.seed, 0x11])
    params = task.init_params(rng)

    controller = RatioController(cfg.controller)
    pinned = rcfg.pin_ratio > 0.0
    collective = collective_for_strategy(
        strategy, workers, cfg.network.sparse_merge_s_per_value
    )
    residual_on = strategy == STRATEGY_NETSENSE or (
        strategy == STRATEGY_TOPK and rcfg.topk_static_residual
    )
    residuals = [ResidualBuffer.zeros(dim) for _ in range(workers)]

    dense_bits = comp.dense_wire_size(dim, ccfg) * 8

    def predict_volume(ratio: float) -> float:
        return collective_volume(collective, comp.predicted_wire_size(ratio, dim, ccfg) * 8)

    audits = (
        [WorkerAudit(np.zeros(dim), np.zeros(dim)) for _ in range(workers)]
        if audit
        else None
    )

    records: list[ExperimentRecord] = []
    wall_clock = 0.0
    last_measurement: IntervalMeasurement | None = None
    cur_loss = task.loss(params)
    cur_acc = task.accuracy(params)
    best_acc = cur_acc
    reached = False
    target_step: int | None = None
    target_time: float | None = None

    def target_hit(loss_val: float, acc_val: float) -> bool:
        if rcfg.target_accuracy > 0.0 and acc_val >= rcfg.target_accuracy:
            return True
        if rcfg.target_loss > 0.0 and loss_val <= rcfg.target_loss:
            return True
        return False

    steps = 0
    for step in range(rcfg.step_budget):
        grads = [
            GradientVector(task.worker_gradient(params, w, rcfg.seed + step), step)
            for w in range(workers)
        ]
        if audits is not None:
            for w in range(workers):
                audits[w].raw_gradients += grads[w].values

        # --- choose the round's payloads -------------------------------
        is_probe = False
        if strategy == STRATEGY_NETSENSE:
            if pinned:
                ratio = rcfg.pin_ratio
            else:
                if last_measurement is not None:
                    controller.observe(last_measurement)
                plan: RoundPlan = controller.plan_round(predict_volume)
                ratio = plan.ratio
                is_probe = plan.is_probe
            payloads = []
            new_residuals = []
            for w in range(workers):
                payload, new_res = comp.compress(
                    grads[w], residuals[w], params, ratio, ccfg
                )
                payloads.append(payload)
                new_residuals.append(new_res)
            wire_bits = payloads[0].wire_size_bytes * 8
            values_per_payload = payloads[0].kept_count
        elif strategy == STRATEGY_TOPK:
            ratio = rcfg.topk_static_rate
            payloads = []
            new_residuals = []
            for w in range(workers):
                acc = accumulate(grads[w], residuals[w]) if residual_on else grads[w]
                payload = comp.topk_sparsify(acc, ratio, ccfg)
                payloads.append(payload)
                new_residuals.append(
                    update_residual(acc, comp.densify(payload, dim))
                    if residual_on
                    else residuals[w]
                )
            wire_bits = payloads[0].wire_size_bytes * 8
            values_per_payload = payloads[0].kept_count
        else:  # dense allreduce
            ratio = 1.0
            payloads = None
            new_residuals = residuals
            wire_bits = dense_bits
            values_per_payload = dim

        volume_bits = collective_volume(collective, wire_bits)
        overhead = sync_overhead_s(collective, values_per_payload)

        # --- move the round across the bottleneck ----------------------
        start = wall_clock + cfg.network.compute_time_s
        result = link.transmit(volume_bits, start)
        step_time = cfg.network.compute_time_s + result.rtt_s + overhead
        wall_clock = start + result.rtt_s + overhead
        last_measurement = IntervalMeasurement(
            interval_index=step,
            data_size_bits=volume_bits,
            rtt_s=result.rtt_s,
            loss=not result.delivered,
        )

        # --- apply the update -------------------------------------------
        if result.delivered:
            if strategy == STRATEGY_DENSE:
                dense_stack = [g.values for g in grads]
                aggregated = np.mean(dense_stack, axis=0)
                if audits is not None:
                    for w in range(workers):
                        audits[w].transmitted += grads[w].values
            else:
                densified = [comp.densify(p, dim).values for p in payloads]
                aggregated = np.mean(densified, axis=0)
                residuals = new_residuals
                if audits is not None:
                    for w in range(workers):
                        audits[w].transmitted += densified[w]
            params = params - mcfg.learning_rate * aggregated
        elif residual_on:
            # dropped round: nothing reached the receivers, so the whole
            # accumulated gradient stays local for the next attempt
            residuals = [
                ResidualBuffer(comp.densify(payloads[w], dim).values + new_residuals[w].values)
                for w in range(workers)
            ]

        steps = step + 1
        if step % rcfg.eval_every == 0 or step == rcfg.step_budget - 1:
            cur_loss = task.loss(params)
            cur_acc = task.accuracy(params)
            best_acc = max(best_acc, cur_acc)

        ebb = volume_bits / result.rtt_s
        if strategy == STRATEGY_NETSENSE and not pinned and controller.btlbw is not None:
            btlbw = controller.btlbw
            rtprop = controller.rtprop
            bdp = btlbw * rtprop
        else:
            btlbw = rtprop = bdp = 0.0
        records.append(
            ExperimentRecord(
                sim_time_s=wall_clock,
                step=step,
                strategy=strategy,
                ratio=float(ratio),
                data_size_bits=float(volume_bits),
                rtt_s=result.rtt_s,
                ebb_bps=ebb,
                btlbw_bps=btlbw,
                rtprop_s=rtprop,
                bdp_bits=bdp,
                loss=cur_loss,
                accuracy=cur_acc,
                samples_per_sec=mcfg.batch_size * workers / step_time,
                loss_event=0 if result.delivered else 1,
            )
        )

        if not reached and target_hit(cur_loss, cur_acc):
            reached = True
            target_step = step
            target_time = wall_clock
            break

    return RunResult(
        records=records,
        final_params=params,
        steps_run=steps,
        wall_clock_s=wall_clock,
        best_accuracy=best_acc,
        final_loss=cur_loss,
        reached_target=reached,
        target_step=target_step,
        target_time_s=target_time,
        final_residuals=residuals,
        audit=audits,
    )
