"""Cycle-level simulation driver: coordinates injection, scheduling and
refresh, records the command trace and computes the run metrics.

One run is single-threaded and deterministic for a given configuration and
seed.  Independent runs may execute in parallel, each owning all of its
mutable state.
"""

from __future__ import annotations

import heapq
import json
import statistics
import time
from collections import Counter
from dataclasses import asdict, dataclass, field

from .config import (SimConfig, TrafficPattern, derive_cycles,
                     theoretical_max_bandwidth)
from .controller import Controller, ReqKind
from .protocol import FAR_FUTURE, CommandKind, DeviceModel, IllegalIssue
from .traffic import PRNG_NAME, Injector, TrafficGenerator
from .trace import TraceRecord


class WindowOutOfRange(ValueError):
    pass


@dataclass
class SimReport:
    """Metrics and configuration echo of one measured run."""

    standard: str
    data_rate_mts: int
    bank_mode: str
    burst_length: int
    wck_ck_ratio: int
    channel_width_bits: int
    traffic: str
    rw_ratio: float
    page_policy: str
    seed: int
    prng: str
    requests_measured: int
    reads_measured: int
    writes_measured: int
    transfers_measured: int
    bandwidth_gbps: float
    utilization: float
    theoretical_max_gbps: float
    row_hit_rate: float
    avg_read_latency_ns: float
    p50_read_latency_ns: float
    p95_read_latency_ns: float
    p99_read_latency_ns: float
    command_counts: dict
    refpb_per_bank: list
    sim_cycles: int
    warmup_cycles: int
    total_cycles: int
    non_standard_rate: bool
    wall_seconds: float

    def to_json(self, indent=2) -> str:
        return json.dumps(asdict(self), indent=indent, sort_keys=True)


@dataclass
class RunResult:
    report: SimReport
    trace: list | None
    measure_start: int
    measure_end: int
    device: DeviceModel = field(repr=False, default=None)


def run(sim: SimConfig, collect_trace: bool = False,
        warmup_min_requests: int | None = None,
        warmup_refresh_epochs: int | None = None) -> RunResult:
    """Execute one run: warm-up (excluded from metrics), then a measurement
    phase of traffic.request_budget requests.

    The warm-up ends at the first request completion after both the queues
    have cycled twice and enough refresh epochs have passed to cover the
    postpone limit, so refresh debt accrued during start-up cannot leak
    into the measured window.
    """
    wall_start = time.perf_counter()
    device_cfg = sim.device
    cycles = derive_cycles(sim.timing, device_cfg)
    device = DeviceModel(device_cfg, cycles)
    controller = Controller(device_cfg, sim.controller.check(), device)
    generator = TrafficGenerator(device_cfg, sim.traffic, unbounded=True)
    injector = Injector(generator)

    if warmup_min_requests is None:
        warmup_min_requests = 2 * sim.controller.queue_capacity
    if warmup_refresh_epochs is None:
        warmup_refresh_epochs = sim.controller.refresh_postpone_limit + 1
    warmup_min_cycles = warmup_refresh_epochs * cycles.trefipb

    budget = sim.traffic.request_budget
    trace = [] if collect_trace else None
    completions = []  # (data_end_cycle, request_id, request, was_hit)
    cmd_counts = Counter()
    refpb_per_bank = [0] * device_cfg.banks
    latencies = []
    serviced = 0
    measured = reads = writes = hits = 0
    meas_start = -1
    meas_end = -1
    now = 0

    while True:
        # retire due completions; they free queue slots and advance phases
        while completions and completions[0][0] <= now:
            end, _, req, was_hit = heapq.heappop(completions)
            controller.retire(req)
            serviced += 1
            if meas_start < 0:
                if serviced >= warmup_min_requests and end >= warmup_min_cycles:
                    meas_start = end
            else:
                measured += 1
                if req.kind is ReqKind.READ:
                    reads += 1
                    latencies.append(end - req.arrival_cycle)
                else:
                    writes += 1
                if was_hit:
                    hits += 1
                if measured >= budget:
                    meas_end = end
                    break
        if meas_end >= 0:
            break

        injector.inject(controller, now)
        controller.refresh_tick(now)
        cmd, next_time = controller.select(now)
        if cmd is not None:
            data_end = device.issue(cmd, now)
            req = controller.note_issued(cmd)
            kind = cmd.kind
            cmd_counts[kind.value] += 1
            if kind is CommandKind.REFPB:
                refpb_per_bank[cmd.bank] += 1
            if trace is not None:
                addr = cmd.row if kind is CommandKind.ACT else cmd.column
                trace.append(TraceRecord(now, kind.value, cmd.bank_group,
                                         cmd.bank, addr))
            if data_end is not None:
                heapq.heappush(completions,
                               (data_end, req.id, req, not req.activated))
            # the command bus is busy until cmd_bus_free; jump there unless
            # a completion or refresh epoch comes first
            target = device.cmd_bus_free
            if completions and completions[0][0] < target:
                target = completions[0][0]
            acc = controller.next_refresh_accrual()
            if acc < target:
                target = acc
            now = max(now, target) if target > now else now
            continue

        targets = [next_time, controller.next_refresh_accrual()]
        if completions:
            targets.append(completions[0][0])
        nxt = min(targets)
        if nxt >= FAR_FUTURE:
            raise IllegalIssue("simulation stalled: no schedulable event")
        now = nxt

    tck_ns = _tck_ns(sim)
    window = meas_end - meas_start
    busy = device.data_bus.busy_cycles(meas_start, meas_end)
    utilization = busy / window if window else 0.0
    theo = theoretical_max_bandwidth(device_cfg)
    lat_ns = sorted(l * tck_ns for l in latencies)
    report = SimReport(
        standard=device_cfg.standard.value,
        data_rate_mts=device_cfg.data_rate,
        bank_mode=device_cfg.bank_mode.value,
        burst_length=device_cfg.burst_length,
        wck_ck_ratio=device_cfg.wck_ck_ratio,
        channel_width_bits=device_cfg.channel_width,
        traffic=sim.traffic.pattern.value,
        rw_ratio=sim.traffic.read_ratio,
        page_policy=sim.controller.page_policy.value,
        seed=sim.traffic.seed,
        prng=PRNG_NAME,
        requests_measured=measured,
        reads_measured=reads,
        writes_measured=writes,
        transfers_measured=measured * device_cfg.burst_length,
        bandwidth_gbps=utilization * theo,
        utilization=utilization,
        theoretical_max_gbps=theo,
        row_hit_rate=hits / measured if measured else 0.0,
        avg_read_latency_ns=statistics.fmean(lat_ns) if lat_ns else 0.0,
        p50_read_latency_ns=_percentile(lat_ns, 0.50),
        p95_read_latency_ns=_percentile(lat_ns, 0.95),
        p99_read_latency_ns=_percentile(lat_ns, 0.99),
        command_counts=dict(sorted(cmd_counts.items())),
        refpb_per_bank=refpb_per_bank,
        sim_cycles=window,
        warmup_cycles=meas_start,
        total_cycles=meas_end,
        non_standard_rate=device_cfg.non_standard_rate,
        wall_seconds=time.perf_counter() - wall_start,
    )
    return RunResult(report=report, trace=trace, measure_start=meas_start,
                     measure_end=meas_end, device=device)


def _tck_ns(sim: SimConfig) -> float:
    from .config import clock_scheme
    return clock_scheme(sim.device).tck_ns


def _percentile(sorted_values, q: float) -> float:
    if not sorted_values:
        return 0.0
    idx = min(len(sorted_values) - 1, int(q * len(sorted_values)))
    return sorted_values[idx]


def measure_window(result: RunResult, start: int, end: int) -> float:
    """Data-bus busy fraction over [start, end) of the measured phase."""
    if not (result.measure_start <= start < end <= result.measure_end):
        raise WindowOutOfRange(
            f"window [{start}, {end}) outside measured phase "
            f"[{result.measure_start}, {result.measure_end})")
    return result.device.data_bus.busy_cycles(start, end) / (end - start)
