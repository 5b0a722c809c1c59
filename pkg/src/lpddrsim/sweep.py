"""Sweep harness: figure presets over data rates and configurations,
parallel execution and CSV emission."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .config import (DEFAULT_TIMINGS, LP4_RATES, LP5_RATES, BankMode,
                     ConfigError, ControllerConfig, PagePolicy, SimConfig,
                     Standard, TimingSet, TrafficConfig, TrafficPattern,
                     device_config)
from .engine import SimReport, run

log = logging.getLogger("lpddrsim.sweep")


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class Curve:
    standard: Standard
    bank_mode: BankMode
    burst_length: int
    pattern: TrafficPattern
    read_ratio: float


@dataclass
class SweepSpec:
    curves: list
    rates: dict = field(default_factory=lambda: {
        Standard.LPDDR4: list(LP4_RATES), Standard.LPDDR5: list(LP5_RATES)})
    seeds: list = field(default_factory=lambda: [1])
    request_budget: int = 100_000
    timing_overrides: dict = field(default_factory=dict)


def _panel(pattern, burst_length, with_8b):
    seq = TrafficPattern(pattern)
    curves = []
    for ratio in (0.5, 1.0):
        curves.append(Curve(Standard.LPDDR4, BankMode.LP4_8B, burst_length, seq, ratio))
    for ratio in (0.5, 1.0):
        curves.append(Curve(Standard.LPDDR5, BankMode.LP5_16B, burst_length, seq, ratio))
        curves.append(Curve(Standard.LPDDR5, BankMode.LP5_BG, burst_length, seq, ratio))
    if with_8b:
        for ratio in (0.5, 1.0):
            curves.append(Curve(Standard.LPDDR5, BankMode.LP5_8B, 32, seq, ratio))
    return curves


# The four panels: sequential/random x BL16/BL32.  8B mode only exists in
# the BL32 panels because its burst length is fixed to 32.
FIGURE_PRESETS = {
    "1a": _panel("sequential", 16, with_8b=False),
    "1b": _panel("sequential", 32, with_8b=True),
    "1c": _panel("random", 16, with_8b=False),
    "1d": _panel("random", 32, with_8b=True),
}


def figure_sweep(figure: str, request_budget: int = 100_000,
                 seeds=(1,)) -> SweepSpec:
    if figure not in FIGURE_PRESETS:
        raise ConfigError(f"unknown figure preset {figure!r}; "
                          f"choose from {sorted(FIGURE_PRESETS)}")
    return SweepSpec(curves=list(FIGURE_PRESETS[figure]), seeds=list(seeds),
                     request_budget=request_budget)


def expand(spec: SweepSpec) -> list[SimConfig]:
    """All valid (curve, rate, seed) points; invalid pairs are skipped with
    a logged notice (bank modes only cover part of the rate range)."""
    points = []
    for curve in spec.curves:
        for rate in spec.rates[curve.standard]:
            try:
                device = device_config(curve.standard, rate, curve.bank_mode,
                                       curve.burst_length)
            except ConfigError as exc:
                log.info("skipping %s %s at %d MT/s: %s", curve.standard.value,
                         curve.bank_mode.value, rate, exc)
                continue
            timing = DEFAULT_TIMINGS[curve.standard]
            if spec.timing_overrides:
                timing = replace(timing, **spec.timing_overrides)
            policy = (PagePolicy.OPEN
                      if curve.pattern is TrafficPattern.SEQUENTIAL
                      else PagePolicy.CLOSED)
            for seed in spec.seeds:
                points.append(SimConfig(
                    device=device,
                    timing=timing,
                    controller=ControllerConfig(page_policy=policy),
                    traffic=TrafficConfig(pattern=curve.pattern,
                                          read_ratio=curve.read_ratio,
                                          seed=seed,
                                          request_budget=spec.request_budget)))
    return points


def _run_point(sim: SimConfig) -> SimReport:
    return run(sim).report


REPORT_SORT_KEY = ("standard", "bank_mode", "traffic", "rw_ratio",
                   "data_rate_mts", "seed")


def sort_reports(reports):
    return sorted(reports, key=lambda r: tuple(getattr(r, k)
                                               for k in REPORT_SORT_KEY))


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[SimReport]:
    """Run every point of the sweep; `jobs` > 1 uses worker processes.

    The result order is independent of execution order (post-sorted).
    """
    points = expand(spec)
    if jobs <= 1 or len(points) <= 1:
        reports = [_run_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_point, points))
    return sort_reports(reports)


CSV_HEADER = ("standard,data_rate_mts,bank_mode,burst_length,traffic,"
              "rw_ratio,seed,bandwidth_gbps,utilization,row_hit_rate,"
              "avg_read_latency_ns,sim_cycles")


def csv_row(report: SimReport) -> str:
    return ",".join((
        report.standard,
        str(report.data_rate_mts),
        report.bank_mode,
        str(report.burst_length),
        report.traffic,
        repr(report.rw_ratio),
        str(report.seed),
        repr(report.bandwidth_gbps),
        repr(report.utilization),
        repr(report.row_hit_rate),
        repr(report.avg_read_latency_ns),
        str(report.sim_cycles),
    ))


def emit_csv(reports) -> str:
    """CSV document, one row per report, sorted for reproducible output."""
    reports = list(reports)
    if not reports:
        raise EmptyInput("no reports to emit")
    lines = [CSV_HEADER]
    lines.extend(csv_row(r) for r in sort_reports(reports))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list[dict]:
    """Inverse of emit_csv for the numeric fields (exact round-trip)."""
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unrecognized CSV header")
    out = []
    for line in lines[1:]:
        (standard, rate, mode, bl, traffic, ratio, seed, bw, util, hit,
         lat, cycles) = line.split(",")
        out.append({
            "standard": standard, "data_rate_mts": int(rate),
            "bank_mode": mode, "burst_length": int(bl), "traffic": traffic,
            "rw_ratio": float(ratio), "seed": int(seed),
            "bandwidth_gbps": float(bw), "utilization": float(util),
            "row_hit_rate": float(hit), "avg_read_latency_ns": float(lat),
            "sim_cycles": int(cycles),
        })
    return out
