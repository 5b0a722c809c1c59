"""Cycle-accurate LPDDR4/LPDDR5 memory subsystem simulator."""

from .config import (BankMode, ClockScheme, ConfigError, ControllerConfig,
                     DeviceConfig, GeometryMismatch, ModeRateMismatch,
                     BurstLengthIllegal, PagePolicy, SimConfig, Standard,
                     TimingSet, TrafficConfig, TrafficPattern, burst_duration,
                     clock_scheme, device_config, load_sim_config,
                     ns_to_cycles, theoretical_max_bandwidth, validate)
from .controller import (AddressMapper, Controller, MappedAddress, Request,
                         ReqKind, apply_page_policy, fr_fcfs_select,
                         map_address)
from .engine import RunResult, SimReport, WindowOutOfRange, measure_window, run
from .protocol import (BankPhase, BankState, Command, CommandKind,
                       DeviceModel, IllegalIssue, can_issue, data_interval,
                       issue, slot_cost)
from .sweep import (FIGURE_PRESETS, EmptyInput, SweepSpec, emit_csv,
                    figure_sweep, run_sweep)
from .trace import (MalformedTrace, TraceRecord, Violation, read_trace,
                    validate_trace, write_trace)
from .traffic import BudgetExhausted, Injector, TrafficGenerator, inject

__version__ = "0.1.0"
