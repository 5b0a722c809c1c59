"""Static configuration: device geometry, clocking, timing parameters and
the theoretical bounds derived from them.

Everything in here is immutable after validation and safe to share between
concurrently running simulations.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ModeRateMismatch(ConfigError):
    pass


class BurstLengthIllegal(ConfigError):
    pass


class GeometryMismatch(ConfigError):
    pass


class Standard(str, Enum):
    LPDDR4 = "LPDDR4"
    LPDDR5 = "LPDDR5"


class BankMode(str, Enum):
    LP4_8B = "LP4_8B"
    LP5_16B = "LP5_16B"
    LP5_BG = "LP5_BG"
    LP5_8B = "LP5_8B"


class PagePolicy(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


class TrafficPattern(str, Enum):
    SEQUENTIAL = "sequential"
    RANDOM = "random"


BANK_COUNT = {
    BankMode.LP4_8B: 8,
    BankMode.LP5_16B: 16,
    BankMode.LP5_BG: 16,
    BankMode.LP5_8B: 8,
}

BANK_GROUP_COUNT = {
    BankMode.LP4_8B: 1,
    BankMode.LP5_16B: 1,
    BankMode.LP5_BG: 4,
    BankMode.LP5_8B: 1,
}

# Data rates (MT/s) of the standard speed grades, per standard.  Other
# rates are accepted but reported as non-standard.
LP4_RATES = (533, 1066, 1600, 2133, 2666, 3200, 3733, 4266)
LP5_RATES = (533, 1067, 1600, 2133, 2750, 3200, 3733, 4267, 4800, 5500, 6000, 6400)

MAX_RATE = {Standard.LPDDR4: 4266, Standard.LPDDR5: 6400}

GIBIT = 1 << 30


@dataclass(frozen=True)
class DeviceConfig:
    """Geometry, bank mode and clocking of one simulated channel."""

    standard: Standard
    data_rate: int  # MT/s
    bank_mode: BankMode
    burst_length: int
    channel_width: int = 16  # bits
    density_gbit: int = 0  # 0 = default for the standard
    wck_ck_ratio: int = 0  # 0 = derived from data_rate (LPDDR5 only)
    rows_per_bank: int = 0
    columns_per_row: int = 0
    column_width_bits: int = 0

    @property
    def banks(self) -> int:
        return BANK_COUNT[self.bank_mode]

    @property
    def bank_groups(self) -> int:
        return BANK_GROUP_COUNT[self.bank_mode]

    @property
    def burst_bytes(self) -> int:
        return self.burst_length * self.channel_width // 8

    @property
    def capacity_bytes(self) -> int:
        bits = (self.banks * self.rows_per_bank * self.columns_per_row
                * self.column_width_bits)
        return bits // 8

    @property
    def non_standard_rate(self) -> bool:
        rates = LP4_RATES if self.standard is Standard.LPDDR4 else LP5_RATES
        return self.data_rate not in rates


def device_config(standard, data_rate, bank_mode, burst_length,
                  channel_width=16, density_gbit=0, wck_ck_ratio=0,
                  rows_per_bank=0, columns_per_row=0,
                  column_width_bits=0) -> DeviceConfig:
    """Build a DeviceConfig, filling derivable fields with defaults.

    Default geometry assumes a 2 KB page (1024 columns of channel width);
    rows are then fixed by the density.  The result is validated.
    """
    standard = Standard(standard)
    bank_mode = BankMode(bank_mode)
    if density_gbit == 0:
        density_gbit = 8 if standard is Standard.LPDDR4 else 16
    if wck_ck_ratio == 0 and standard is Standard.LPDDR5:
        wck_ck_ratio = 2 if data_rate <= 3200 else 4
    if column_width_bits == 0:
        column_width_bits = channel_width
    if columns_per_row == 0:
        columns_per_row = 16384 // column_width_bits  # 2 KB page
    if rows_per_bank == 0:
        banks = BANK_COUNT[bank_mode]
        row_bits = columns_per_row * column_width_bits
        rows_per_bank = density_gbit * GIBIT // (banks * row_bits)
    return validate(DeviceConfig(
        standard=standard, data_rate=data_rate, bank_mode=bank_mode,
        burst_length=burst_length, channel_width=channel_width,
        density_gbit=density_gbit, wck_ck_ratio=wck_ck_ratio,
        rows_per_bank=rows_per_bank, columns_per_row=columns_per_row,
        column_width_bits=column_width_bits))


def validate(config: DeviceConfig) -> DeviceConfig:
    """Check all DeviceConfig invariants; returns the config unchanged."""
    c = config
    if c.data_rate <= 0:
        raise ConfigError(f"data_rate must be positive, got {c.data_rate}")
    if c.data_rate > MAX_RATE[c.standard]:
        raise ModeRateMismatch(
            f"{c.standard.value} supports at most {MAX_RATE[c.standard]} MT/s, "
            f"got {c.data_rate}")
    if c.burst_length not in (16, 32):
        raise BurstLengthIllegal(f"burst_length must be 16 or 32, got {c.burst_length}")

    if c.standard is Standard.LPDDR4:
        if c.bank_mode is not BankMode.LP4_8B:
            raise ModeRateMismatch(f"LPDDR4 requires LP4_8B mode, got {c.bank_mode.value}")
    else:
        if c.bank_mode is BankMode.LP4_8B:
            raise ModeRateMismatch("LP4_8B is not an LPDDR5 bank mode")
        if c.data_rate > 3200:
            if c.bank_mode not in (BankMode.LP5_BG, BankMode.LP5_8B):
                raise ModeRateMismatch(
                    f"{c.bank_mode.value} is limited to 3200 MT/s, got {c.data_rate}")
            if c.wck_ck_ratio != 4:
                raise ModeRateMismatch(
                    f"rates above 3200 MT/s require a 4:1 WCK:CK ratio, got "
                    f"{c.wck_ck_ratio}:1")
        else:
            if c.bank_mode not in (BankMode.LP5_16B, BankMode.LP5_8B):
                raise ModeRateMismatch(
                    f"{c.bank_mode.value} requires a rate above 3200 MT/s")
            if c.wck_ck_ratio != 2:
                raise ModeRateMismatch(
                    f"rates up to 3200 MT/s require a 2:1 WCK:CK ratio, got "
                    f"{c.wck_ck_ratio}:1")
    if c.bank_mode is BankMode.LP5_8B and c.burst_length != 32:
        raise BurstLengthIllegal("8B mode fixes the burst length to 32")

    expected_bits = c.density_gbit * GIBIT
    actual_bits = c.banks * c.rows_per_bank * c.columns_per_row * c.column_width_bits
    if actual_bits != expected_bits:
        raise GeometryMismatch(
            f"geometry holds {actual_bits} bits but density says {expected_bits}")
    if c.burst_length > c.columns_per_row:
        raise GeometryMismatch("burst_length exceeds columns_per_row")
    return config


@dataclass(frozen=True)
class ClockScheme:
    """Command/data clock layout of one configuration."""

    command_clock_hz: float
    data_clock_hz: float
    command_bus_is_ddr: bool
    transfers_per_command_cycle: int

    @property
    def tck_ns(self) -> float:
        return 1e9 / self.command_clock_hz


def clock_scheme(config: DeviceConfig) -> ClockScheme:
    rate_hz = config.data_rate * 1e6
    if config.standard is Standard.LPDDR4:
        return ClockScheme(
            command_clock_hz=rate_hz / 2,
            data_clock_hz=rate_hz / 2,
            command_bus_is_ddr=False,
            transfers_per_command_cycle=2)
    ratio = config.wck_ck_ratio
    return ClockScheme(
        command_clock_hz=rate_hz / (2 * ratio),
        data_clock_hz=rate_hz / 2,
        command_bus_is_ddr=True,
        transfers_per_command_cycle=2 * ratio)


def ns_to_cycles(t_ns: float, clock: ClockScheme) -> int:
    """Smallest number of command-clock cycles whose duration covers t_ns.

    The product is rounded to 9 decimals before the ceiling so that exact
    multiples of the clock period are not bumped up by float noise.
    """
    if t_ns < 0:
        raise ValueError(f"negative duration: {t_ns}")
    return math.ceil(round(t_ns * clock.command_clock_hz * 1e-9, 9))


def theoretical_max_bandwidth(config: DeviceConfig) -> float:
    """Peak bandwidth in Gb/s: data rate times channel width."""
    return config.data_rate * config.channel_width / 1000


def burst_duration(config: DeviceConfig) -> int:
    """Data-bus occupancy of one burst, in command-clock cycles."""
    tpc = clock_scheme(config).transfers_per_command_cycle
    if config.burst_length % tpc:
        raise ConfigError(
            f"burst_length {config.burst_length} is not a multiple of "
            f"{tpc} transfers per command cycle")
    return config.burst_length // tpc


# Read/write latency (command-clock cycles) per standard speed grade.
# JEDEC-style values; overridable through the timing file.
LP4_RL_WL = {
    533: (6, 4), 1066: (10, 6), 1600: (14, 8), 2133: (20, 10),
    2666: (24, 12), 3200: (28, 14), 3733: (32, 16), 4266: (36, 18),
}
LP5_RL_WL = {
    533: (3, 2), 1067: (6, 4), 1600: (7, 4), 2133: (9, 5),
    2750: (11, 6), 3200: (13, 7), 3733: (10, 6), 4267: (12, 7),
    4800: (13, 7), 5500: (15, 8), 6000: (16, 9), 6400: (17, 9),
}


def default_read_write_latency(config: DeviceConfig) -> tuple[int, int]:
    """Per-speed-grade (RL, WL) in cycles; derived for non-standard rates."""
    table = LP4_RL_WL if config.standard is Standard.LPDDR4 else LP5_RL_WL
    if config.data_rate in table:
        return table[config.data_rate]
    clock = clock_scheme(config)
    if config.standard is Standard.LPDDR4:
        rl = max(2, ns_to_cycles(17.0, clock) + 2)
        wl = max(1, ns_to_cycles(8.5, clock))
    else:
        rl = max(2, ns_to_cycles(21.0, clock))
        wl = max(1, ns_to_cycles(11.0, clock))
    return rl, wl


@dataclass(frozen=True)
class TimingSet:
    """JEDEC-style timing parameters.

    Nanosecond fields are analog values rounded up to whole command-clock
    cycles at derivation time; the cycle-native fields (``rl``, ``wl``,
    ``tCCD_*``, turnarounds, interleave gap) are used as-is.  A value of
    -1 for a cycle-native field selects the built-in default.
    """

    tRCD: float = 18.0
    tRP: float = 18.0
    tRAS: float = 42.0
    tWR: float = 34.0
    tRTP: float = 7.5
    tRRD: float = 5.0
    tFAW: float = 20.0
    tWTR: float = 12.0
    tRFCpb: float = 140.0
    tREFIpb: float = 3906.0  # per-bank refresh interval
    rl: int = -1
    wl: int = -1
    tCCD_S: int = -1
    tCCD_L: int = -1
    rd_wr_turnaround: int = 2
    wr_rd_turnaround: int = 2
    bg_interleave_gap: int = -1

    def check(self) -> "TimingSet":
        for name in ("tRCD", "tRP", "tRAS", "tWR", "tRTP", "tRRD", "tFAW",
                     "tWTR", "tRFCpb", "tREFIpb"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"timing {name} must be > 0")
        if self.tRAS < self.tRCD:
            raise ConfigError("tRAS must be >= tRCD")
        if self.tFAW < self.tRRD:
            raise ConfigError("tFAW must be >= tRRD")
        return self


DEFAULT_TIMINGS = {
    Standard.LPDDR4: TimingSet(tWR=18.0, tWTR=10.0, tRRD=10.0, tFAW=40.0),
    Standard.LPDDR5: TimingSet(),
}


@dataclass(frozen=True)
class TimingCycles:
    """TimingSet resolved to integer command-clock cycles for one config."""

    trcd: int
    trp: int
    tras: int
    twr: int
    trtp: int
    trrd: int
    tfaw: int
    twtr: int
    trfcpb: int
    trefipb: int
    rl: int
    wl: int
    tccd_s: int
    tccd_l: int
    rd_wr_turnaround: int
    wr_rd_turnaround: int
    burst: int
    split_burst: bool
    half_burst: int
    gap: int
    act_slots: int
    col_slots: int
    other_slots: int


def derive_cycles(timing: TimingSet, config: DeviceConfig) -> TimingCycles:
    """Round nanosecond timings to cycles and resolve derived values.

    Must be recomputed whenever data_rate or wck_ck_ratio changes.
    """
    timing.check()
    clock = clock_scheme(config)
    bd = burst_duration(config)
    split = config.bank_mode is BankMode.LP5_BG and config.burst_length == 32
    rl, wl = default_read_write_latency(config)
    if timing.rl >= 0:
        rl = timing.rl
    if timing.wl >= 0:
        wl = timing.wl
    # In BG mode with BL32 the burst is split in two halves, so a burst from
    # another group may start after only half a burst on the data bus.
    tccd_s = timing.tCCD_S if timing.tCCD_S >= 0 else (bd // 2 if split else bd)
    tccd_l = timing.tCCD_L if timing.tCCD_L >= 0 else bd + 2
    gap = timing.bg_interleave_gap if timing.bg_interleave_gap >= 0 else bd // 2
    if config.standard is Standard.LPDDR4:
        act_slots, col_slots, other_slots = 4, 2, 2
    else:
        act_slots, col_slots, other_slots = 2, 1, 1
    return TimingCycles(
        trcd=ns_to_cycles(timing.tRCD, clock),
        trp=ns_to_cycles(timing.tRP, clock),
        tras=ns_to_cycles(timing.tRAS, clock),
        twr=ns_to_cycles(timing.tWR, clock),
        trtp=ns_to_cycles(timing.tRTP, clock),
        trrd=ns_to_cycles(timing.tRRD, clock),
        tfaw=ns_to_cycles(timing.tFAW, clock),
        twtr=ns_to_cycles(timing.tWTR, clock),
        trfcpb=ns_to_cycles(timing.tRFCpb, clock),
        trefipb=ns_to_cycles(timing.tREFIpb, clock),
        rl=rl, wl=wl, tccd_s=tccd_s, tccd_l=tccd_l,
        rd_wr_turnaround=timing.rd_wr_turnaround,
        wr_rd_turnaround=timing.wr_rd_turnaround,
        burst=bd, split_burst=split, half_burst=bd // 2, gap=gap,
        act_slots=act_slots, col_slots=col_slots, other_slots=other_slots)


@dataclass(frozen=True)
class ControllerConfig:
    page_policy: PagePolicy = PagePolicy.OPEN
    queue_capacity: int = 64
    write_high_watermark: int = 48
    write_low_watermark: int = 16
    refresh_postpone_limit: int = 8

    def check(self) -> "ControllerConfig":
        if self.queue_capacity <= 0:
            raise ConfigError("queue_capacity must be > 0")
        if not (0 <= self.write_low_watermark < self.write_high_watermark
                <= self.queue_capacity):
            raise ConfigError("watermarks must satisfy 0 <= low < high <= capacity")
        if self.refresh_postpone_limit < 1:
            raise ConfigError("refresh_postpone_limit must be >= 1")
        return self


@dataclass(frozen=True)
class TrafficConfig:
    pattern: TrafficPattern = TrafficPattern.SEQUENTIAL
    read_ratio: float = 1.0
    seed: int = 1
    request_budget: int = 100_000
    mix: str = "bernoulli"  # or "alternate"

    def check(self) -> "TrafficConfig":
        if not 0.0 <= self.read_ratio <= 1.0:
            raise ConfigError("read_ratio must be in [0, 1]")
        if self.request_budget <= 0:
            raise ConfigError("request_budget must be > 0")
        if self.mix not in ("bernoulli", "alternate"):
            raise ConfigError(f"unknown mix mode {self.mix!r}")
        return self


@dataclass(frozen=True)
class SimConfig:
    """Everything one run needs: device, timings, controller, traffic."""

    device: DeviceConfig
    timing: TimingSet
    controller: ControllerConfig = ControllerConfig()
    traffic: TrafficConfig = TrafficConfig()


# ---------------------------------------------------------------------------
# Configuration files: INI-style, sections [device] [timings] [controller]
# [traffic]; unknown sections or keys are errors.

_DEVICE_KEYS = {
    "standard": str, "data_rate": int, "bank_mode": str, "burst_length": int,
    "channel_width": int, "density_gbit": int, "wck_ck_ratio": int,
    "rows_per_bank": int, "columns_per_row": int, "column_width_bits": int,
}
_TIMING_NS_KEYS = ("tRCD", "tRP", "tRAS", "tWR", "tRTP", "tRRD", "tFAW",
                   "tWTR", "tRFCpb", "tREFIpb")
_TIMING_CYCLE_KEYS = ("rl", "wl", "tCCD_S", "tCCD_L", "rd_wr_turnaround",
                      "wr_rd_turnaround", "bg_interleave_gap")
_CONTROLLER_KEYS = {
    "page_policy": str, "queue_capacity": int, "write_high_watermark": int,
    "write_low_watermark": int, "refresh_postpone_limit": int,
}
_TRAFFIC_KEYS = {
    "pattern": str, "read_ratio": float, "seed": int, "request_budget": int,
    "mix": str,
}

_BANK_MODE_ALIASES = {
    "8b": None,  # resolved against the standard
    "16b": BankMode.LP5_16B,
    "bg": BankMode.LP5_BG,
    "lp4_8b": BankMode.LP4_8B,
    "lp5_16b": BankMode.LP5_16B,
    "lp5_bg": BankMode.LP5_BG,
    "lp5_8b": BankMode.LP5_8B,
}


def resolve_bank_mode(name: str, standard: Standard) -> BankMode:
    key = name.strip().lower()
    if key not in _BANK_MODE_ALIASES:
        raise ConfigError(f"unknown bank mode {name!r}")
    mode = _BANK_MODE_ALIASES[key]
    if mode is None:
        mode = BankMode.LP4_8B if standard is Standard.LPDDR4 else BankMode.LP5_8B
    return mode


def resolve_standard(name: str) -> Standard:
    key = name.strip().lower()
    if key in ("lpddr4", "lp4"):
        return Standard.LPDDR4
    if key in ("lpddr5", "lp5"):
        return Standard.LPDDR5
    raise ConfigError(f"unknown standard {name!r}")


def default_config_dir() -> Path:
    env = os.environ.get("LPDDRSIM_CONFIG_DIR")
    if env:
        return Path(env)
    return Path(__file__).parent / "data"


def read_config_file(path) -> dict:
    """Parse an INI config file into {section: {key: string}} with strict keys."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (tRCD vs trcd)
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    known = {
        "device": _DEVICE_KEYS,
        "timings": dict.fromkeys(_TIMING_NS_KEYS + _TIMING_CYCLE_KEYS),
        "controller": _CONTROLLER_KEYS,
        "traffic": _TRAFFIC_KEYS,
    }
    out = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        for key in parser[section]:
            if key not in known[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}] of {path}")
        out[section] = dict(parser[section])
    return out


def _coerce(raw: dict, spec: dict) -> dict:
    out = {}
    for key, value in raw.items():
        conv = spec[key]
        try:
            out[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return out


def load_sim_config(path=None, overrides: dict | None = None) -> SimConfig:
    """Build a SimConfig from an optional file plus override values.

    Override keys mirror the file keys; section dicts under "device",
    "timings", "controller" and "traffic".  Device overrides win over the
    file, which wins over the built-in defaults for the standard.
    """
    overrides = overrides or {}
    sections = read_config_file(path) if path is not None else {}

    dev = _coerce(sections.get("device", {}), _DEVICE_KEYS)
    dev.update(overrides.get("device", {}))
    if "standard" not in dev:
        raise ConfigError("device standard is required (config file or flag)")
    standard = resolve_standard(str(dev["standard"]))
    if "data_rate" not in dev:
        raise ConfigError("device data_rate is required (config file or flag)")
    bank_mode = resolve_bank_mode(str(dev.get("bank_mode", "8b")), standard)
    burst_length = int(dev.get("burst_length",
                               32 if bank_mode is BankMode.LP5_8B else 16))
    device = device_config(
        standard, int(dev["data_rate"]), bank_mode, burst_length,
        channel_width=int(dev.get("channel_width", 16)),
        density_gbit=int(dev.get("density_gbit", 0)),
        wck_ck_ratio=int(dev.get("wck_ck_ratio", 0)),
        rows_per_bank=int(dev.get("rows_per_bank", 0)),
        columns_per_row=int(dev.get("columns_per_row", 0)),
        column_width_bits=int(dev.get("column_width_bits", 0)))

    timing = DEFAULT_TIMINGS[standard]
    tim = dict(sections.get("timings", {}))
    tim.update(overrides.get("timings", {}))
    kwargs = {}
    for key, value in tim.items():
        if key in _TIMING_NS_KEYS:
            kwargs[key] = float(value)
        else:
            kwargs[key] = int(value)
    timing = replace(timing, **kwargs).check()

    tra = _coerce(sections.get("traffic", {}), _TRAFFIC_KEYS)
    tra.update(overrides.get("traffic", {}))
    if "pattern" in tra:
        tra["pattern"] = TrafficPattern(str(tra["pattern"]).lower())
    traffic = TrafficConfig(**tra).check()

    ctl = _coerce(sections.get("controller", {}), _CONTROLLER_KEYS)
    ctl.update(overrides.get("controller", {}))
    if "page_policy" in ctl:
        ctl["page_policy"] = PagePolicy(str(ctl["page_policy"]).lower())
    else:
        # Open page suits sequential streams, closed page random ones.
        ctl["page_policy"] = (PagePolicy.OPEN
                              if traffic.pattern is TrafficPattern.SEQUENTIAL
                              else PagePolicy.CLOSED)
    controller = ControllerConfig(**ctl).check()

    return SimConfig(device=device, timing=timing, controller=controller,
                     traffic=traffic)
