"""Device-side protocol model: command set, per-bank state machine,
inter-command timing legality and bus occupancy.

All times are integer command-clock cycles.  A DeviceModel is mutable and
belongs to exactly one simulation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .config import (DEFAULT_TIMINGS, DeviceConfig, Standard, TimingCycles,
                     TimingSet, derive_cycles)

FAR_FUTURE = 1 << 62


class CommandKind(str, Enum):
    ACT = "ACT"
    RD = "RD"
    WR = "WR"
    RDA = "RDA"
    WRA = "WRA"
    PRE = "PRE"
    REFPB = "REFpb"


COLUMN_KINDS = frozenset((CommandKind.RD, CommandKind.WR, CommandKind.RDA,
                          CommandKind.WRA))
READ_KINDS = frozenset((CommandKind.RD, CommandKind.RDA))
AUTO_PRECHARGE = frozenset((CommandKind.RDA, CommandKind.WRA))


def slot_cost(standard: Standard, kind: CommandKind) -> int:
    """Command-bus occupancy in command-clock cycles."""
    if standard is Standard.LPDDR4:
        return 4 if kind is CommandKind.ACT else 2
    return 2 if kind is CommandKind.ACT else 1


@dataclass(slots=True)
class Command:
    """One device command.  Column commands carry both the row (for
    legality checks) and the column (for the trace)."""

    kind: CommandKind
    bank: int
    bank_group: int = 0
    row: int | None = None
    column: int | None = None
    issue_cycle: int = -1


class IllegalIssue(RuntimeError):
    """A command was issued that can_issue rejects; simulation bug."""


class BankPhase(str, Enum):
    PRECHARGED = "Precharged"
    ACTIVATING = "Activating"
    ACTIVE = "Active"
    PRECHARGING = "Precharging"
    REFRESHING = "Refreshing"


class BankState:
    """Finite-state record of one bank: open row plus the earliest cycle at
    which each class of command may next be issued."""

    __slots__ = ("active", "open_row", "act_cycle", "activating_until",
                 "ready_act", "ready_rd", "ready_wr", "ready_pre",
                 "refresh_until", "pre_until")

    def __init__(self):
        self.active = False
        self.open_row = None
        self.act_cycle = -1
        self.activating_until = 0
        self.ready_act = 0
        self.ready_rd = 0
        self.ready_wr = 0
        self.ready_pre = 0
        self.refresh_until = 0
        self.pre_until = 0

    @property
    def earliest_act(self) -> int:
        return self.ready_act

    @property
    def earliest_ref(self) -> int:
        return self.ready_act

    @property
    def earliest_rd(self) -> int:
        return self.ready_rd

    @property
    def earliest_wr(self) -> int:
        return self.ready_wr

    @property
    def earliest_pre(self) -> int:
        return self.ready_pre

    def phase_at(self, now: int) -> BankPhase:
        if self.active:
            return (BankPhase.ACTIVATING if now < self.activating_until
                    else BankPhase.ACTIVE)
        if now < self.refresh_until:
            return BankPhase.REFRESHING
        if now < self.pre_until:
            return BankPhase.PRECHARGING
        return BankPhase.PRECHARGED


class DataBus:
    """Reservation ledger for the data bus.

    Intervals are half-open [start, end) in command-clock cycles.  New
    bursts may fill gaps between existing same-direction reservations
    (needed for interleaved BG BL32 bursts) but always start after every
    already-reserved opposite-direction burst plus the turnaround penalty.
    """

    __slots__ = ("future", "max_read_end", "max_write_end", "log")

    def __init__(self):
        self.future = []  # (start, end, is_read), kept sorted by start
        self.max_read_end = 0
        self.max_write_end = 0
        self.log = []  # every reservation ever, for window measurements

    def prune(self, now: int):
        if self.future and self.future[0][1] <= now:
            self.future = [iv for iv in self.future if iv[1] > now]

    def earliest_fit(self, intervals, is_read: bool, turnaround: int) -> int:
        """Smallest non-negative shift making all intervals conflict-free."""
        shift = 0
        opp_end = self.max_write_end if is_read else self.max_read_end
        first_start = intervals[0][0]
        if first_start < opp_end + turnaround:
            shift = opp_end + turnaround - first_start
        future = self.future
        moved = True
        while moved:
            moved = False
            for s, e in intervals:
                s += shift
                e += shift
                for s2, e2, r2 in future:
                    if r2 == is_read and s < e2 and s2 < e:
                        shift += e2 - s
                        moved = True
                        break
                if moved:
                    break
        return shift

    def reserve(self, intervals, is_read: bool):
        for s, e in intervals:
            self.future.append((s, e, is_read))
            self.log.append((s, e))
            if is_read:
                if e > self.max_read_end:
                    self.max_read_end = e
            elif e > self.max_write_end:
                self.max_write_end = e
        self.future.sort()

    def busy_cycles(self, lo: int, hi: int) -> int:
        total = 0
        for s, e in self.log:
            if s < hi and e > lo:
                total += min(e, hi) - max(s, lo)
        return total


class DeviceModel:
    """Mutable device state: banks, command bus, data bus, ACT history."""

    def __init__(self, config: DeviceConfig, cycles: TimingCycles):
        self.config = config
        self.t = cycles
        self.banks = [BankState() for _ in range(config.banks)]
        self.banks_per_group = config.banks // config.bank_groups
        self.cmd_bus_free = 0
        self.cmd_slots_used = 0
        self.act_history = deque(maxlen=4)  # tFAW window, channel-wide
        self.last_act = -FAR_FUTURE
        self.last_col_cycle = -FAR_FUTURE
        self.last_col_group = -1
        self.data_bus = DataBus()
        self._slot_cost = {
            kind: slot_cost(config.standard, kind) for kind in CommandKind
        }

    def group_of(self, bank: int) -> int:
        if self.config.bank_groups == 1:
            return 0
        return bank % self.config.bank_groups

    # -- earliest legal issue cycle per command class ----------------------

    def earliest_act(self, bank: int) -> int:
        b = self.banks[bank]
        if b.active:
            return FAR_FUTURE
        t = b.ready_act
        rrd = self.last_act + self.t.trrd
        if rrd > t:
            t = rrd
        if len(self.act_history) == 4:
            faw = self.act_history[0] + self.t.tfaw
            if faw > t:
                t = faw
        if self.cmd_bus_free > t:
            t = self.cmd_bus_free
        return t

    def earliest_column(self, bank: int, is_read: bool) -> int:
        b = self.banks[bank]
        if not b.active:
            return FAR_FUTURE
        t = b.ready_rd if is_read else b.ready_wr
        if self.cmd_bus_free > t:
            t = self.cmd_bus_free
        group = self.group_of(bank)
        if self.last_col_group == group:
            ccd = self.last_col_cycle + self.t.tccd_l
        else:
            ccd = self.last_col_cycle + self.t.tccd_s
        if ccd > t:
            t = ccd
        intervals = self.data_interval_at(t, is_read)
        turnaround = (self.t.wr_rd_turnaround if is_read
                      else self.t.rd_wr_turnaround)
        return t + self.data_bus.earliest_fit(intervals, is_read, turnaround)

    def earliest_pre(self, bank: int) -> int:
        b = self.banks[bank]
        if not b.active:
            return FAR_FUTURE
        return max(b.ready_pre, self.cmd_bus_free)

    def earliest_refresh(self, bank: int) -> int:
        b = self.banks[bank]
        if b.active:
            return FAR_FUTURE
        return max(b.ready_act, self.cmd_bus_free)

    def data_interval_at(self, issue: int, is_read: bool):
        """Data-bus intervals of a column command issued at `issue`."""
        t = self.t
        start = issue + (t.rl if is_read else t.wl)
        if t.split_burst:
            h = t.half_burst
            return ((start, start + h), (start + h + t.gap, start + h + t.gap + h))
        return ((start, start + t.burst),)

    def earliest_for(self, cmd: Command) -> int:
        kind = cmd.kind
        if kind is CommandKind.ACT:
            return self.earliest_act(cmd.bank)
        if kind in COLUMN_KINDS:
            b = self.banks[cmd.bank]
            if cmd.row is not None and b.open_row != cmd.row:
                return FAR_FUTURE
            return self.earliest_column(cmd.bank, kind in READ_KINDS)
        if kind is CommandKind.PRE:
            return self.earliest_pre(cmd.bank)
        if kind is CommandKind.REFPB:
            return self.earliest_refresh(cmd.bank)
        raise ValueError(f"unknown command kind {kind}")

    # -- spec surface ------------------------------------------------------

    def can_issue(self, cmd: Command, now: int) -> bool:
        if not 0 <= cmd.bank < self.config.banks:
            raise ValueError(f"bank {cmd.bank} out of range")
        return self.earliest_for(cmd) <= now

    def issue(self, cmd: Command, now: int):
        """Apply the state transitions of `cmd` issued at `now`."""
        if not self.can_issue(cmd, now):
            raise IllegalIssue(f"{cmd.kind.value} bank={cmd.bank} at {now}")
        t = self.t
        b = self.banks[cmd.bank]
        kind = cmd.kind
        cmd.issue_cycle = now
        cmd.bank_group = self.group_of(cmd.bank)
        cost = self._slot_cost[kind]
        self.cmd_bus_free = now + cost
        self.cmd_slots_used += cost

        if kind is CommandKind.ACT:
            b.active = True
            b.open_row = cmd.row
            b.act_cycle = now
            b.activating_until = now + t.trcd
            b.ready_rd = now + t.trcd
            b.ready_wr = now + t.trcd
            b.ready_pre = now + t.tras
            self.act_history.append(now)
            self.last_act = now
            return None

        if kind in COLUMN_KINDS:
            is_read = kind in READ_KINDS
            intervals = self.data_interval_at(now, is_read)
            self.data_bus.prune(now)
            self.data_bus.reserve(intervals, is_read)
            self.last_col_cycle = now
            self.last_col_group = self.group_of(cmd.bank)
            data_end = intervals[-1][1]
            if is_read:
                b.ready_pre = max(b.ready_pre, data_end + t.trtp)
            else:
                b.ready_pre = max(b.ready_pre, data_end + t.twr)
                b.ready_rd = max(b.ready_rd, data_end + t.twtr)
            if kind in AUTO_PRECHARGE:
                pre_start = b.ready_pre
                b.active = False
                b.open_row = None
                b.pre_until = pre_start + t.trp
                b.ready_act = pre_start + t.trp
            return data_end

        if kind is CommandKind.PRE:
            b.active = False
            b.open_row = None
            b.pre_until = now + t.trp
            b.ready_act = now + t.trp
            return None

        if kind is CommandKind.REFPB:
            b.refresh_until = now + t.trfcpb
            b.ready_act = now + t.trfcpb
            return None

        raise ValueError(f"unknown command kind {kind}")


def can_issue(cmd: Command, device: DeviceModel, now: int) -> bool:
    """Pure predicate: may `cmd` be issued at cycle `now`?"""
    return device.can_issue(cmd, now)


def issue(cmd: Command, device: DeviceModel, now: int):
    """Issue `cmd` at `now`, updating bank, bus and window state."""
    return device.issue(cmd, now)


def data_interval(cmd: Command, config: DeviceConfig, now: int,
                  timing: TimingSet | None = None):
    """Data-bus interval(s) of a column command issued at `now`.

    BG mode with BL32 yields two half-bursts separated by the configured
    gap; every other mode yields a single burst_duration interval.
    """
    if cmd.kind not in COLUMN_KINDS:
        raise ValueError(f"{cmd.kind.value} is not a column command")
    t = derive_cycles(timing or DEFAULT_TIMINGS[config.standard], config)
    start = now + (t.rl if cmd.kind in READ_KINDS else t.wl)
    if t.split_burst:
        h = t.half_burst
        return [(start, start + h), (start + h + t.gap, start + h + t.gap + h)]
    return [(start, start + t.burst)]
