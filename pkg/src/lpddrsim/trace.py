"""Command-trace file format and an independent legality checker.

The checker replays a trace against a from-scratch constraint table built
straight from the timing parameters.  It shares no scheduling or
state-machine code with the live device model, so an engine bug cannot
hide from it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

from .config import SimConfig, derive_cycles
from .protocol import CommandKind, slot_cost


class MalformedTrace(ValueError):
    pass


class TraceRecord(NamedTuple):
    cycle: int
    kind: str
    bank_group: int
    bank: int
    address: int | None  # row for ACT, column for column commands


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: int  # record index of the offending command
    other: int  # record index of the earlier related command, -1 if none
    message: str

    def __str__(self):
        return f"{self.constraint} at record {self.index}: {self.message}"


KINDS = ("ACT", "RD", "WR", "RDA", "WRA", "PRE", "REFpb")
_COLUMN = ("RD", "WR", "RDA", "WRA")
_READS = ("RD", "RDA")


def write_trace(records, path):
    with open(path, "w") as fh:
        for r in records:
            addr = "-" if r.address is None else str(r.address)
            fh.write(f"{r.cycle},{r.kind},{r.bank_group},{r.bank},{addr}\n")


def read_trace(path) -> list[TraceRecord]:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise MalformedTrace(f"line {lineno}: expected 5 fields, "
                                     f"got {len(parts)}")
            cycle_s, kind, bg_s, bank_s, addr_s = parts
            if kind not in KINDS:
                raise MalformedTrace(f"line {lineno}: unknown kind {kind!r}")
            try:
                cycle = int(cycle_s)
                bg = int(bg_s)
                bank = int(bank_s)
                addr = None if addr_s == "-" else int(addr_s)
            except ValueError as exc:
                raise MalformedTrace(f"line {lineno}: {exc}") from exc
            records.append(TraceRecord(cycle, kind, bg, bank, addr))
    return records


class _BankLedger:
    """Per-bank record of the last relevant command times, kept by the
    checker independently of the live bank state machine."""

    __slots__ = ("open", "act_time", "pre_done", "ref_done", "rd_data_end",
                 "wr_data_end", "act_index", "last_index")

    def __init__(self):
        self.open = False
        self.act_time = None
        self.pre_done = 0  # cycle the last precharge completes
        self.ref_done = 0
        self.rd_data_end = None
        self.wr_data_end = None
        self.act_index = -1
        self.last_index = -1


def validate_trace(records, sim: SimConfig) -> list[Violation]:
    """Replay `records` and return every timing, state-machine or bus
    violation found; an empty list means the trace is legal.

    Records must be sorted by issue cycle (MalformedTrace otherwise).
    Bus turnaround padding is a controller policy, not a device rule, so
    the checker intentionally does not demand it.
    """
    t = derive_cycles(sim.timing, sim.device)
    standard = sim.device.standard
    nbanks = sim.device.banks
    violations = []

    banks = [_BankLedger() for _ in range(nbanks)]
    acts = deque()  # (cycle, index) of recent ACTs, for tRRD/tFAW
    cols = deque(maxlen=1)  # last column command (cycle, index, group)
    cmd_bus_end = 0  # end of the latest command-bus reservation
    cmd_bus_index = -1
    data_intervals = deque()  # (start, end, index) reserved data bus

    def bad(name, index, other, msg):
        violations.append(Violation(name, index, other, msg))

    last_cycle = None
    for i, rec in enumerate(records):
        if last_cycle is not None and rec.cycle < last_cycle:
            raise MalformedTrace(f"record {i} not sorted by issue cycle")
        last_cycle = rec.cycle
        if not 0 <= rec.bank < nbanks:
            raise MalformedTrace(f"record {i}: bank {rec.bank} out of range")
        now = rec.cycle
        kind = rec.kind
        b = banks[rec.bank]

        # command bus: slots [now, now + cost) must be free
        cost = slot_cost(standard, CommandKind(kind))
        if now < cmd_bus_end:
            bad("command-bus-overlap", i, cmd_bus_index,
                f"{kind} at {now} inside a slot reserved until {cmd_bus_end}")
        cmd_bus_end = max(cmd_bus_end, now + cost)
        cmd_bus_index = i

        if kind == "ACT":
            if b.open:
                bad("act-on-active-bank", i, b.act_index,
                    f"bank {rec.bank} already has an open row")
            if now < b.pre_done:
                bad("tRP", i, b.last_index,
                    f"ACT at {now} before precharge completes at {b.pre_done}")
            if now < b.ref_done:
                bad("tRFCpb", i, b.last_index,
                    f"ACT at {now} during refresh until {b.ref_done}")
            if acts:
                prev_cycle, prev_index = acts[-1]
                if now < prev_cycle + t.trrd:
                    bad("tRRD", i, prev_index,
                        f"ACT at {now}, previous ACT at {prev_cycle}")
            if len(acts) >= 4:
                w_cycle, w_index = acts[-4]
                if now < w_cycle + t.tfaw:
                    bad("tFAW", i, w_index,
                        f"5th ACT at {now} within tFAW window from {w_cycle}")
            acts.append((now, i))
            if len(acts) > 4:
                acts.popleft()
            b.open = True
            b.act_time = now
            b.act_index = i
            b.rd_data_end = None
            b.wr_data_end = None

        elif kind in _COLUMN:
            if not b.open:
                bad("column-without-open-row", i, b.last_index,
                    f"{kind} to bank {rec.bank} with no activated row")
            elif now < b.act_time + t.trcd:
                bad("tRCD", i, b.act_index,
                    f"{kind} at {now}, ACT at {b.act_time}, tRCD={t.trcd}")
            if cols:
                c_cycle, c_index, c_group = cols[0]
                spacing = t.tccd_l if (sim.device.bank_groups > 1
                                       and c_group == rec.bank_group) else t.tccd_s
                if now < c_cycle + spacing:
                    bad("tCCD", i, c_index,
                        f"column at {now}, previous column at {c_cycle}, "
                        f"required spacing {spacing}")
            cols.clear()
            cols.append((now, i, rec.bank_group))

            is_read = kind in _READS
            if is_read and b.wr_data_end is not None:
                if now < b.wr_data_end + t.twtr:
                    bad("tWTR", i, b.last_index,
                        f"read at {now} before write recovery at "
                        f"{b.wr_data_end + t.twtr}")

            start = now + (t.rl if is_read else t.wl)
            if t.split_burst:
                h = t.half_burst
                new = [(start, start + h), (start + h + t.gap, start + h + t.gap + h)]
            else:
                new = [(start, start + t.burst)]
            while data_intervals and data_intervals[0][1] <= now:
                data_intervals.popleft()
            for s, e in new:
                for s2, e2, j in data_intervals:
                    if s < e2 and s2 < e:
                        bad("data-bus-overlap", i, j,
                            f"burst [{s}, {e}) overlaps [{s2}, {e2})")
                data_intervals.append((s, e, i))
            data_end = new[-1][1]
            if is_read:
                b.rd_data_end = data_end
            else:
                b.wr_data_end = data_end

            if kind in ("RDA", "WRA"):
                # implicit precharge: starts after write recovery / read to
                # precharge, not before tRAS from the activate
                if is_read:
                    pre_start = max(b.act_time + t.tras, data_end + t.trtp)
                else:
                    pre_start = max(b.act_time + t.tras, data_end + t.twr)
                b.open = False
                b.pre_done = pre_start + t.trp

        elif kind == "PRE":
            if not b.open:
                bad("pre-without-open-row", i, b.last_index,
                    f"PRE to bank {rec.bank} with no open row")
            else:
                if now < b.act_time + t.tras:
                    bad("tRAS", i, b.act_index,
                        f"PRE at {now}, ACT at {b.act_time}, tRAS={t.tras}")
                if b.rd_data_end is not None and now < b.rd_data_end + t.trtp:
                    bad("tRTP", i, b.last_index,
                        f"PRE at {now} before read-to-precharge time "
                        f"{b.rd_data_end + t.trtp}")
                if b.wr_data_end is not None and now < b.wr_data_end + t.twr:
                    bad("tWR", i, b.last_index,
                        f"PRE at {now} before write recovery "
                        f"{b.wr_data_end + t.twr}")
            b.open = False
            b.pre_done = now + t.trp

        elif kind == "REFpb":
            if b.open:
                bad("refresh-on-active-bank", i, b.act_index,
                    f"REFpb to bank {rec.bank} with an open row")
            if now < b.pre_done:
                bad("tRP", i, b.last_index,
                    f"REFpb at {now} before precharge completes at {b.pre_done}")
            if now < b.ref_done:
                bad("tRFCpb", i, b.last_index,
                    f"REFpb at {now} during refresh until {b.ref_done}")
            b.ref_done = now + t.trfcpb

        b.last_index = i

    return violations
