"""Memory controller: address mapping, bounded read/write queues, FR-FCFS
scheduling, page policies, write draining and per-bank refresh.

The scheduler keeps per-bank, per-row FIFOs so the first-ready search is
O(banks) per decision while still preserving arrival order between
requests that touch the same row.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .config import ControllerConfig, DeviceConfig, PagePolicy
from .protocol import FAR_FUTURE, Command, CommandKind, DeviceModel


class Misaligned(ValueError):
    pass


class OutOfRange(ValueError):
    pass


class ReqKind(str, Enum):
    READ = "Read"
    WRITE = "Write"


@dataclass(slots=True)
class Request:
    kind: ReqKind
    address: int
    arrival_cycle: int = -1
    id: int = -1
    # filled in by the controller
    row: int = -1
    column: int = -1
    bank: int = -1  # flat bank index
    activated: bool = False
    done: bool = False
    blocked_by: int = -1  # id of an older conflicting request, -1 if none


@dataclass(frozen=True)
class MappedAddress:
    row: int
    column: int
    bank: int
    bank_group: int


class AddressMapper:
    """Row | column | bank | bank-group | burst-offset bit slicing (MSB to
    LSB).  The group sits in the least significant mapped bits so that
    consecutive bursts rotate across groups, then banks."""

    def __init__(self, config: DeviceConfig):
        self.config = config
        self.burst_bytes = config.burst_bytes
        self.capacity = config.capacity_bytes
        banks_per_group = config.banks // config.bank_groups
        bursts_per_row = config.columns_per_row // config.burst_length
        self.offset_bits = _exact_bits(self.burst_bytes, "burst bytes")
        self.group_bits = _exact_bits(config.bank_groups, "bank groups")
        self.bank_bits = _exact_bits(banks_per_group, "banks per group")
        self.col_bits = _exact_bits(bursts_per_row, "bursts per row")
        self.row_bits = _exact_bits(config.rows_per_bank, "rows per bank")

        self.group_shift = self.offset_bits
        self.bank_shift = self.group_shift + self.group_bits
        self.col_shift = self.bank_shift + self.bank_bits
        self.row_shift = self.col_shift + self.col_bits
        self.group_mask = (1 << self.group_bits) - 1
        self.bank_mask = (1 << self.bank_bits) - 1
        self.col_mask = (1 << self.col_bits) - 1

    def map(self, address: int) -> MappedAddress:
        if address % self.burst_bytes:
            raise Misaligned(f"address {address:#x} not aligned to "
                             f"{self.burst_bytes}-byte bursts")
        if not 0 <= address < self.capacity:
            raise OutOfRange(f"address {address:#x} outside capacity "
                             f"{self.capacity:#x}")
        group = (address >> self.group_shift) & self.group_mask
        bank = (address >> self.bank_shift) & self.bank_mask
        col = (address >> self.col_shift) & self.col_mask
        row = address >> self.row_shift
        return MappedAddress(row=row, column=col * self.config.burst_length,
                             bank=bank, bank_group=group)

    def flat_bank(self, mapped: MappedAddress) -> int:
        return mapped.bank * self.config.bank_groups + mapped.bank_group


def _exact_bits(value: int, what: str) -> int:
    bits = (value - 1).bit_length()
    if value <= 0 or (1 << bits) != value:
        raise ValueError(f"{what} must be a power of two, got {value}")
    return bits


def map_address(address: int, config: DeviceConfig) -> MappedAddress:
    """Decompose a byte address into row/column/bank/bank-group indices."""
    return AddressMapper(config).map(address)


class DrainMode(str, Enum):
    SERVING_READS = "ServingReads"
    DRAINING_WRITES = "DrainingWrites"


class _BankQueue:
    """FIFO of one bank's pending requests plus per-row sub-FIFOs so the
    oldest row hit is found in O(1)."""

    __slots__ = ("fifo", "by_row")

    def __init__(self):
        self.fifo = deque()
        self.by_row = {}

    def push(self, req: Request):
        self.fifo.append(req)
        self.by_row.setdefault(req.row, deque()).append(req)

    def head(self) -> Request | None:
        fifo = self.fifo
        while fifo and fifo[0].done:
            fifo.popleft()
        return fifo[0] if fifo else None

    def oldest_for_row(self, row: int) -> Request | None:
        q = self.by_row.get(row)
        return q[0] if q else None

    def mark_done(self, req: Request):
        req.done = True
        q = self.by_row[req.row]
        q.remove(req)
        if not q:
            del self.by_row[req.row]


class Controller:
    """One channel's controller; owns its queues and refresh debts."""

    def __init__(self, config: DeviceConfig, ctrl: ControllerConfig,
                 device: DeviceModel):
        self.config = config
        self.ctrl = ctrl
        self.device = device
        self.mapper = AddressMapper(config)
        self.policy = ctrl.page_policy
        nbanks = config.banks
        self.read_queues = [_BankQueue() for _ in range(nbanks)]
        self.write_queues = [_BankQueue() for _ in range(nbanks)]
        self.read_count = 0
        self.write_count = 0
        self.drain_mode = DrainMode.SERVING_READS
        self.next_id = 0
        self.inflight = [None] * nbanks  # activated closed-page requests
        # same-address ordering between the two queues
        self.pending_read_addrs = {}
        self.pending_write_addrs = {}
        self.live_ids = set()
        # per-bank refresh accounting
        t = device.t
        self.refresh_period = t.trefipb
        self.refresh_debt = [0] * nbanks
        stagger = t.trefipb // nbanks
        self.next_accrual = [b * stagger + t.trefipb for b in range(nbanks)]
        self.refresh_forced = [False] * nbanks
        self._target = None  # request the last selected command serves

    # -- admission ---------------------------------------------------------

    def admit(self, req: Request, now: int) -> bool:
        """Enqueue `req` if its queue has room, else signal backpressure."""
        if req.kind is ReqKind.READ:
            if self.read_count >= self.ctrl.queue_capacity:
                return False
        elif self.write_count >= self.ctrl.queue_capacity:
            return False
        mapped = self.mapper.map(req.address)
        req.row = mapped.row
        req.column = mapped.column
        req.bank = self.mapper.flat_bank(mapped)
        req.arrival_cycle = now
        req.id = self.next_id
        self.next_id += 1
        self.live_ids.add(req.id)
        if req.kind is ReqKind.READ:
            older = self.pending_write_addrs.get(req.address, -1)
            if older >= 0:
                req.blocked_by = older
            self.pending_read_addrs[req.address] = req.id
            self.read_queues[req.bank].push(req)
            self.read_count += 1
        else:
            older = self.pending_read_addrs.get(req.address, -1)
            if older >= 0:
                req.blocked_by = older
            self.pending_write_addrs[req.address] = req.id
            self.write_queues[req.bank].push(req)
            self.write_count += 1
        return True

    def retire(self, req: Request):
        """Release the queue slot once the request's data has transferred."""
        self.live_ids.discard(req.id)
        if req.kind is ReqKind.READ:
            self.read_count -= 1
            if self.pending_read_addrs.get(req.address) == req.id:
                del self.pending_read_addrs[req.address]
        else:
            self.write_count -= 1
            if self.pending_write_addrs.get(req.address) == req.id:
                del self.pending_write_addrs[req.address]

    # -- refresh -----------------------------------------------------------

    def refresh_tick(self, now: int):
        """Accrue per-bank refresh debt up to `now`.  Debt at or above the
        postpone limit forces the bank to refresh before new data traffic."""
        limit = self.ctrl.refresh_postpone_limit
        for bank in range(self.config.banks):
            while now >= self.next_accrual[bank]:
                self.refresh_debt[bank] += 1
                self.next_accrual[bank] += self.refresh_period
            if self.refresh_debt[bank] >= limit:
                self.refresh_forced[bank] = True

    def next_refresh_accrual(self) -> int:
        return min(self.next_accrual)

    def _bank_idle(self, bank: int) -> bool:
        return (self.read_queues[bank].head() is None
                and self.write_queues[bank].head() is None
                and self.inflight[bank] is None)

    # -- scheduling --------------------------------------------------------

    def _update_drain_mode(self):
        if self.drain_mode is DrainMode.SERVING_READS:
            if (self.write_count >= self.ctrl.write_high_watermark
                    or (self.read_count == 0 and self.write_count > 0)):
                self.drain_mode = DrainMode.DRAINING_WRITES
        else:
            if (self.write_count <= self.ctrl.write_low_watermark
                    and self.read_count > 0) or self.write_count == 0:
                self.drain_mode = DrainMode.SERVING_READS

    def select(self, now: int):
        """FR-FCFS choice at cycle `now`.

        Returns (command, next_time): `command` is legal to issue now or
        None; `next_time` is the earliest future cycle at which a new
        decision is possible (FAR_FUTURE when nothing is pending).
        """
        self._update_drain_mode()
        device = self.device
        open_page = self.policy is PagePolicy.OPEN
        queues = (self.read_queues
                  if self.drain_mode is DrainMode.SERVING_READS
                  else self.write_queues)

        best_col = best_col_req = None
        best_col_id = FAR_FUTURE
        best_row = best_row_req = None
        best_row_id = FAR_FUTURE
        next_time = FAR_FUTURE
        live = self.live_ids

        for bank in range(self.config.banks):
            # An activated request always finishes, even during a drain-mode
            # switch or a pending forced refresh; its auto-precharge is what
            # releases the bank.
            req = self.inflight[bank]
            if req is not None:
                when = device.earliest_column(bank, req.kind is ReqKind.READ)
                if when <= now:
                    if req.id < best_col_id:
                        best_col_id = req.id
                        best_col = self._column_command(req, auto_pre=True)
                        best_col_req = req
                elif when < next_time:
                    next_time = when
                continue

            if self.refresh_forced[bank] or (
                    self.refresh_debt[bank] and self._bank_idle(bank)):
                cmd, when = self._refresh_candidate(bank)
                if when <= now:
                    self._target = None
                    return cmd, now
                if when < next_time:
                    next_time = when
                continue

            bq = queues[bank]
            head = bq.head()
            if head is None:
                continue
            state = device.banks[bank]

            if open_page and state.active:
                hit = bq.oldest_for_row(state.open_row)
                if hit is not None and hit.blocked_by not in live:
                    when = device.earliest_column(bank, hit.kind is ReqKind.READ)
                    if when <= now:
                        if hit.id < best_col_id:
                            best_col_id = hit.id
                            best_col = self._column_command(hit, auto_pre=False)
                            best_col_req = hit
                    elif when < next_time:
                        next_time = when
                    continue
                if hit is not None:
                    continue  # ordering hold, wait for the older request
                # row conflict: close the row for the oldest pending request
                when = device.earliest_pre(bank)
                if when <= now:
                    if head.id < best_row_id:
                        best_row_id = head.id
                        best_row = Command(CommandKind.PRE, bank)
                        best_row_req = None
                elif when < next_time:
                    next_time = when
                continue

            if head.blocked_by in live:
                continue
            when = device.earliest_act(bank)
            if when <= now:
                if head.id < best_row_id:
                    best_row_id = head.id
                    best_row = Command(CommandKind.ACT, bank, row=head.row)
                    best_row_req = head
            elif when < next_time:
                next_time = when

        if best_col is not None:
            self._target = best_col_req
            return best_col, now
        if best_row is not None:
            self._target = best_row_req
            return best_row, now
        self._target = None
        return None, next_time

    def _refresh_candidate(self, bank: int):
        device = self.device
        if device.banks[bank].active:
            # only reachable under the open-page policy: close the row first
            return Command(CommandKind.PRE, bank), device.earliest_pre(bank)
        return Command(CommandKind.REFPB, bank), device.earliest_refresh(bank)

    def _column_command(self, req: Request, auto_pre: bool) -> Command:
        if req.kind is ReqKind.READ:
            kind = CommandKind.RDA if auto_pre else CommandKind.RD
        else:
            kind = CommandKind.WRA if auto_pre else CommandKind.WR
        return Command(kind, req.bank, row=req.row, column=req.column)

    def note_issued(self, cmd: Command):
        """Mirror an issued command into queue and refresh bookkeeping.

        Returns the request a column command serves, else None.
        """
        kind = cmd.kind
        if kind is CommandKind.REFPB:
            self.refresh_debt[cmd.bank] -= 1
            if self.refresh_debt[cmd.bank] < self.ctrl.refresh_postpone_limit:
                self.refresh_forced[cmd.bank] = False
            return None
        if kind is CommandKind.PRE:
            return None
        req = self._target
        self._target = None
        if kind is CommandKind.ACT:
            if req is not None:
                # the request paid for its own activation: a row miss
                req.activated = True
                if self.policy is PagePolicy.CLOSED:
                    self.inflight[cmd.bank] = req
            return None
        # column command
        if req is None:  # pragma: no cover - select always pairs a request
            raise RuntimeError("column command without a matching request")
        queue = (self.read_queues if req.kind is ReqKind.READ
                 else self.write_queues)[req.bank]
        queue.mark_done(req)
        if self.inflight[cmd.bank] is req:
            self.inflight[cmd.bank] = None
        return req


def fr_fcfs_select(controller: Controller, device: DeviceModel, now: int):
    """First-ready FCFS: the issuable column command with the lowest request
    id wins, else the issuable row command with the lowest id, else None."""
    cmd, _ = controller.select(now)
    return cmd


def apply_page_policy(request: Request, policy: PagePolicy,
                      open_row: int | None) -> list[CommandKind]:
    """Command template a request expands to under the given policy."""
    read = request.kind is ReqKind.READ
    if policy is PagePolicy.CLOSED:
        return [CommandKind.ACT, CommandKind.RDA if read else CommandKind.WRA]
    col = CommandKind.RD if read else CommandKind.WR
    if open_row == request.row:
        return [col]
    if open_row is None:
        return [CommandKind.ACT, col]
    return [CommandKind.PRE, CommandKind.ACT, col]
