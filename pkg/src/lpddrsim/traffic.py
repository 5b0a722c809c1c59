"""Synthetic traffic: sequential or uniformly random burst-aligned
addresses at a configurable read ratio, injected until backpressure.

Generation is deterministic for a given seed; the PRNG is the stdlib
Mersenne Twister and its name is recorded in every report.
"""

from __future__ import annotations

import random

from .config import DeviceConfig, TrafficConfig, TrafficPattern
from .controller import Controller, ReqKind, Request

PRNG_NAME = "mersenne-twister"


class BudgetExhausted(RuntimeError):
    pass


class TrafficGenerator:
    """Produces the request stream for one run."""

    def __init__(self, device: DeviceConfig, traffic: TrafficConfig,
                 unbounded: bool = False):
        traffic.check()
        self.traffic = traffic
        self.burst_bytes = device.burst_bytes
        self.slots = device.capacity_bytes // self.burst_bytes
        self.rng = random.Random(traffic.seed)
        self.sequential = traffic.pattern is TrafficPattern.SEQUENTIAL
        self.alternate = traffic.mix == "alternate"
        self.unbounded = unbounded
        self.remaining = traffic.request_budget
        self.next_address = 0
        self.index = 0

    def next_request(self) -> Request:
        if not self.unbounded and self.remaining <= 0:
            raise BudgetExhausted("request budget exhausted")
        self.remaining -= 1
        if self.sequential:
            address = self.next_address
            self.next_address = (address + self.burst_bytes) % (
                self.slots * self.burst_bytes)
        else:
            address = self.rng.randrange(self.slots) * self.burst_bytes
        if self.alternate:
            # deterministic R/W interleaving at the requested ratio
            ratio = self.traffic.read_ratio
            reads_due = int((self.index + 1) * ratio) - int(self.index * ratio)
            kind = ReqKind.READ if reads_due else ReqKind.WRITE
        else:
            kind = (ReqKind.READ if self.rng.random() < self.traffic.read_ratio
                    else ReqKind.WRITE)
        self.index += 1
        return Request(kind=kind, address=address)


class Injector:
    """Saturating source: pushes requests until the controller signals
    backpressure; a refused request is retried, never dropped."""

    def __init__(self, generator: TrafficGenerator):
        self.generator = generator
        self.pending = None
        self.injected = 0

    def exhausted(self) -> bool:
        gen = self.generator
        return (self.pending is None and not gen.unbounded
                and gen.remaining <= 0)

    def inject(self, controller: Controller, now: int) -> int:
        count = 0
        while True:
            if self.pending is None:
                gen = self.generator
                if not gen.unbounded and gen.remaining <= 0:
                    break
                self.pending = gen.next_request()
            if not controller.admit(self.pending, now):
                break
            self.pending = None
            self.injected += 1
            count += 1
        return count


def inject(generator: TrafficGenerator, controller: Controller,
           now: int) -> int:
    """One-shot injection helper; returns how many requests were admitted."""
    return Injector(generator).inject(controller, now)
