"""Seeded in-memory message bus for the validator network.

Delivery order is a deterministic function of the seed: each send draws a
latency from the bus RNG and lands in a heap keyed by (arrival time, send
sequence). The full log of sends is kept so that equivocation can be
audited after the fact.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Iterator, Optional


@dataclass(frozen=True)
class Delivery:
    """One message in flight or delivered."""

    sender: str
    recipient: str
    payload: object
    sent_at: float
    arrives_at: float
    seq: int


class MessageBus:
    def __init__(self, seed: int = 0, min_latency: float = 0.01,
                 max_latency: float = 0.1):
        if min_latency <= 0 or max_latency < min_latency:
            raise ValueError("latency window must be positive and ordered")
        self._rng = random.Random(seed)
        self._min = min_latency
        self._max = max_latency
        self._queue: list[tuple[float, int, Delivery]] = []
        self._seq = 0
        self._clock = 0.0
        self._log: list[Delivery] = []
        self._silenced: set[str] = set()

    @property
    def clock(self) -> float:
        return self._clock

    @property
    def sent_count(self) -> int:
        return len(self._log)

    def silence(self, node: str) -> None:
        """Drop all future sends from this node (crash-style fault)."""
        self._silenced.add(node)

    def send(self, sender: str, recipient: str, payload: object) -> Optional[Delivery]:
        if sender in self._silenced:
            return None
        latency = self._rng.uniform(self._min, self._max)
        delivery = Delivery(sender=sender, recipient=recipient, payload=payload,
                            sent_at=self._clock, arrives_at=self._clock + latency,
                            seq=self._seq)
        self._seq += 1
        self._log.append(delivery)
        heapq.heappush(self._queue, (delivery.arrives_at, delivery.seq, delivery))
        return delivery

    def broadcast(self, sender: str, recipients, payload: object) -> int:
        sent = 0
        for recipient in recipients:
            if recipient == sender:
                continue
            if self.send(sender, recipient, payload) is not None:
                sent += 1
        return sent

    def pending(self) -> int:
        return len(self._queue)

    def pop(self) -> Optional[Delivery]:
        if not self._queue:
            return None
        arrives_at, _, delivery = heapq.heappop(self._queue)
        self._clock = arrives_at
        return delivery

    def drain(self) -> Iterator[Delivery]:
        while self._queue:
            yield self.pop()

    def log(self) -> list[Delivery]:
        return list(self._log)
