"""Simulated communication fabric: per-pair channels with latency, seeded
message loss, and partitions. Loss is silent; reliability lives one layer up.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field


class UnknownChannel(Exception):
    pass


@dataclass
class Channel:
    sender: str
    recipient: str
    latency_ticks: int = 0
    drop_probability: float = 0.0
    partitioned: bool = False
    rng: random.Random = field(default_factory=random.Random)
    in_flight: list = field(default_factory=list)  # (deliver_tick, seq, message)
    _seq: int = 0

    def send(self, message, now: int) -> bool:
        """Enqueue a message; returns False when it was dropped."""
        if self.partitioned:
            return False
        if self.drop_probability > 0 and self.rng.random() < self.drop_probability:
            return False
        self._seq += 1
        self.in_flight.append((now + self.latency_ticks, self._seq, message))
        return True

    def deliver_due(self, now: int) -> list:
        """Remove and return messages with deliver_tick <= now, in send order."""
        due = [item for item in self.in_flight if item[0] <= now]
        if not due:
            return []
        self.in_flight = [item for item in self.in_flight if item[0] > now]
        due.sort(key=lambda item: (item[0], item[1]))
        return [item[2] for item in due]


class Network:
    """All channels between registered endpoints.

    A channel exists per ordered endpoint pair and carries an independent
    seeded generator, so adding channels never perturbs existing traffic.
    Partitions apply to the unordered pair (radio shadowing cuts both ways).
    """

    def __init__(self, seed: int = 0, latency_ticks: int = 0, drop_probability: float = 0.0):
        self.seed = seed
        self.default_latency = latency_ticks
        self.default_drop = drop_probability
        self.channels: dict[tuple[str, str], Channel] = {}
        self.endpoints: set[str] = set()

    def register(self, endpoint: str):
        self.endpoints.add(endpoint)

    def channel(self, sender: str, recipient: str) -> Channel:
        key = (sender, recipient)
        ch = self.channels.get(key)
        if ch is None:
            digest = hashlib.sha256(f"{self.seed}:{sender}->{recipient}".encode()).digest()
            ch = Channel(
                sender,
                recipient,
                latency_ticks=self.default_latency,
                drop_probability=self.default_drop,
                rng=random.Random(int.from_bytes(digest[:8], "big")),
            )
            self.channels[key] = ch
        return ch

    def send(self, sender: str, recipient: str, message, now: int) -> bool:
        return self.channel(sender, recipient).send(message, now)

    def deliver_due(self, now: int) -> list[tuple[str, object]]:
        """Deliveries across all channels as (recipient, message) pairs.

        Channels are visited in creation order to keep runs reproducible.
        """
        out = []
        for ch in self.channels.values():
            for msg in ch.deliver_due(now):
                out.append((ch.recipient, msg))
        return out

    def set_partition(self, endpoint_a: str, endpoint_b: str, flag: bool):
        touched = False
        for key in ((endpoint_a, endpoint_b), (endpoint_b, endpoint_a)):
            if key in self.channels:
                self.channels[key].partitioned = flag
                touched = True
        if not touched:
            known = endpoint_a in self.endpoints and endpoint_b in self.endpoints
            if not known:
                raise UnknownChannel(f"no channel between {endpoint_a} and {endpoint_b}")
            # endpoints exist but never talked: create both directions so the
            # partition applies to future sends
            self.channel(endpoint_a, endpoint_b).partitioned = flag
            self.channel(endpoint_b, endpoint_a).partitioned = flag

    def configure(self, latency_ticks: int | None = None, drop_probability: float | None = None):
        if latency_ticks is not None:
            self.default_latency = latency_ticks
            for ch in self.channels.values():
                ch.latency_ticks = latency_ticks
        if drop_probability is not None:
            self.default_drop = drop_probability
            for ch in self.channels.values():
                ch.drop_probability = drop_probability
