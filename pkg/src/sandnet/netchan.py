"""Deterministic emulation of the controller-to-plant communication channel.

Messages pushed through a :class:`Channel` experience a configurable mean
delay, uniform jitter, independent per-message loss and a fluid-model
serialization delay (payload_size / bandwidth). Everything is driven by a
seeded random stream, so identical conditions and send sequences reproduce
identical delivery schedules bit for bit.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Any

import numpy as np

__all__ = [
    "NetworkConditions",
    "TimedMessage",
    "Channel",
    "channel_create",
    "channel_send",
    "channel_poll",
]


@dataclass(frozen=True)
class NetworkConditions:
    """Channel QoS parameters: delay/jitter in ms, loss probability, bandwidth in kbps."""

    delay_mean_ms: float = 0.0
    jitter_ms: float = 0.0
    loss_rate: float = 0.0
    bandwidth_kbps: float = 1000.0
    seed: int = 0

    def validate(self) -> None:
        if not np.isfinite(self.delay_mean_ms) or self.delay_mean_ms < 0:
            raise ValueError(f"delay_mean_ms must be >= 0, got {self.delay_mean_ms}")
        if not np.isfinite(self.jitter_ms) or self.jitter_ms < 0:
            raise ValueError(f"jitter_ms must be >= 0, got {self.jitter_ms}")
        if self.delay_mean_ms - self.jitter_ms < 0:
            raise ValueError(
                "jitter_ms must not exceed delay_mean_ms (effective delay never negative)"
            )
        if not 0.0 <= self.loss_rate <= 1.0:
            raise ValueError(f"loss_rate must be in [0,1], got {self.loss_rate}")
        if not self.bandwidth_kbps > 0:
            raise ValueError(f"bandwidth_kbps must be > 0, got {self.bandwidth_kbps}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self) -> dict:
        return {
            "delay_ms": self.delay_mean_ms,
            "jitter_ms": self.jitter_ms,
            "loss_rate": self.loss_rate,
            "bandwidth_kbps": self.bandwidth_kbps,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConditions":
        cond = cls(
            delay_mean_ms=float(d.get("delay_ms", 0.0)),
            jitter_ms=float(d.get("jitter_ms", 0.0)),
            loss_rate=float(d.get("loss_rate", 0.0)),
            bandwidth_kbps=float(d.get("bandwidth_kbps", 1000.0)),
            seed=int(d.get("seed", 0)),
        )
        cond.validate()
        return cond


@dataclass
class TimedMessage:
    """One command in flight: send time in seconds, payload size in bytes."""

    send_time: float
    payload_size: int = 0
    payload: Any = None


class Channel:
    """Single-owner lossy delay line between a sender and the plant.

    Per message, the seeded stream is consumed in a fixed order: one uniform
    draw for the loss decision, then (only for surviving messages) one
    uniform draw on [-jitter, +jitter]. Surviving delivery times are clipped
    to be non-decreasing so commands never reorder.
    """

    def __init__(self, cond: NetworkConditions):
        cond.validate()
        self.cond = cond
        self.rng = np.random.default_rng(int(cond.seed))
        self._in_flight: list[tuple[float, int, TimedMessage]] = []
        self._seq = 0
        self._last_send = -np.inf
        self._last_delivery = 0.0
        self._last_poll = -np.inf
        self.sent_count = 0
        self.dropped_count = 0

    def send(self, msg: TimedMessage) -> None:
        if msg.send_time < self._last_send:
            raise ValueError(
                f"out-of-order send_time {msg.send_time} < {self._last_send}"
            )
        self._last_send = msg.send_time
        self.sent_count += 1

        if self.rng.random() < self.cond.loss_rate:
            self.dropped_count += 1
            return

        jitter = 0.0
        if self.cond.jitter_ms > 0:
            jitter = self.rng.uniform(-self.cond.jitter_ms, self.cond.jitter_ms)
        else:
            # consume the draw anyway so the stream layout is jitter-independent
            self.rng.uniform(0.0, 1.0)

        transit = max(0.0, (self.cond.delay_mean_ms + jitter) / 1000.0)
        serialization = msg.payload_size * 8.0 / (self.cond.bandwidth_kbps * 1000.0)
        delivery = msg.send_time + transit + serialization
        # FIFO: a fast message behind a slow one waits for it
        delivery = max(delivery, self._last_delivery)
        self._last_delivery = delivery

        heapq.heappush(self._in_flight, (delivery, self._seq, msg))
        self._seq += 1

    def poll(self, now: float) -> list[TimedMessage]:
        if now < self._last_poll:
            raise ValueError(f"poll time went backwards: {now} < {self._last_poll}")
        self._last_poll = now
        out = []
        while self._in_flight and self._in_flight[0][0] <= now:
            out.append(heapq.heappop(self._in_flight)[2])
        return out

    @property
    def in_flight(self) -> int:
        return len(self._in_flight)


def channel_create(cond: NetworkConditions) -> Channel:
    """Validate conditions and return a fresh channel with a seeded stream."""
    return Channel(cond)


def channel_send(ch: Channel, msg: TimedMessage) -> None:
    ch.send(msg)


def channel_poll(ch: Channel, now: float) -> list[TimedMessage]:
    """Return (and remove) every message whose delivery time is <= now, in order."""
    return ch.poll(now)
