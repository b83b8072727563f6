"""Line-delimited JSON wire format for the resource-management protocol.

One JSON object per line over a byte stream. The standardized information
elements of an end-to-end QoS management request travel under their
standard names, verbatim: "list of VAL UEs", "IP address" and
"end-to-end QoS requirements". See protocol.md for the byte-exact format.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass

__all__ = [
    "IE_VAL_UES",
    "IE_IP_ADDRESS",
    "IE_QOS_REQUIREMENTS",
    "MESSAGE_TYPES",
    "WireError",
    "QoSRequirements",
    "QoSManagementRequest",
    "encode_message",
    "decode_message",
]

IE_VAL_UES = "list of VAL UEs"
IE_IP_ADDRESS = "IP address"
IE_QOS_REQUIREMENTS = "end-to-end QoS requirements"

MESSAGE_TYPES = (
    "qos_request",
    "qos_grant",
    "qos_deny",
    "simple_feedback",
    "detailed_feedback",
    "customer_feedback",  # reserved, deliberately unimplemented
    "error",
)


class WireError(ValueError):
    """Malformed or unsupported protocol message."""


@dataclass
class QoSRequirements:
    latency_budget_ms: float = 100.0
    jitter_budget_ms: float = 0.0
    loss_budget: float = 0.0
    bandwidth_kbps: float = 1000.0

    def validate(self) -> None:
        for name in ("latency_budget_ms", "jitter_budget_ms", "loss_budget", "bandwidth_kbps"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or v < 0:
                raise WireError(f"{name} must be a number >= 0, got {v!r}")

    def to_wire(self) -> dict:
        return {
            "latency_budget_ms": self.latency_budget_ms,
            "jitter_budget_ms": self.jitter_budget_ms,
            "loss_budget": self.loss_budget,
            "bandwidth_kbps": self.bandwidth_kbps,
        }

    @classmethod
    def from_wire(cls, d) -> "QoSRequirements":
        if not isinstance(d, dict):
            raise WireError(f"{IE_QOS_REQUIREMENTS} must be an object")
        unknown = set(d) - {"latency_budget_ms", "jitter_budget_ms", "loss_budget", "bandwidth_kbps"}
        if unknown:
            raise WireError(f"unknown QoS requirement fields: {sorted(unknown)}")
        try:
            req = cls(
                latency_budget_ms=float(d.get("latency_budget_ms", 100.0)),
                jitter_budget_ms=float(d.get("jitter_budget_ms", 0.0)),
                loss_budget=float(d.get("loss_budget", 0.0)),
                bandwidth_kbps=float(d.get("bandwidth_kbps", 1000.0)),
            )
        except (TypeError, ValueError) as exc:
            raise WireError(f"bad QoS requirement value: {exc}") from exc
        req.validate()
        return req


@dataclass
class QoSManagementRequest:
    val_ue_list: list[str]
    ip_address: str
    requirements: QoSRequirements

    def validate(self) -> None:
        if not self.val_ue_list:
            raise WireError(f"{IE_VAL_UES} must be non-empty")
        if not all(isinstance(u, str) and u for u in self.val_ue_list):
            raise WireError("VAL UE identifiers must be non-empty strings")
        try:
            ipaddress.ip_address(self.ip_address)
        except ValueError as exc:
            raise WireError(f"unparseable {IE_IP_ADDRESS}: {self.ip_address!r}") from exc
        self.requirements.validate()

    def to_wire(self) -> dict:
        return {
            "type": "qos_request",
            IE_VAL_UES: list(self.val_ue_list),
            IE_IP_ADDRESS: self.ip_address,
            IE_QOS_REQUIREMENTS: self.requirements.to_wire(),
        }

    @classmethod
    def from_wire(cls, msg: dict) -> "QoSManagementRequest":
        missing = {IE_VAL_UES, IE_IP_ADDRESS, IE_QOS_REQUIREMENTS} - set(msg)
        if missing:
            raise WireError(f"missing information elements: {sorted(missing)}")
        ues = msg[IE_VAL_UES]
        if not isinstance(ues, list):
            raise WireError(f"{IE_VAL_UES} must be a list")
        req = cls(
            val_ue_list=[str(u) for u in ues],
            ip_address=str(msg[IE_IP_ADDRESS]),
            requirements=QoSRequirements.from_wire(msg[IE_QOS_REQUIREMENTS]),
        )
        req.validate()
        return req


def encode_message(msg: dict) -> bytes:
    """One protocol message as a single JSON line."""
    return (json.dumps(msg, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def decode_message(line: bytes | str) -> dict:
    """Parse one line; raises WireError on anything malformed."""
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WireError(f"not UTF-8: {exc}") from exc
    line = line.strip()
    if not line:
        raise WireError("empty line")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WireError(f"not JSON: {exc}") from exc
    if not isinstance(msg, dict):
        raise WireError("message must be a JSON object")
    mtype = msg.get("type")
    if mtype not in MESSAGE_TYPES:
        raise WireError(f"unknown message type {mtype!r}")
    return msg
