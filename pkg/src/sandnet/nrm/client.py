"""Synchronous robot-operator client for the NRM line protocol."""

from __future__ import annotations

import socket

from ..kpi import RobotKpis
from ..utility import UtilitySpec
from .wire import (
    QoSManagementRequest,
    QoSRequirements,
    WireError,
    decode_message,
    encode_message,
)

__all__ = ["NrmClient"]


class NrmClient:
    """One session: request, feed back, receive grants. Not thread-safe."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._file = self._sock.makefile("rb")

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "NrmClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # ------------------------------------------------------------------
    def exchange(self, msg: dict) -> dict:
        self._sock.sendall(encode_message(msg))
        line = self._file.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        return decode_message(line)

    def send_raw(self, data: bytes) -> dict:
        """Ship arbitrary bytes (must contain one newline); used for fuzzing."""
        self._sock.sendall(data)
        line = self._file.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        return decode_message(line)

    # ------------------------------------------------------------------
    def request_qos(
        self,
        requirements: QoSRequirements,
        val_ues: list[str] | None = None,
        ip_address: str = "10.0.0.1",
    ) -> dict:
        req = QoSManagementRequest(
            val_ue_list=val_ues or ["ue-sanding-arm-1"],
            ip_address=ip_address,
            requirements=requirements,
        )
        req.validate()
        return self.exchange(req.to_wire())

    def simple_feedback(self, emos_value: float, target: float) -> dict:
        return self.exchange(
            {"type": "simple_feedback", "emos": emos_value, "target_emos": target}
        )

    def detailed_feedback(self, kpis: RobotKpis, spec: UtilitySpec) -> dict:
        return self.exchange(
            {"type": "detailed_feedback", "kpis": kpis.to_dict(), "utility": spec.to_dict()}
        )


def granted_requirements(reply: dict) -> QoSRequirements:
    """Pull the granted QoS out of a qos_grant reply."""
    from .wire import IE_QOS_REQUIREMENTS

    if reply.get("type") != "qos_grant":
        raise WireError(f"expected qos_grant, got {reply.get('type')!r}: {reply}")
    return QoSRequirements.from_wire(reply[IE_QOS_REQUIREMENTS])
