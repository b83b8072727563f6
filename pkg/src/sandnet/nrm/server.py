"""Network-operator endpoint: a threaded line-protocol TCP server.

Each connection is one session. The server grants or denies direct QoS
requests against its policy caps, adapts grants from simple eMOS feedback,
and recomputes the translation from detailed feedback (KPIs plus the
operator's utility function) against its calibration table. Malformed
input of any kind gets an error reply and changes nothing.
"""

from __future__ import annotations

import socketserver
import threading

from ..utility import UtilitySpec
from .translate import (
    CalibrationTable,
    InfeasibleTarget,
    PolicyCaps,
    SessionState,
    adapt_simple,
    translate_g_nw,
)
from .wire import (
    IE_QOS_REQUIREMENTS,
    QoSManagementRequest,
    QoSRequirements,
    WireError,
    decode_message,
    encode_message,
)

__all__ = ["NrmServer", "serve"]


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: "NrmServer" = self.server  # type: ignore[assignment]
        session = server.new_session()
        while True:
            line = self.rfile.readline()
            if not line:
                break
            try:
                reply = server.dispatch(session, line)
            except Exception as exc:  # session survives anything
                server.error_count += 1
                reply = {"type": "error", "reason": f"{type(exc).__name__}: {exc}"}
            self.wfile.write(encode_message(reply))
            self.wfile.flush()


class NrmServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        address: tuple[str, int],
        caps: PolicyCaps | None = None,
        table: CalibrationTable | None = None,
        defaults: QoSRequirements | None = None,
    ):
        super().__init__(address, _Handler)
        self.caps = caps or PolicyCaps()
        self.table = table
        self.defaults = defaults or QoSRequirements()
        self.error_count = 0
        self._session_counter = 0
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None

    # ------------------------------------------------------------------
    def new_session(self) -> SessionState:
        with self._lock:
            self._session_counter += 1
            return SessionState(session_id=f"s{self._session_counter}")

    def dispatch(self, session: SessionState, line: bytes) -> dict:
        try:
            msg = decode_message(line)
        except WireError as exc:
            self.error_count += 1
            return {"type": "error", "reason": str(exc)}
        try:
            return self._handle(session, msg)
        except WireError as exc:
            self.error_count += 1
            return {"type": "error", "reason": str(exc)}

    def _handle(self, session: SessionState, msg: dict) -> dict:
        mtype = msg["type"]
        if mtype == "qos_request":
            request = QoSManagementRequest.from_wire(msg)
            reason = self.caps.check(request.requirements)
            if reason is not None:
                return {"type": "qos_deny", "session": session.session_id, "reason": reason}
            granted = self.caps.clamp(request.requirements)
            session.mode = session.mode or "direct"
            session.granted = granted
            session.history.append(("request", granted.to_wire()))
            return self._grant(session, granted)

        if mtype == "simple_feedback":
            if session.granted is None:
                raise WireError("simple_feedback before any grant on this session")
            try:
                emos_value = float(msg["emos"])
                target = float(msg.get("target_emos", 4.0))
            except (KeyError, TypeError, ValueError) as exc:
                raise WireError(f"bad simple_feedback fields: {exc}") from exc
            if not 1.0 <= emos_value <= 5.0:
                raise WireError(f"emos {emos_value} outside [1,5]")
            session.mode = "simple"
            granted = adapt_simple(session, emos_value, target, self.caps)
            session.history.append(("simple", emos_value))
            return self._grant(session, granted)

        if mtype == "detailed_feedback":
            if self.table is None:
                raise WireError("server has no calibration table for detailed feedback")
            try:
                spec = UtilitySpec.from_dict(msg["utility"])
            except (KeyError, TypeError, ValueError) as exc:
                raise WireError(f"bad detailed_feedback utility: {exc}") from exc
            if "kpis" not in msg or not isinstance(msg["kpis"], dict):
                raise WireError("detailed_feedback needs a kpis record")
            session.mode = "detailed"
            session.history.append(("detailed", msg["kpis"]))
            try:
                granted = translate_g_nw(spec, self.table, self.defaults)
            except InfeasibleTarget as exc:
                return {
                    "type": "qos_deny",
                    "session": session.session_id,
                    "reason": str(exc),
                }
            granted = self.caps.clamp(granted)
            session.granted = granted
            return self._grant(session, granted)

        if mtype == "customer_feedback":
            # reserved: scoring the network through the customer is unrealistic
            raise WireError("customer_feedback is reserved and not implemented")

        raise WireError(f"client may not send {mtype!r}")

    def _grant(self, session: SessionState, granted: QoSRequirements) -> dict:
        return {
            "type": "qos_grant",
            "session": session.session_id,
            IE_QOS_REQUIREMENTS: granted.to_wire(),
        }

    # ------------------------------------------------------------------
    def start_background(self) -> None:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]


def serve(
    caps: PolicyCaps,
    address: tuple[str, int],
    table: CalibrationTable | None = None,
    defaults: QoSRequirements | None = None,
    background: bool = True,
) -> NrmServer:
    """Bind and start the operator server; port 0 picks a free port."""
    server = NrmServer(address, caps=caps, table=table, defaults=defaults)
    if background:
        server.start_background()
    return server
