"""Network resource management: operator server, client, and the QoS translation."""

from .wire import (
    QoSRequirements,
    QoSManagementRequest,
    encode_message,
    decode_message,
    WireError,
)
from .translate import (
    CalibrationTable,
    PolicyCaps,
    SessionState,
    InfeasibleTarget,
    translate_g_nw,
    adapt_simple,
)
from .server import NrmServer, serve
from .client import NrmClient

__all__ = [
    "QoSRequirements",
    "QoSManagementRequest",
    "encode_message",
    "decode_message",
    "WireError",
    "CalibrationTable",
    "PolicyCaps",
    "SessionState",
    "InfeasibleTarget",
    "translate_g_nw",
    "adapt_simple",
    "NrmServer",
    "serve",
    "NrmClient",
]
