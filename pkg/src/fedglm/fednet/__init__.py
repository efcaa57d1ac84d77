"""Federation of nodes exchanging triangular factors."""
from .codec import FactorMessage, decode_message, encode_message, message_size
from .protocol import (
    Node,
    NodeConfig,
    glm_task,
    lm_task,
    run_glm_protocol,
    run_inproc,
    run_lm_protocol,
    run_sockets,
)
from .transport import InprocHub, SocketTransport, free_ports

__all__ = [
    "FactorMessage", "decode_message", "encode_message", "message_size",
    "Node", "NodeConfig", "glm_task", "lm_task", "run_glm_protocol",
    "run_inproc", "run_lm_protocol", "run_sockets",
    "InprocHub", "SocketTransport", "free_ports",
]
