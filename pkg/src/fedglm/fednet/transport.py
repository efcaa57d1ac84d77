"""Point-to-point transports carrying encoded factor messages.

Both transports give reliable FIFO delivery per ordered pair of nodes and
no retries: a peer that does not answer within the deadline is fatal.
"""
import logging
import queue
import socket
import threading
import time
from typing import Dict, Iterable, Optional, Tuple

from ..errors import PeerTimeout, ProtocolError
from .codec import FRAME

log = logging.getLogger(__name__)

Address = Tuple[str, int]


class Transport:
    """Common bookkeeping: message/byte counters and optional wire capture."""

    def __init__(self, node_id: int, capture: bool = False):
        self.node_id = node_id
        self.messages_sent = 0
        self.bytes_sent = 0
        self.round = 0
        self.wire = bytearray() if capture else None

    def _record(self, raw: bytes, payload_len: int):
        self.messages_sent += 1
        self.bytes_sent += payload_len
        if self.wire is not None:
            self.wire += raw

    def send(self, peer: int, payload: bytes) -> None:
        raise NotImplementedError

    def recv(self, peer: int, timeout: float) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InprocHub:
    """Per-pair FIFO queues for a federation living in one process."""

    def __init__(self, node_ids: Iterable[int], capture: bool = False):
        self.node_ids = sorted(node_ids)
        self._queues = {
            (a, b): queue.Queue() for a in self.node_ids for b in self.node_ids if a != b
        }
        self.capture = capture
        self.transports = {}

    def transport(self, node_id: int) -> "InprocTransport":
        t = InprocTransport(node_id, self, self.capture)
        self.transports[node_id] = t
        return t


class InprocTransport(Transport):
    def __init__(self, node_id, hub: InprocHub, capture=False):
        super().__init__(node_id, capture)
        self._hub = hub

    def send(self, peer, payload):
        self._hub._queues[(self.node_id, peer)].put(bytes(payload))
        self._record(payload, len(payload))

    def recv(self, peer, timeout):
        try:
            return self._hub._queues[(peer, self.node_id)].get(timeout=timeout)
        except queue.Empty:
            raise PeerTimeout(peer, self.round) from None


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("connection closed by peer")
        buf += chunk
    return bytes(buf)


class SocketTransport(Transport):
    """One TCP connection per peer pair, messages framed by a u32 length.

    The node with the larger id dials the smaller one and introduces itself
    with a framed 4-byte node id.
    """

    def __init__(self, node_id: int, addresses: Dict[int, Address],
                 timeout: float = 30.0, capture: bool = False):
        super().__init__(node_id, capture)
        self.addresses = dict(addresses)
        self.timeout = timeout
        self._socks: Dict[int, socket.socket] = {}
        self._listener: Optional[socket.socket] = None

    @property
    def peers(self):
        return sorted(k for k in self.addresses if k != self.node_id)

    def connect(self) -> "SocketTransport":
        deadline = time.monotonic() + self.timeout
        lower = [k for k in self.peers if k < self.node_id]
        higher = [k for k in self.peers if k > self.node_id]
        errors = []
        acceptor = None
        if higher:
            host, port = self.addresses[self.node_id]
            self._listener = socket.create_server((host, port), backlog=len(higher))
            acceptor = threading.Thread(
                target=self._accept_all, args=(set(higher), deadline, errors), daemon=True
            )
            acceptor.start()
        for peer in lower:
            self._socks[peer] = self._dial(peer, deadline)
        if acceptor is not None:
            acceptor.join()
            if errors:
                raise errors[0]
        for s in self._socks.values():
            s.settimeout(self.timeout)
        log.debug("node %d connected to %s", self.node_id, sorted(self._socks))
        return self

    def _dial(self, peer, deadline):
        while True:
            try:
                s = socket.create_connection(self.addresses[peer], timeout=1.0)
                s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                hello = self.node_id.to_bytes(4, "little")
                raw = FRAME.pack(len(hello)) + hello
                s.sendall(raw)
                if self.wire is not None:
                    self.wire += raw
                return s
            except OSError:
                if time.monotonic() > deadline:
                    raise PeerTimeout(peer, 0) from None
                time.sleep(0.05)

    def _accept_all(self, expected, deadline, errors):
        try:
            while expected:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise PeerTimeout(min(expected), 0)
                self._listener.settimeout(remaining)
                try:
                    conn, _ = self._listener.accept()
                except socket.timeout:
                    raise PeerTimeout(min(expected), 0) from None
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                conn.settimeout(max(deadline - time.monotonic(), 0.1))
                (length,) = FRAME.unpack(_recv_exact(conn, FRAME.size))
                peer = int.from_bytes(_recv_exact(conn, length), "little")
                if peer not in expected:
                    conn.close()
                    raise ProtocolError(f"unexpected hello from node {peer}")
                expected.discard(peer)
                self._socks[peer] = conn
        except Exception as e:  # surfaced to connect()
            errors.append(e)

    def send(self, peer, payload):
        raw = FRAME.pack(len(payload)) + payload
        self._socks[peer].sendall(raw)
        self._record(raw, len(payload))

    def recv(self, peer, timeout):
        s = self._socks[peer]
        s.settimeout(timeout)
        try:
            (length,) = FRAME.unpack(_recv_exact(s, FRAME.size))
            return _recv_exact(s, length)
        except socket.timeout:
            raise PeerTimeout(peer, self.round) from None
        except ConnectionError as e:
            raise ProtocolError(f"lost connection to node {peer}: {e}") from None

    def close(self):
        for s in self._socks.values():
            try:
                s.close()
            except OSError:
                pass
        self._socks.clear()
        if self._listener is not None:
            self._listener.close()
            self._listener = None


def free_ports(k: int, host: str = "127.0.0.1"):
    """Ask the OS for ``k`` currently unused TCP ports."""
    socks = [socket.create_server((host, 0)) for _ in range(k)]
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports
