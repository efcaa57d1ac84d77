"""All-to-all factor exchange and the LM/GLM protocols built on it."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, ProtocolError, ShapeError
from ..glm import DEFAULT_MAXIT, DEFAULT_TOL, Family, fit_glm_local_loop
from ..linalg import TriangularFactor, merge_factors, thin_r_any
from ..lm import FitResult, fit_from_factor
from .codec import FactorMessage, decode_message, encode_message
from .transport import Address, InprocHub, SocketTransport, Transport

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True)
class NodeConfig:
    node_id: int
    peers: Tuple[int, ...]
    transport: str = "inproc"
    timeout: float = DEFAULT_TIMEOUT
    addresses: Dict[int, Address] = field(default_factory=dict)

    def __post_init__(self):
        peers = tuple(sorted(self.peers))
        if self.node_id in peers:
            peers = tuple(k for k in peers if k != self.node_id)
        if len(set(peers)) != len(peers):
            raise ConfigError(f"duplicate peer ids in {self.peers}")
        if self.transport not in ("inproc", "socket"):
            raise ConfigError(f"unknown transport {self.transport!r}")
        if self.transport == "socket":
            missing = [k for k in (self.node_id, *peers) if k not in self.addresses]
            if missing:
                raise ConfigError(f"no address for nodes {missing}")
        object.__setattr__(self, "peers", peers)

    @property
    def n_nodes(self) -> int:
        return len(self.peers) + 1


class Node:
    """One federation member: sends its factor to every peer each round and
    merges what it receives in node-id order."""

    def __init__(self, cfg: NodeConfig, transport: Transport):
        self.cfg = cfg
        self.transport = transport
        self.merged: List[TriangularFactor] = []

    @property
    def node_id(self) -> int:
        return self.cfg.node_id

    def exchange_round(self, local: FactorMessage) -> Tuple[TriangularFactor, int]:
        self.transport.round = local.round
        payload = encode_message(local)
        for peer in self.cfg.peers:
            self.transport.send(peer, payload)
        received = {self.node_id: local}
        for peer in self.cfg.peers:
            m = decode_message(self.transport.recv(peer, self.cfg.timeout))
            if m.node_id != peer:
                raise ProtocolError(f"node {peer} sent a message labelled {m.node_id}")
            if m.round != local.round:
                raise ProtocolError(
                    f"node {peer} is in round {m.round}, node {self.node_id} in {local.round}"
                )
            if m.p != local.p:
                raise ShapeError(f"node {peer} has p={m.p}, node {self.node_id} has p={local.p}")
            received[peer] = m
        order = sorted(received)
        merged = merge_factors([received[k].factor for k in order])
        n_total = sum(received[k].n_local for k in order)
        self.merged.append(merged)
        return merged, n_total

    def exchange(self, factor: TriangularFactor, n_local: int, round: int):
        return self.exchange_round(FactorMessage(self.node_id, round, n_local, factor))


def _augmented(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeError(f"x has shape {x.shape} but y has {y.shape[0]} rows")
    return np.hstack([x, y])


def run_lm_protocol(node: Node, x_local, y_local) -> FitResult:
    a = _augmented(x_local, y_local)
    p = a.shape[1] - 1
    local = thin_r_any(a, p)
    merged, n_total = node.exchange(local, a.shape[0], 0)
    return fit_from_factor(merged, n_total)


def run_glm_protocol(node: Node, x_local, y_local, fam: Family,
                     maxit: int = DEFAULT_MAXIT, tol: float = DEFAULT_TOL,
                     on_round=None) -> FitResult:
    return fit_glm_local_loop(x_local, y_local, fam, maxit, tol, node.exchange, on_round)


Task = Callable[[Node, np.ndarray, np.ndarray], object]


def run_inproc(partitions: Sequence[Tuple[np.ndarray, np.ndarray]], task: Task,
               timeout: float = DEFAULT_TIMEOUT, capture: bool = False):
    """Run ``task`` on one thread per partition over an in-process hub.

    Returns ``(results, nodes)`` in node-id order; the first node error is
    re-raised.
    """
    ids = list(range(len(partitions)))
    hub = InprocHub(ids, capture=capture)
    nodes = [Node(NodeConfig(i, tuple(ids), "inproc", timeout), hub.transport(i)) for i in ids]
    if len(nodes) == 1:
        return [task(nodes[0], *partitions[0])], nodes
    with ThreadPoolExecutor(max_workers=len(nodes)) as pool:
        futures = [pool.submit(task, node, x, y) for node, (x, y) in zip(nodes, partitions)]
        results = [f.result() for f in futures]
    return results, nodes


def connect_socket_node(cfg: NodeConfig, capture: bool = False) -> Node:
    transport = SocketTransport(cfg.node_id, cfg.addresses, cfg.timeout, capture).connect()
    return Node(cfg, transport)


def run_sockets(partitions, task: Task, addresses: Dict[int, Address],
                timeout: float = DEFAULT_TIMEOUT, capture: bool = False):
    """Like :func:`run_inproc` but every node talks TCP to the others."""
    ids = sorted(addresses)
    if len(ids) != len(partitions):
        raise ConfigError(f"{len(partitions)} partitions for {len(ids)} addresses")

    def one(i):
        cfg = NodeConfig(i, tuple(ids), "socket", timeout, addresses)
        node = connect_socket_node(cfg, capture)
        try:
            return task(node, *partitions[i]), node
        finally:
            node.transport.close()

    with ThreadPoolExecutor(max_workers=len(ids)) as pool:
        out = [f.result() for f in [pool.submit(one, i) for i in ids]]
    return [r for r, _ in out], [n for _, n in out]


def lm_task(node, x, y):
    return run_lm_protocol(node, x, y)


def glm_task(fam: Family, maxit: int = DEFAULT_MAXIT, tol: float = DEFAULT_TOL) -> Task:
    def task(node, x, y):
        return run_glm_protocol(node, x, y, fam, maxit, tol)
    return task
