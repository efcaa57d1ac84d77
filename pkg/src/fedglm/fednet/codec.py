"""Binary encoding of factor messages.

Layout (little-endian)::

    magic "FGLM" | version u8 | msg_type u8 | round u32 | node_id u32
    | n_local u64 | p u32 | (p+1)(p+2)/2 float64 packed upper triangle

Socket streams prefix each message with a u32 byte length.
"""
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import CodecError
from ..linalg import TriangularFactor

MAGIC = b"FGLM"
VERSION = 1
MSG_FACTOR = 1
HEADER = struct.Struct("<4sBBIIQI")
FRAME = struct.Struct("<I")
MAX_P = 1 << 16


@dataclass(frozen=True)
class FactorMessage:
    node_id: int
    round: int
    n_local: int
    factor: TriangularFactor

    @property
    def p(self) -> int:
        return self.factor.p

    def __post_init__(self):
        if self.n_local < 0:
            raise ValueError("n_local must be nonnegative")


def packed_length(p: int) -> int:
    return (p + 1) * (p + 2) // 2


def message_size(p: int) -> int:
    return HEADER.size + 8 * packed_length(p)


def encode_message(m: FactorMessage) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, MSG_FACTOR, m.round, m.node_id, m.n_local, m.p)
    return header + m.factor.packed.astype("<f8").tobytes()


def decode_message(data: bytes) -> FactorMessage:
    data = bytes(data)
    if len(data) < HEADER.size:
        if not MAGIC.startswith(data[:4]):
            raise CodecError(0, "bad magic")
        raise CodecError(len(data), "truncated header")
    magic, version, msg_type, rnd, node_id, n_local, p = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CodecError(0, f"bad magic {magic!r}")
    if version != VERSION:
        raise CodecError(4, f"unsupported version {version}")
    if msg_type != MSG_FACTOR:
        raise CodecError(5, f"unknown message type {msg_type}")
    if p > MAX_P:
        raise CodecError(22, f"implausible p={p}")
    end = HEADER.size + 8 * packed_length(p)
    if len(data) < end:
        raise CodecError(len(data), f"truncated payload, expected {end} bytes")
    if len(data) > end:
        raise CodecError(end, f"{len(data) - end} trailing bytes")
    packed = np.frombuffer(data, dtype="<f8", offset=HEADER.size).astype(np.float64)
    try:
        factor = TriangularFactor(p, packed)
    except ValueError as e:
        raise CodecError(HEADER.size, f"invalid factor payload: {e}") from None
    return FactorMessage(node_id, rnd, n_local, factor)


def frame(payload: bytes) -> bytes:
    return FRAME.pack(len(payload)) + payload
