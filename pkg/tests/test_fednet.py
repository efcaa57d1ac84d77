import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedglm.errors import CodecError, PeerTimeout, ShapeError
from fedglm.fednet import (
    FactorMessage,
    InprocHub,
    Node,
    NodeConfig,
    decode_message,
    encode_message,
    free_ports,
    glm_task,
    lm_task,
    message_size,
    run_inproc,
    run_sockets,
)
from fedglm.fednet.codec import HEADER
from fedglm.glm import Family, fit_glm
from fedglm.linalg import TriangularFactor, thin_r
from fedglm.lm import fit_lm


def split(x, y, k):
    cuts = np.linspace(0, len(y), k + 1).astype(int)
    return [(x[a:b], y[a:b]) for a, b in zip(cuts[:-1], cuts[1:])]


def lm_data(seed=0, n=200, p=3):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    return x, x @ np.full(p, 3.0) + rng.standard_normal(n)


def logit_data(seed=0, n=300):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    prob = 1 / (1 + np.exp(-(x @ np.array([0.5, 1.0, -1.0]))))
    return x, (rng.random(n) < prob).astype(float)


def eq24(bd, bc):
    return np.all(np.abs(bd - bc) <= 1e-8 + 1e-5 * np.abs(bc))


# codec

def random_factor(rng, p):
    return thin_r(rng.standard_normal((p + 3, p + 1)))


def test_message_size_p2():
    assert message_size(2) == 26 + 6 * 8 == 74


def test_encode_layout():
    f = TriangularFactor.from_full(np.array([[2.0, 1.0], [0.0, 3.0]]))
    raw = encode_message(FactorMessage(node_id=5, round=7, n_local=11, factor=f))
    assert raw[:4] == b"FGLM"
    assert HEADER.unpack_from(raw) == (b"FGLM", 1, 1, 7, 5, 11, 1)
    assert struct.unpack("<3d", raw[26:]) == (2.0, 1.0, 3.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(0, 2**32 - 1),
       st.integers(0, 2**32 - 1), st.integers(0, 2**63))
def test_codec_round_trip(seed, p, node, rnd, n):
    f = random_factor(np.random.default_rng(seed), p)
    m = FactorMessage(node, rnd, n, f)
    raw = encode_message(m)
    assert len(raw) == message_size(p)
    back = decode_message(raw)
    assert (back.node_id, back.round, back.n_local, back.p) == (node, rnd, n, p)
    assert back.factor.packed.tobytes() == f.packed.tobytes()


def test_truncated_payload_reports_offset():
    raw = encode_message(FactorMessage(0, 0, 4, random_factor(np.random.default_rng(1), 2)))
    with pytest.raises(CodecError) as info:
        decode_message(raw[:-1])
    assert info.value.offset == len(raw) - 1


def test_truncated_header():
    with pytest.raises(CodecError) as info:
        decode_message(b"FGLM\x01")
    assert info.value.offset == 5


def test_bad_magic_version_and_type():
    raw = bytearray(encode_message(FactorMessage(0, 0, 4, TriangularFactor.zeros(1))))
    for pos, value, offset in ((0, ord("X"), 0), (4, 9, 4), (5, 2, 5)):
        bad = bytearray(raw)
        bad[pos] = value
        with pytest.raises(CodecError) as info:
            decode_message(bytes(bad))
        assert info.value.offset == offset


def test_trailing_bytes_rejected():
    raw = encode_message(FactorMessage(0, 0, 4, TriangularFactor.zeros(1)))
    with pytest.raises(CodecError):
        decode_message(raw + b"\0")


def test_negative_diagonal_in_payload_rejected():
    raw = bytearray(encode_message(FactorMessage(0, 0, 4, TriangularFactor.zeros(1))))
    raw[26:34] = struct.pack("<d", -1.0)
    with pytest.raises(CodecError):
        decode_message(bytes(raw))


# protocol, in process

def test_single_node_equals_centralized():
    x, y = lm_data(1)
    (res,), _ = run_inproc([(x, y)], lm_task)
    c = fit_lm(x, y)
    assert res.beta.tobytes() == c.beta.tobytes() and res.rss == c.rss


def test_five_node_lm_matches_centralized():
    x, y = lm_data(2)
    results, _ = run_inproc(split(x, y, 5), lm_task)
    c = fit_lm(x, y)
    for r in results:
        assert eq24(r.beta, c.beta)
        np.testing.assert_allclose(r.std_errors, c.std_errors, rtol=1e-10)
        assert r.n == len(y)


def test_five_node_glm_matches_centralized():
    x, y = logit_data(3)
    fam = Family("binomial")
    results, _ = run_inproc(split(x, y, 5), glm_task(fam))
    c = fit_glm(x, y, fam)
    for r in results:
        assert eq24(r.beta, c.beta)
        assert r.iterations == c.iterations


def test_nodes_agree_bytewise():
    x, y = logit_data(4)
    results, nodes = run_inproc(split(x, y, 4), glm_task(Family("binomial")))
    first = nodes[0].merged
    for node in nodes[1:]:
        assert len(node.merged) == len(first)
        assert all(a == b for a, b in zip(node.merged, first))
    assert all(r.beta.tobytes() == results[0].beta.tobytes() for r in results)


def test_zero_factors_merge_to_zero():
    zero = TriangularFactor.zeros(2)

    def task(node, x, y):
        return node.exchange(zero, 0, 0)

    out, _ = run_inproc([(None, None)] * 3, task)
    for merged, n in out:
        assert merged == zero and n == 0


def test_message_accounting():
    x, y = logit_data(5)
    k = 4
    results, nodes = run_inproc(split(x, y, k), glm_task(Family("binomial")), capture=True)
    rounds = results[0].iterations + 1
    for node in nodes:
        t = node.transport
        assert t.messages_sent == (k - 1) * rounds
        assert t.bytes_sent == t.messages_sent * message_size(3)
        assert len(t.wire) == t.bytes_sent


def test_partition_invariance():
    x, y = lm_data(6, n=120)
    ref = fit_lm(x, y).beta
    for cuts in ([40, 80], [5, 115], [60]):
        parts = [(x[a:b], y[a:b]) for a, b in zip([0] + cuts, cuts + [120])]
        results, _ = run_inproc(parts, lm_task)
        assert eq24(results[0].beta, ref)


def test_node_with_fewer_rows_than_columns():
    x, y = lm_data(7, n=60, p=4)
    parts = [(x[:2], y[:2]), (x[2:], y[2:])]
    results, _ = run_inproc(parts, lm_task)
    assert eq24(results[0].beta, fit_lm(x, y).beta)


def test_missing_peer_times_out():
    hub = InprocHub([0, 1])
    node = Node(NodeConfig(0, (0, 1), timeout=0.2), hub.transport(0))
    with pytest.raises(PeerTimeout) as info:
        node.exchange(TriangularFactor.zeros(1), 3, 4)
    assert info.value.node == 1 and info.value.round == 4


def test_column_count_mismatch():
    x, y = lm_data(8, n=40)
    parts = [(x[:20], y[:20]), (x[20:, :2], y[20:])]
    with pytest.raises(ShapeError):
        run_inproc(parts, lm_task, timeout=2.0)


# protocol, over TCP

def socket_addresses(k):
    return {i: ("127.0.0.1", port) for i, port in enumerate(free_ports(k))}


def test_socket_lm_run():
    x, y = lm_data(9, n=150)
    results, nodes = run_sockets(split(x, y, 3), lm_task, socket_addresses(3), timeout=10)
    c = fit_lm(x, y)
    for r in results:
        assert eq24(r.beta, c.beta)
    assert all(n.transport.messages_sent == 2 for n in nodes)


def test_socket_glm_run_matches_inproc():
    x, y = logit_data(10)
    task = glm_task(Family("binomial"))
    over_tcp, _ = run_sockets(split(x, y, 3), task, socket_addresses(3), timeout=10)
    local, _ = run_inproc(split(x, y, 3), task)
    assert over_tcp[0].beta.tobytes() == local[0].beta.tobytes()


def test_raw_values_never_on_the_wire():
    x, y = lm_data(11, n=90)
    _, nodes = run_sockets(split(x, y, 3), lm_task, socket_addresses(3), timeout=10,
                           capture=True)
    # the intercept column is all ones and not private
    private = np.concatenate([x[:, 1:].ravel(), y])
    for node in nodes:
        wire = bytes(node.transport.wire)
        assert wire
        for v in private:
            assert struct.pack("<d", v) not in wire
