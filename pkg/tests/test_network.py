import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdiff.network import (Network, NetworkPair, NNetFormatError, QuantizationOverflow,
                             compose_difference, eval_concrete, parse_nnet, quantize_round,
                             random_network, truncate_f16, write_nnet)

TINY_NNET = """// two inputs, one hidden layer of two, one output
2,2,1,2,
2,2,1,
0,
-1.0,-1.0,
1.0,1.0,
0.0,0.0,0.0,
1.0,1.0,1.0,
1.0,2.0,
3.0,4.0,
0.5,
-0.5,
1.0,-1.0,
0.25,
"""


def test_parse_transposes_rows_into_incoming_columns():
    net = parse_nnet(TINY_NNET)
    assert net.layer_sizes == [2, 2, 1]
    # row j of the file lists the weights into neuron j
    np.testing.assert_array_equal(net.weights[0], [[1.0, 3.0], [2.0, 4.0]])
    np.testing.assert_array_equal(net.biases[0], [0.5, -0.5])
    x = np.array([1.0, 1.0])
    assert eval_concrete(net, x)[0] == pytest.approx(max(3.5, 0) - max(6.5, 0) + 0.25)


def test_parse_accepts_bytes_streams_and_paths(tmp_path):
    path = tmp_path / "n.nnet"
    path.write_text(TINY_NNET)
    a = parse_nnet(TINY_NNET.encode())
    b = parse_nnet(io.StringIO(TINY_NNET))
    c = parse_nnet(path)
    for other in (b, c):
        for w1, w2 in zip(a.weights, other.weights):
            np.testing.assert_array_equal(w1, w2)


@pytest.mark.parametrize("mutate,line", [
    (lambda t: t.replace("1.0,2.0,\n", "1.0,\n"), 9),
    (lambda t: t.replace("3.0,4.0,", "3.0,four,"), 10),
    (lambda t: t + "9.0,\n", 15),
    (lambda t: t.replace("2,2,1,\n", "2,2,2,\n"), 3),
])
def test_parse_errors_name_the_line(mutate, line):
    with pytest.raises(NNetFormatError) as info:
        parse_nnet(mutate(TINY_NNET))
    assert info.value.line == line


def test_truncated_file_is_reported():
    with pytest.raises(NNetFormatError, match="end of file"):
        parse_nnet("\n".join(TINY_NNET.splitlines()[:-3]))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=5), st.integers(0, 2 ** 32 - 1))
def test_write_parse_round_trip_is_exact(sizes, seed):
    net = random_network(sizes, np.random.default_rng(seed))
    back = parse_nnet(write_nnet(net, comment="round trip"))
    for a, b in zip(net.weights + net.biases, back.weights + back.biases):
        np.testing.assert_array_equal(a, b)


def test_network_validation():
    with pytest.raises(ValueError, match="layer 2"):
        Network((np.ones((2, 3)), np.ones((2, 1))), (np.zeros(3), np.zeros(1)))
    with pytest.raises(ValueError, match="non-finite"):
        Network((np.array([[np.inf]]),), (np.zeros(1),))
    net = Network((np.ones((1, 1)),), (np.zeros(1),))
    with pytest.raises(ValueError):
        net.weights[0][0, 0] = 2.0


def test_eval_batch_matches_single_and_hidden_values():
    rng = np.random.default_rng(1)
    net = random_network([3, 4, 2], rng)
    xs = rng.normal(size=(5, 3))
    batch = eval_concrete(net, xs)
    for x, y in zip(xs, batch):
        np.testing.assert_allclose(eval_concrete(net, x), y)
    out, hidden = eval_concrete(net, xs[0], return_hidden=True)
    assert len(hidden) == 1
    np.testing.assert_allclose(out, np.maximum(hidden[0], 0) @ net.weights[1] + net.biases[1])


def test_f16_truncation_is_idempotent_and_close():
    net = random_network([5, 20, 20, 3], np.random.default_rng(2))
    t = truncate_f16(net)
    t2 = truncate_f16(t)
    for a, b, w in zip(t.weights, t2.weights, net.weights):
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(a, w, rtol=2 ** -10)
        assert np.array_equal(a.astype(np.float16).astype(np.float64), a)


def test_f16_overflow_names_the_parameter():
    w = np.zeros((2, 2))
    w[1, 0] = 1e6
    net = Network((w,), (np.zeros(2),))
    with pytest.raises(QuantizationOverflow, match=r"layer 1 weight \(1, 0\)"):
        truncate_f16(net)


def test_quantize_round_half_away_from_zero():
    net = Network((np.array([[1.9, 2.5, -2.5, 0.49]]),), (np.array([1.05, -0.15, 0.0, 0.0]),))
    q = quantize_round(net, 0)
    np.testing.assert_array_equal(q.weights[0], [[2.0, 3.0, -3.0, 0.0]])
    q1 = quantize_round(net, 1)
    np.testing.assert_array_equal(q1.weights[0], [[1.9, 2.5, -2.5, 0.5]])


def test_pair_rejects_shape_mismatch():
    rng = np.random.default_rng(3)
    with pytest.raises(ValueError, match="layer sizes"):
        NetworkPair(random_network([2, 3, 1], rng), random_network([2, 4, 1], rng))


def test_pair_weight_delta_is_exact():
    a = Network((np.array([[0.1]]),), (np.zeros(1),))
    b = Network((np.array([[0.3]]),), (np.zeros(1),))
    lo, hi = NetworkPair(a, b).weight_delta_bounds(0)
    from fractions import Fraction
    exact = Fraction(0.3) - Fraction(0.1)
    assert Fraction(lo[0, 0]) <= exact <= Fraction(hi[0, 0])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=5), st.integers(0, 2 ** 32 - 1))
def test_composed_network_computes_the_difference(sizes, seed):
    rng = np.random.default_rng(seed)
    f = random_network(sizes, rng)
    pair = NetworkPair(f, truncate_f16(f))
    g = compose_difference(pair)
    xs = rng.normal(size=(20, sizes[0]))
    np.testing.assert_allclose(eval_concrete(g, xs), pair.output_delta(xs), atol=1e-12)
