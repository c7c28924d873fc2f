import numpy as np
import pytest
from hypothesis import given, strategies as st

from robustcfx.intervals import (Interval, IntervalNetwork, Verdict, abstract, classify_bounds,
                                 propagate, propagate_boxes, verdict)
from robustcfx.network import dense_network
from robustcfx.sampling import ShiftSpec, sample_realizations, stream_rng
from robustcfx.zoo import ENUMERATION_CFX, enumeration_network

from strategies import inputs_for, networks

reals = st.floats(-50, 50, allow_nan=False, width=64)


@st.composite
def intervals(draw):
    a, b = draw(reals), draw(reals)
    return Interval(min(a, b), max(a, b))


def test_four_product_multiplication():
    assert (Interval(-1, 2) * Interval(-3, 4)) == Interval(-6, 8)
    assert (Interval(1, 2) * -1) == Interval(-2, -1)
    assert (Interval(0, 0) * Interval(-5, 5)) == Interval(0, 0)


def test_activations_and_split():
    assert Interval(-1, 2).relu() == Interval(0, 2)
    assert Interval(-3, -1).relu() == Interval(0, 0)
    s = Interval(-1, 1).sigmoid()
    assert s.lo == pytest.approx(1 / (1 + np.e)) and s.hi == pytest.approx(1 / (1 + np.e ** -1))
    assert Interval(0, 1).split() == (Interval(0, 0.5), Interval(0.5, 1))


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        Interval(1, 0)


@given(intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_arithmetic_contains_members(a, b, s, t):
    x, y = a.lo + s * a.width, b.lo + t * b.width
    x, y = min(max(x, a.lo), a.hi), min(max(y, b.lo), b.hi)
    assert x + y in (a + b) or np.isclose(x + y, (a + b).lo) or np.isclose(x + y, (a + b).hi)
    prod = a * b
    assert prod.lo - 1e-9 <= x * y <= prod.hi + 1e-9
    assert max(x, 0) in a.relu()


@given(intervals(), intervals())
def test_monotone_in_inclusion(a, b):
    # shrinking an operand never widens the result
    inner = Interval(a.lo + 0.25 * a.width, a.hi - 0.25 * a.width)
    assert (inner * b) in (a * b)
    assert (inner + b) in (a + b)
    assert inner.relu() in a.relu()


def test_fig5_abstraction_labels():
    inn = abstract(enumeration_network(), ShiftSpec.for_network(enumeration_network(), 0.115))
    printed = [(-0.48, -0.25), (-0.99, -0.76), (-1.14, -0.91), (0.69, 0.93)]
    k = [0, 1, 4, 5]  # weight positions; biases sit at 2, 3 and 6
    for i, (lo, hi) in zip(k, printed):
        assert inn.lo[i] == pytest.approx(lo, abs=6e-3)
        assert inn.hi[i] == pytest.approx(hi, abs=6e-3)
        assert inn.hi[i] - inn.lo[i] == pytest.approx(0.23, abs=1e-12)


def test_fig5_propagation_hand_values():
    net = enumeration_network()
    lo = np.array([-0.48, -0.99, 0.0, 0.0, -1.14, 0.69, 0.0])
    hi = np.array([-0.25, -0.76, 0.0, 0.0, -0.91, 0.93, 0.0])
    out = propagate(IntervalNetwork(net, lo, hi), ENUMERATION_CFX)
    x = -2.57
    h1 = (-0.25 * x, -0.48 * x)  # positive after relu since x < 0
    h2 = (-0.76 * x, -0.99 * x)
    expected_lo = -1.14 * h1[1] + 0.69 * h2[0]
    expected_hi = -0.91 * h1[0] + 0.93 * h2[1]
    assert out.lo == pytest.approx(expected_lo, abs=1e-9)
    assert out.hi == pytest.approx(expected_hi, abs=1e-9)
    assert (round(out.lo, 4), round(out.hi, 4)) == (-0.0586, 1.7815)
    assert verdict(IntervalNetwork(net, lo, hi), ENUMERATION_CFX) is Verdict.UNKNOWN


def test_verdict_cases():
    assert classify_bounds(0.5, 0.9) is Verdict.ROBUST
    assert classify_bounds(0.1, 0.49) is Verdict.NON_ROBUST
    assert classify_bounds(0.4, 0.6) is Verdict.UNKNOWN
    net = dense_network([[[1.0]]])
    inn = abstract(net, ShiftSpec.for_network(net, 0.1))
    assert verdict(inn, [1.0]) is Verdict.ROBUST
    assert verdict(inn, [0.3]) is Verdict.NON_ROBUST
    assert verdict(abstract(net, ShiftSpec.for_network(net, 0.6)), [1.0]) is Verdict.UNKNOWN


def test_zero_width_box_is_point_evaluation():
    net = enumeration_network()
    out = propagate(abstract(net, ShiftSpec.for_network(net, 0.0)), ENUMERATION_CFX)
    assert out.lo == out.hi == pytest.approx(net.forward(ENUMERATION_CFX), abs=1e-12)


@given(networks(output="sigmoid"), st.floats(0.0, 0.5), st.integers(0, 2**32 - 1), st.data())
def test_soundness_against_realizations(net, delta, seed, data):
    x = data.draw(inputs_for(net))
    shift = ShiftSpec.for_network(net, delta)
    out = propagate(abstract(net, shift), x)
    thetas = sample_realizations(net.flatten(), shift, 1000, stream_rng(seed))
    ys = net.forward_params(thetas, x)
    tol = 1e-9 * (1 + abs(out.lo) + abs(out.hi))
    assert np.all(ys >= out.lo - tol) and np.all(ys <= out.hi + tol)
    # the corners of the box are realizations too
    for theta in (shift.box(net.flatten())):
        y = net.forward_params(theta[None], x)[0]
        assert out.lo - tol <= y <= out.hi + tol


@given(networks(), st.floats(0.0, 0.3), st.floats(0.0, 0.3), st.data())
def test_bounds_grow_with_delta(net, d1, d2, data):
    x = data.draw(inputs_for(net))
    small, big = sorted((d1, d2))
    a = propagate(abstract(net, ShiftSpec.for_network(net, small)), x)
    b = propagate(abstract(net, ShiftSpec.for_network(net, big)), x)
    tol = 1e-9 * (1 + abs(b.lo) + abs(b.hi))
    assert b.lo <= a.lo + tol and a.hi <= b.hi + tol


@given(networks(), st.floats(0.01, 0.3), st.integers(0, 100), st.data())
def test_verdicts_consistent_with_samples(net, delta, seed, data):
    x = data.draw(inputs_for(net))
    shift = ShiftSpec.for_network(net, delta)
    v = verdict(abstract(net, shift), x)
    ys = net.forward_params(sample_realizations(net.flatten(), shift, 500, stream_rng(seed)), x)
    if v is Verdict.ROBUST:
        assert np.all(ys >= 0.5 - 1e-9)
    elif v is Verdict.NON_ROBUST:
        assert np.all(ys < 0.5 + 1e-9)


def test_batched_equals_single():
    net = enumeration_network()
    rng = np.random.default_rng(0)
    theta = net.flatten()
    lo = theta - rng.uniform(0, 0.2, size=(7, theta.size))
    hi = theta + rng.uniform(0, 0.2, size=(7, theta.size))
    blo, bhi = propagate_boxes(net, lo, hi, ENUMERATION_CFX)
    for i in range(7):
        out = propagate(IntervalNetwork(net, lo[i], hi[i]), ENUMERATION_CFX)
        assert (out.lo, out.hi) == (blo[i], bhi[i])
