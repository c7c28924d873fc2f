import numpy as np
import pytest
from hypothesis import given, strategies as st

from robustcfx.apds import DELTA_INIT, apds
from robustcfx.enumeration import decide_robust, enumerate_shifts, provable_delta
from robustcfx.intervals import Verdict
from robustcfx.network import dense_network
from robustcfx.sampling import ShiftSpec, stream_rng
from robustcfx.zoo import (ENUMERATION_CFX, TWO_RELU_QUERY, enumeration_network, linear_network,
                           two_relu_network)

from strategies import inputs_for, networks


def test_partition_and_counts():
    rep = enumerate_shifts(enumeration_network(), ENUMERATION_CFX, 0.115, max_depth=10)
    total = rep.robust_fraction + rep.nonrobust_fraction + rep.unknown_fraction
    assert total == pytest.approx(1.0, abs=1e-12)
    assert rep.depth_reached == 10 and rep.budget_exhausted
    assert set(rep.leaves) == {"robust", "non-robust", "unknown"}


def test_tiny_delta_robust_at_root():
    rep = enumerate_shifts(enumeration_network(), ENUMERATION_CFX, 1e-6)
    assert rep.robust_fraction == 1.0 and rep.depth_reached == 0 and not rep.budget_exhausted


@pytest.mark.parametrize("depth", range(4, 21))
def test_linear_volume_converges(depth):
    rep = enumerate_shifts(linear_network(), [1.0], 0.6, max_depth=depth)
    assert abs(rep.nonrobust_fraction - 1 / 12) <= 2.0 ** -depth
    assert abs(rep.robust_fraction - 11 / 12) <= 2.0 ** -depth


def test_rejects_non_positive_delta():
    with pytest.raises(ValueError):
        enumerate_shifts(linear_network(), [1.0], 0.0)


def test_widest_interval_split_first_lowest_index_on_ties():
    net = dense_network([[[1.0, 1.0]]])
    rep = enumerate_shifts(net, [1.0, -0.5], 0.5, max_depth=1, keep_branches=True)
    boxes = sorted((tuple(b.lo), tuple(b.hi)) for b in rep.branches)
    # first parameter halved, the other kept whole
    assert boxes[0][0][0] == 0.5 and boxes[0][1][0] == 1.0
    assert all(lo[1] == 0.5 and hi[1] == 1.5 for lo, hi in boxes)


def test_leaf_budget():
    rep = enumerate_shifts(enumeration_network(), ENUMERATION_CFX, 0.115, max_leaves=50)
    assert rep.budget_exhausted
    assert rep.robust_fraction + rep.nonrobust_fraction + rep.unknown_fraction == \
        pytest.approx(1.0, abs=1e-12)


@given(networks(max_in=2, max_hidden=3, max_layers=1), st.floats(0.05, 0.5), st.data())
def test_leaves_are_sound(net, delta, data):
    x = data.draw(inputs_for(net))
    rep = enumerate_shifts(net, x, delta, max_depth=8, max_leaves=2000, keep_branches=True)
    assert rep.robust_fraction + rep.nonrobust_fraction + rep.unknown_fraction == \
        pytest.approx(1.0, abs=1e-12)
    rng = stream_rng(0)
    for b in rep.branches[:40]:
        if b.verdict is Verdict.UNKNOWN:
            continue
        thetas = rng.uniform(b.lo, b.hi, size=(100, b.lo.size))
        ys = net.forward_params(thetas, x)
        if b.verdict is Verdict.ROBUST:
            assert np.all(ys >= 0.5 - 1e-9)
        else:
            assert np.all(ys < 0.5 + 1e-9)


def test_decide_robust_cases():
    net = enumeration_network()
    assert decide_robust(net, ENUMERATION_CFX, 1e-6) is Verdict.ROBUST
    assert decide_robust(linear_network(), [1.0], 0.6) is Verdict.NON_ROBUST
    # witness: w = 0.45 lies in the box and gives 0.45 < 0.5
    assert linear_network(0.45).forward([1.0]) < 0.5
    # h feeds two paths that cancel; propagation treats the copies independently,
    # so a robust box (worst case 0.6 - 4d(1+d)) needs splits to be proven
    dep = dense_network([[[1.0]], [[1.0], [1.0]], [[1.0, -1.0]]], [[0.0], [0.0, 0.0], [0.6]])
    mask = ~dep.bias_mask()
    assert decide_robust(dep, [1.0], 0.02, max_depth=1, mask=mask, n_probe=0) is Verdict.UNKNOWN
    assert decide_robust(dep, [1.0], 0.02, max_depth=24, mask=mask) is Verdict.ROBUST
    assert decide_robust(two_relu_network(), TWO_RELU_QUERY, 0.01) is Verdict.NON_ROBUST


def test_provable_delta_linear():
    d = provable_delta(linear_network(), [1.0])
    assert 0.5 - 2 * DELTA_INIT <= d <= 0.5


def test_provable_delta_invalid_cfx():
    assert provable_delta(two_relu_network(), TWO_RELU_QUERY) == 0.0


def test_provable_below_sampled_on_fig5():
    net = enumeration_network()
    p = provable_delta(net, ENUMERATION_CFX)
    assert 0 < p <= apds(net, ENUMERATION_CFX).delta_max
    # the bound really is provable: no sampled realization at p fails
    shift = ShiftSpec.for_network(net, p)
    thetas = stream_rng(1).uniform(*shift.box(net.flatten()), size=(20_000, net.n_params))
    assert np.all(net.forward_params(thetas, ENUMERATION_CFX) >= 0.5)
