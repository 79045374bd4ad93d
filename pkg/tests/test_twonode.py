import itertools
import math

import numpy as np
import pytest

from conftest import CHANNELS, two_node_grid
from eharvest.model import ChannelDistribution, TwoNodeSpec
from eharvest.oracle import optimal_actions, value_iteration_single, value_iteration_two
from eharvest.single import solve_binary
from eharvest.twonode import (Action, TwoNodeGammaTable, decide_decoupled, decide_decoupled_n, decide_two_node,
                              solve_two_node)


def test_last_slot_better_channel_wins():
    spec = TwoNodeSpec(1, 2, 1.0, 1.0, ChannelDistribution.point(2.0), ChannelDistribution.point(1.0))
    t = solve_two_node(spec)
    assert t.gamma(1, 0, 0) == pytest.approx(math.log(3), abs=1e-12)
    assert value_iteration_two(spec)[0, 0, 0] == pytest.approx(math.log(3), abs=1e-12)
    assert decide_two_node(t, 1, 1, 1, 2.0, 1.0) is Action.TX1
    assert decide_two_node(t, 1, 2, 1, 1.0, 2.0) is Action.TX2


def test_no_arrivals_all_zero():
    ch = CHANNELS[1]
    t = solve_two_node(TwoNodeSpec(4, 2, 0.0, 0.0, ch, ch))
    assert not t.values[:, 0, 0].any()


def test_empty_batteries_idle():
    ch = CHANNELS[1]
    t = solve_two_node(TwoNodeSpec(3, 2, 0.5, 0.5, ch, ch))
    for k in (1, 2, 3):
        assert decide_two_node(t, k, 0, 0, 5.0, 5.0) is Action.IDLE


@pytest.mark.parametrize("spec", [s for s in two_node_grid() if s.p1 == s.p2 and s.channel1 == s.channel2], ids=str)
def test_symmetric_table(spec):
    v = solve_two_node(spec).values
    assert np.max(np.abs(v - v.transpose(0, 2, 1))) <= 1e-12


@pytest.mark.parametrize("spec", list(two_node_grid()), ids=str)
def test_table_invariants_and_oracle(spec):
    v = solve_two_node(spec).values
    assert np.all(v[-1] == 0) and np.all(v >= 0)
    assert np.all(np.diff(v, axis=1) >= -1e-12) and np.all(np.diff(v, axis=2) >= -1e-12)
    assert np.max(np.abs(v - value_iteration_two(spec))) <= 1e-12


@pytest.mark.parametrize("spec", [TwoNodeSpec(2, 2, 0.5, 0.5, CHANNELS[2], CHANNELS[2]),
                                  TwoNodeSpec(3, 2, 0.3, 0.8, CHANNELS[1], CHANNELS[2])], ids=str)
def test_decisions_are_oracle_optimal_and_feasible(spec):
    t = solve_two_node(spec)
    g1, g2 = spec.channel1.gains, spec.channel2.gains
    for k in range(1, spec.horizon + 1):
        for u1, u2 in itertools.product(range(spec.battery + 1), repeat=2):
            for (j1, h1), (j2, h2) in itertools.product(enumerate(g1), enumerate(g2)):
                a = decide_two_node(t, k, u1, u2, h1, h2)
                assert not (a is Action.TX1 and u1 == 0) and not (a is Action.TX2 and u2 == 0)
                assert int(a) in optimal_actions(spec, k, (u1, u2), j1 * len(g2) + j2)


def test_two_node_ties():
    ch = ChannelDistribution.point(1.0)
    t = solve_two_node(TwoNodeSpec(1, 2, 0.5, 0.5, ch, ch))
    assert decide_two_node(t, 1, 1, 1, 1.0, 1.0) is Action.TX1  # equal value and gain: node 1
    assert decide_two_node(t, 1, 1, 1, 0.0, 0.0) is Action.IDLE  # zero gain: idle wins the tie


def test_rejects_out_of_range():
    ch = ChannelDistribution.point(1.0)
    t = solve_two_node(TwoNodeSpec(2, 2, 0.5, 0.5, ch, ch))
    with pytest.raises(ValueError):
        decide_two_node(t, 3, 0, 0, 1.0, 1.0)
    with pytest.raises(ValueError):
        decide_two_node(t, 1, 3, 0, 1.0, 1.0)


def test_degenerate_second_node_reduces_to_single():
    spec = TwoNodeSpec(3, 2, 0.4, 0.0, CHANNELS[2], CHANNELS[1])
    v = value_iteration_two(spec)
    assert np.max(np.abs(v[:, :, 0] - value_iteration_single(spec.marginal(1)))) <= 1e-12


def _tables():
    ch = ChannelDistribution.point(1.0)
    spec = TwoNodeSpec(2, 2, 0.5, 0.5, ch, ch)
    return solve_binary(spec.marginal(1)), solve_binary(spec.marginal(2))


def test_decoupled_rules():
    t1, t2 = _tables()
    # last slot: any positive gain with energy is a request
    assert decide_decoupled(t1, t2, 2, 1, 0, 0.5, 3.0) is Action.TX1
    assert decide_decoupled(t1, t2, 2, 0, 1, 3.0, 0.5) is Action.TX2
    assert decide_decoupled(t1, t2, 2, 0, 0, 3.0, 3.0) is Action.IDLE
    assert decide_decoupled(t1, t2, 2, 1, 1, 0.5, 3.0) is Action.TX2
    assert decide_decoupled(t1, t2, 2, 1, 1, 3.0, 0.5) is Action.TX1
    assert decide_decoupled(t1, t2, 2, 1, 1, 1.0, 1.0) is Action.TX1


def test_decoupled_n():
    t1, _ = _tables()
    tabs = [t1, t1, t1]
    assert decide_decoupled_n(tabs, 2, (0, 0, 0), (1.0, 1.0, 1.0)) is None
    assert decide_decoupled_n(tabs, 2, (0, 1, 0), (1.0, 1.0, 1.0)) == 2
    assert decide_decoupled_n(tabs, 2, (1, 1, 1), (0.2, 0.9, 0.5)) == 2
    assert decide_decoupled_n(tabs, 2, (1, 1, 1), (0.9, 0.9, 0.5)) == 1
    with pytest.raises(ValueError):
        decide_decoupled_n(tabs, 2, (1, 1), (0.2, 0.9, 0.5))


def test_decoupled_n_matches_two_node_version():
    t1, t2 = _tables()
    for k, u1, u2, h1, h2 in itertools.product((1, 2), range(3), range(3), (0.0, 0.5, 1.0, 2.0), (0.0, 1.0, 3.0)):
        a = decide_decoupled(t1, t2, k, u1, u2, h1, h2)
        b = decide_decoupled_n([t1, t2], k, (u1, u2), (h1, h2))
        assert int(a) == (b or 0)


def test_csv_round_trip(tmp_path):
    spec = TwoNodeSpec(2, 2, 0.5, 0.3, CHANNELS[1], CHANNELS[2])
    t = solve_two_node(spec)
    t.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "slot,energy1,energy2,gamma"
    assert (tmp_path / "t.csv").read_text().splitlines()[1].startswith("1,0,0,")
    assert np.array_equal(TwoNodeGammaTable.from_csv(tmp_path / "t.csv", spec).values, t.values)
