import itertools
import math

import pytest

from eharvest.model import ArrivalDistribution, ChannelDistribution, ConsumptionMode, ProblemSpec, TwoNodeSpec

E1 = math.e - 1  # log(1 + E1) == 1

CHANNELS = [
    ChannelDistribution.point(1.0),
    ChannelDistribution((0.5, 2.0), (0.5, 0.5)),
    ChannelDistribution((0.0, 0.7, 3.0), (0.2, 0.5, 0.3)),
]
BERNOULLI_RATES = (0.0, 0.3, 0.5, 1.0)


def single_grid(horizons=(1, 2, 3, 4), batteries=(1, 2, 3)):
    """Bernoulli specs in binary mode plus uniform-arrival specs in discrete mode."""
    for n, B, ch in itertools.product(horizons, batteries, CHANNELS):
        for p in BERNOULLI_RATES:
            yield ProblemSpec.bernoulli(n, B, p, ch)
        yield ProblemSpec(n, B, ArrivalDistribution.uniform(B), ch, ConsumptionMode.DISCRETE)


def binary_grid(horizons=(1, 2, 3, 4), batteries=(1, 2, 3)):
    return [s for s in single_grid(horizons, batteries) if s.mode is ConsumptionMode.BINARY]


def two_node_grid(horizons=(1, 2, 3), batteries=(1, 2)):
    pairs = [(0.5, 0.5), (0.3, 0.8), (1.0, 0.0)]
    chans = [(CHANNELS[1], CHANNELS[1]), (CHANNELS[2], CHANNELS[0])]
    for n, B, (p1, p2), (c1, c2) in itertools.product(horizons, batteries, pairs, chans):
        yield TwoNodeSpec(n, B, p1, p2, c1, c2)


@pytest.fixture
def hand_spec():
    """n=2, B=2, Bernoulli(0.5), unit reward per transmission."""
    return ProblemSpec.bernoulli(2, 2, 0.5, ChannelDistribution.point(E1))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
