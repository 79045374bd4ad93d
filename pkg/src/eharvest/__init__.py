"""Finite-horizon transmission policies for energy-harvesting sensors."""
from .model import (ArrivalDistribution, ChannelDistribution, ConsumptionMode, ProblemSpec, SamplePath, SpecError,
                    TwoNodeSpec, expected_reward, quantize, reward, validate)
from .single import (BinaryThresholdTable, DiscreteGammaTable, channel_cutoff, decide_binary, decide_discrete,
                     policy_value, solve_binary, solve_discrete)
from .twonode import (Action, TwoNodeGammaTable, decide_decoupled, decide_decoupled_n, decide_two_node,
                      solve_two_node)

__version__ = "0.1.0"
