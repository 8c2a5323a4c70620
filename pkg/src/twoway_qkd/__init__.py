"""Finite-key secure key lengths for the two-way QKD protocols LM05 and SDC,
compared against asymmetric BB84 over depolarizing channels."""

__version__ = "0.1.0"

from .channel import ChannelMode, ChannelSpec, compose_depolarizing
from .entropy import PauliErrorTriple, binary_entropy, mu, quaternary_entropy
from .errors import (
    DomainError,
    InfeasibleAllocationError,
    NoCrossoverError,
    NoPositiveRateError,
    PhenomenologicalOnlyError,
)
from .keyrate import (
    ALL_PROTOCOLS,
    BlockAllocation,
    KeyLengthBreakdown,
    Protocol,
    SecurityParams,
    allocate,
    asymptotic_efficiency,
    dw_rate,
    key_length,
    key_length_bb84,
    key_length_lm05,
    key_length_sdc,
)
from .optimize import OptimumReport, crossover, optimize_k, sweep, zero_threshold
