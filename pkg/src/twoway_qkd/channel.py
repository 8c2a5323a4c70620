"""Depolarizing error models for a forward/backward channel pair.

A depolarizing channel of strength ``q`` maps ``rho -> (1 - q) rho + q I/2``,
i.e. applies each of X, Y, Z with probability ``q/4``. Every single path then
flips a measured bit with probability ``q/2`` in any basis.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .entropy import PauliErrorTriple
from .errors import DomainError


class ChannelMode(enum.Enum):
    INDEPENDENT = "independent"
    CORRELATED = "correlated"

    @classmethod
    def parse(cls, value) -> "ChannelMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown channel mode {value!r}") from None


@dataclass(frozen=True)
class ChannelSpec:
    """Depolarizing strength of each path plus the forward/backward correlation model."""

    q: float
    mode: ChannelMode = ChannelMode.INDEPENDENT

    def __post_init__(self):
        if math.isnan(self.q) or not (0.0 <= self.q <= 1.0):
            raise DomainError(f"depolarizing probability q={self.q!r} outside [0, 1]")
        object.__setattr__(self, "mode", ChannelMode.parse(self.mode))

    @classmethod
    def from_qhalf(cls, qhalf: float, mode=ChannelMode.INDEPENDENT) -> "ChannelSpec":
        """Build from the per-path bit error rate ``q/2``."""
        return cls(2.0 * qhalf, mode)

    @property
    def qhalf(self) -> float:
        return self.q / 2.0


def compose_depolarizing(q1: float, q2: float) -> float:
    """Net strength of two concatenated depolarizing channels."""
    for v in (q1, q2):
        if math.isnan(v) or not (0.0 <= v <= 1.0):
            raise DomainError(f"depolarizing probability {v!r} outside [0, 1]")
    return q1 + q2 - q1 * q2


def cm_bit_error(ch: ChannelSpec) -> float:
    """Bit error rate seen on one path in control mode."""
    return ch.q / 2.0


def lm05_em_error(ch: ChannelSpec) -> float:
    """Bit error rate of an LM05 encoding round (qubit travels both paths)."""
    if ch.mode is ChannelMode.CORRELATED:
        return ch.q / 2.0
    return compose_depolarizing(ch.q, ch.q) / 2.0


def sdc_em_error(ch: ChannelSpec) -> PauliErrorTriple:
    """Pauli error frequencies on the Bell pair after a SDC encoding round."""
    if ch.mode is ChannelMode.CORRELATED:
        return PauliErrorTriple.symmetric(ch.q / 4.0)
    return PauliErrorTriple.symmetric(compose_depolarizing(ch.q, ch.q) / 4.0)
