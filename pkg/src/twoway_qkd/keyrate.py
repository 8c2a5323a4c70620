"""Finite-key lengths, efficiencies and asymptotic rates for BB84, LM05 and SDC.

Counting convention: ``M`` total signals (entangled pairs for SDC) split into
``n`` coincident encoding-mode rounds, ``k`` coincident control-mode rounds and
the rest wasted on basis mismatch, with ``M = (sqrt(n) + sqrt(k))**2``.
LM05 keeps ``n_e = n + sqrt(n k)`` encoding bits because its decoding never
suffers a basis mismatch.  Efficiency is ``L / (pair_factor * M)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelMode, ChannelSpec, cm_bit_error, lm05_em_error, sdc_em_error
from .entropy import PauliErrorTriple, binary_entropy, mu, quaternary_entropy
from .errors import DomainError, InfeasibleAllocationError

DEFAULT_EPS_S = 1e-10


class Protocol(enum.Enum):
    BB84 = "bb84"
    LM05 = "lm05"
    SDC = "sdc"

    @property
    def overlap(self) -> float:
        """Maximal overlap of the encoding- and control-mode measurements."""
        return 0.25 if self is Protocol.SDC else 0.5

    @property
    def pair_factor(self) -> int:
        return 2 if self is Protocol.SDC else 1

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown protocol {value!r}") from None


ALL_PROTOCOLS = (Protocol.BB84, Protocol.LM05, Protocol.SDC)


@dataclass(frozen=True)
class SecurityParams:
    """Security parameter and the error-correction cofactor.

    ``ec_cofactor`` multiplies the Shannon-limit leakage ``n h(e)``; 1 means an
    ideal code.
    """

    eps_s: float = DEFAULT_EPS_S
    ec_cofactor: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.eps_s < 1.0):
            raise DomainError(f"eps_s={self.eps_s!r} must lie in (0, 1)")
        if not self.ec_cofactor >= 1.0:
            raise DomainError(f"ec_cofactor={self.ec_cofactor!r} must be >= 1")

    @property
    def const_term(self) -> float:
        """``log2(2 / eps_s**2)`` bits paid to leftover hashing."""
        return 1.0 - 2.0 * math.log2(self.eps_s)


@dataclass(frozen=True)
class BlockAllocation:
    protocol: Protocol
    M: int
    n: int
    k: int
    n_e: int
    c: float
    wasted: int


@dataclass(frozen=True)
class KeyLengthBreakdown:
    protocol: Protocol
    allocation: BlockAllocation
    raw_bits: float
    pa_penalty: float
    ec_leak: float
    const_term: float
    L: int
    efficiency: float

    def as_dict(self) -> dict:
        a = self.allocation
        return {
            "protocol": self.protocol.value,
            "M": a.M, "n": a.n, "k": a.k, "n_e": a.n_e, "c": a.c, "wasted": a.wasted,
            "raw_bits": self.raw_bits, "pa_penalty": self.pa_penalty,
            "ec_leak": self.ec_leak, "const_term": self.const_term,
            "L": self.L, "efficiency": self.efficiency,
        }


def max_feasible_k(M: int) -> int:
    """Largest control-mode size that still leaves ``n >= 1``."""
    if M < 4:
        return 0
    # floor((sqrt(M) - 1)**2) = M + 1 - ceil(2 sqrt(M)), in exact integers
    r = math.isqrt(4 * M)
    ceil_2root = r if r * r == 4 * M else r + 1
    return M + 1 - ceil_2root


def _counts(M: int, k, protocol: Protocol):
    """Vectorized (n, n_e) for a given total ``M``; ``k`` may be an array."""
    k = np.asarray(k, dtype=float)
    n = np.maximum(np.rint((math.sqrt(M) - np.sqrt(k)) ** 2), 1.0)
    if protocol is Protocol.LM05:
        n_e = n + np.floor(np.sqrt(n * k))
    else:
        n_e = n
    return n, n_e


def allocate(M: int, k: int, p: Protocol) -> BlockAllocation:
    """Split ``M`` signals into encoding, control and wasted rounds for a given ``k``.

    Raises:
        InfeasibleAllocationError: when ``k < 1`` or ``sqrt(k) > sqrt(M) - 1``.
    """
    p = Protocol.parse(p)
    M, k = int(M), int(k)
    if k < 1 or k > max_feasible_k(M):
        raise InfeasibleAllocationError(
            f"k={k} infeasible for M={M} (need 1 <= k <= {max_feasible_k(M)})")
    n, n_e = _counts(M, k, p)
    n, n_e = int(n), int(n_e)
    wasted = M - n_e - k
    if wasted < 0:
        raise InfeasibleAllocationError(f"rounding leaves no room for k={k} at M={M}")
    c = math.sqrt(n) / (math.sqrt(n) + math.sqrt(k))
    return BlockAllocation(p, M, n, k, n_e, c, wasted)


def _em_entropy(p: Protocol, ch: ChannelSpec) -> float:
    """Per-symbol error-correction entropy of the encoding-mode string."""
    if p is Protocol.SDC:
        return quaternary_entropy(sdc_em_error(ch))
    if p is Protocol.LM05:
        return binary_entropy(lm05_em_error(ch))
    return binary_entropy(cm_bit_error(ch))


def _budget(p: Protocol, n, k, n_e, ch: ChannelSpec, sec: SecurityParams):
    """Key-length terms, vectorized over block counts.

    Returns ``(raw_bits, pa_penalty, ec_leak)``; the budget is
    ``raw_bits - pa_penalty - ec_leak - sec.const_term``.
    """
    e = cm_bit_error(ch)
    h_em = _em_entropy(p, ch)
    if p is Protocol.SDC:
        raw = 2.0 * n
        fluct = mu(n, k, sec.eps_s)
        ec = sec.ec_cofactor * n * h_em
    elif p is Protocol.LM05:
        raw = n_e
        fluct = mu(n_e, k, sec.eps_s)
        ec = sec.ec_cofactor * n_e * h_em
    else:
        raw = n
        fluct = mu(n, k, sec.eps_s)
        ec = sec.ec_cofactor * n * h_em
    # beyond 1/2 the max-entropy bound is trivial: the whole raw string is lost
    x = np.minimum(e + np.asarray(fluct), 0.5)
    pa = raw * binary_entropy(x)
    return raw, pa, ec


def final_length(budget) -> np.ndarray:
    return np.maximum(np.floor(budget), 0.0)


def key_length(alloc: BlockAllocation, ch: ChannelSpec,
               sec: SecurityParams = SecurityParams()) -> KeyLengthBreakdown:
    """Finite key length for whichever protocol ``alloc`` was produced for."""
    p = alloc.protocol
    raw, pa, ec = _budget(p, float(alloc.n), float(alloc.k), float(alloc.n_e), ch, sec)
    raw, pa, ec = float(raw), float(pa), float(ec)
    L = int(final_length(raw - pa - ec - sec.const_term))
    return KeyLengthBreakdown(p, alloc, raw, pa, ec, sec.const_term, L,
                              L / (p.pair_factor * alloc.M))


def _expect(alloc: BlockAllocation, p: Protocol):
    if alloc.protocol is not p:
        raise DomainError(f"allocation built for {alloc.protocol.value}, not {p.value}")


def key_length_sdc(alloc, ch, sec=SecurityParams()) -> KeyLengthBreakdown:
    """``n [2 - 2 h2(q/2 + mu(n, k)) - h4(Q_E)] - log2(2/eps_s^2)``."""
    _expect(alloc, Protocol.SDC)
    return key_length(alloc, ch, sec)


def key_length_lm05(alloc, ch, sec=SecurityParams()) -> KeyLengthBreakdown:
    """``n_e - n_e h2(q/2 + mu(n_e, k)) - n_e h2(Q_f) - log2(2/eps_s^2)``.

    The fluctuation term is evaluated with ``n_e``, not ``n``.
    """
    _expect(alloc, Protocol.LM05)
    return key_length(alloc, ch, sec)


def key_length_bb84(alloc, ch, sec=SecurityParams()) -> KeyLengthBreakdown:
    """Asymmetric BB84 baseline with the same template as LM05 on ``n`` bits."""
    _expect(alloc, Protocol.BB84)
    return key_length(alloc, ch, sec)


def asymptotic_efficiency(p: Protocol, ch: ChannelSpec) -> float:
    """Infinite-key efficiency, clamped at zero like the finite key length.

    SDC: ``1 - h2(q/2) - h4(Q_E)/2``; LM05: ``1 - h2(q/2) - h2(Q_f)``;
    BB84: ``1 - 2 h2(q/2)``.
    """
    p = Protocol.parse(p)
    h_cm = binary_entropy(cm_bit_error(ch))
    h_em = _em_entropy(p, ch)
    if p is Protocol.SDC:
        h_em /= 2.0
    return max(0.0, 1.0 - h_cm - h_em)


def dw_rate(p: Protocol, em_err, cm_err) -> float:
    """Devetak-Winter lower bound per encoding round, reported unclamped.

    SDC takes two :class:`PauliErrorTriple` arguments, BB84 and LM05 take two
    bit error rates.
    """
    p = Protocol.parse(p)
    bound = -math.log2(p.overlap)
    if p is Protocol.SDC:
        try:
            em = em_err if isinstance(em_err, PauliErrorTriple) else PauliErrorTriple(*em_err)
            cm = cm_err if isinstance(cm_err, PauliErrorTriple) else PauliErrorTriple(*cm_err)
        except TypeError:
            raise DomainError("SDC rate needs error triples") from None
        return bound - quaternary_entropy(cm) - quaternary_entropy(em)
    if not (np.ndim(em_err) == 0 and np.ndim(cm_err) == 0) or isinstance(
            em_err, PauliErrorTriple) or isinstance(cm_err, PauliErrorTriple):
        raise DomainError(f"{p.value} rate needs scalar error rates")
    return bound - binary_entropy(float(cm_err)) - binary_entropy(float(em_err))


__all__ = [
    "ALL_PROTOCOLS", "BlockAllocation", "ChannelMode", "DEFAULT_EPS_S",
    "KeyLengthBreakdown", "Protocol", "SecurityParams", "allocate",
    "asymptotic_efficiency", "dw_rate", "key_length", "key_length_bb84",
    "key_length_lm05", "key_length_sdc", "max_feasible_k",
]
