"""Round-level Monte Carlo of BB84, LM05 and SDC over depolarizing channels.

Every element of these protocols is a Pauli or a Clifford measurement, so a
round is tracked as a Pauli frame ``(x, z)`` on the travelling qubit instead of
a state vector. Paulis are coded 0..3 for I, X, Y, Z.

Rounds are drawn in fixed-size blocks, each with its own generator derived from
``(seed, block index)``; tallies are plain sums, so the result does not depend
on how blocks are distributed across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelMode, ChannelSpec, cm_bit_error, lm05_em_error, sdc_em_error
from .entropy import PauliErrorTriple
from .errors import DomainError, PhenomenologicalOnlyError
from .keyrate import BlockAllocation, Protocol

BLOCK_ROUNDS = 1 << 16

I, X, Y, Z = 0, 1, 2, 3
PAULI_X_BIT = np.array([0, 1, 1, 0], dtype=np.uint8)
PAULI_Z_BIT = np.array([0, 0, 1, 1], dtype=np.uint8)

# Bell states labelled by (ZZ parity, XX phase) bits; symbols psi+, psi-, phi+, phi- -> 0..3
BELL_SYMBOL = {(1, 0): 0, (1, 1): 1, (0, 0): 2, (0, 1): 3}
INITIAL_BELL = (1, 0)  # Bob starts every SDC round with psi+


def pauli_code(x, z):
    """Pauli index from its frame bits (vectorized)."""
    x = np.asarray(x, dtype=np.uint8)
    z = np.asarray(z, dtype=np.uint8)
    # I=00, X=10, Y=11, Z=01
    return np.where(x == 1, np.where(z == 1, Y, X), np.where(z == 1, Z, I)).astype(np.uint8)


def compose_paulis(a, b):
    """Product of two Paulis up to phase (vectorized)."""
    return pauli_code(PAULI_X_BIT[a] ^ PAULI_X_BIT[b], PAULI_Z_BIT[a] ^ PAULI_Z_BIT[b])


def sample_depolarizing(rng: np.random.Generator, q: float, size: int) -> np.ndarray:
    """Pauli codes drawn from a depolarizing channel: I w.p. 1-3q/4, else X, Y, Z each q/4."""
    u = rng.random(size)
    out = np.zeros(size, dtype=np.uint8)
    quarter = q / 4.0
    out[u < 3 * quarter] = X
    out[u < 2 * quarter] = Y
    out[u < quarter] = Z
    return out


def bell_outcome(pauli, initial=INITIAL_BELL) -> int:
    """Bell-measurement symbol after applying ``pauli`` to the travelling half."""
    parity = initial[0] ^ int(PAULI_X_BIT[pauli])
    phase = initial[1] ^ int(PAULI_Z_BIT[pauli])
    return BELL_SYMBOL[(parity, phase)]


_SYMBOL_TO_PAULI = {bell_outcome(p): p for p in (I, X, Y, Z)}
# vectorized forms: index (parity << 1 | phase) -> symbol, symbol -> Pauli
_BELL_TABLE = np.array([BELL_SYMBOL[(b >> 1, b & 1)] for b in range(4)], dtype=np.uint8)
_DECODE_TABLE = np.array([_SYMBOL_TO_PAULI[s] for s in range(4)], dtype=np.uint8)


def sdc_decode(symbol: int) -> int:
    """Invert :func:`bell_outcome` for the fixed initial Bell state."""
    return _SYMBOL_TO_PAULI[symbol]


# LM05: Alice's unitaries I, i sigma_y, sigma_x, sigma_z carry bit pairs 00, 11, 10, 01;
# with reverse reconciliation the key bit is the first bit of the pair.
LM05_KEY_BIT = np.array([0, 1, 1, 0], dtype=np.uint8)  # indexed by Pauli code
LM05_IN_S1 = np.array([0, 1, 0, 1], dtype=np.uint8)  # S1 = {sigma_x, sigma_z}


def lm05_decode(bob_basis_x, prepared_bit, measured_bit, in_s1):
    """Bob's key bit: prepared XOR measured, flipped for S1 when he used the X basis."""
    bob_basis_x = np.asarray(bob_basis_x, dtype=np.uint8)
    return (np.asarray(prepared_bit) ^ np.asarray(measured_bit)
            ^ (bob_basis_x & np.asarray(in_s1, dtype=np.uint8))).astype(np.uint8)


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``c`` is the encoding-mode probability; ``p_z`` the preferred-basis
    probability of the preparing party (defaults to ``c``, the counting model
    behind the block allocation).
    """

    protocol: Protocol
    channel: ChannelSpec
    rounds: int
    c: float
    seed: int = 0
    p_z: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if self.rounds < 1:
            raise DomainError("rounds must be >= 1")
        if not (0.0 < self.c < 1.0):
            raise DomainError(f"c={self.c!r} must lie in (0, 1)")
        if self.p_z is not None and not (0.0 <= self.p_z <= 1.0):
            raise DomainError(f"p_z={self.p_z!r} must lie in [0, 1]")

    @property
    def basis_prob(self) -> float:
        return self.c if self.p_z is None else self.p_z


@dataclass
class _Tally:
    em: int = 0
    cm: int = 0
    wasted: int = 0
    em_errors: int = 0
    pauli: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    cm_errors: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))

    def __add__(self, other: "_Tally") -> "_Tally":
        return _Tally(self.em + other.em, self.cm + other.cm, self.wasted + other.wasted,
                      self.em_errors + other.em_errors, self.pauli + other.pauli,
                      self.cm_errors + other.cm_errors)


def _rate(count: int, total: int) -> tuple[float, float]:
    if total == 0:
        return 0.0, 0.0
    p = count / total
    return p, math.sqrt(p * (1.0 - p) / total)


@dataclass(frozen=True)
class SimReport:
    protocol: Protocol
    model: str
    rounds: int
    em_count: int
    cm_count: int
    wasted_count: int
    em_error_rate: float
    em_error_se: float
    cm_error_rates: tuple[float, ...]
    cm_error_se: tuple[float, ...]
    em_pauli_triple: PauliErrorTriple | None = None
    em_pauli_se: tuple[float, float, float] | None = None

    def as_dict(self) -> dict:
        d = {
            "protocol": self.protocol.value, "model": self.model, "rounds": self.rounds,
            "em_count": self.em_count, "cm_count": self.cm_count,
            "wasted_count": self.wasted_count,
            "em_error_rate": self.em_error_rate, "em_error_se": self.em_error_se,
        }
        for i, (r, s) in enumerate(zip(self.cm_error_rates, self.cm_error_se), start=1):
            d[f"cm_error_rate_path{i}"] = r
            d[f"cm_error_se_path{i}"] = s
        if self.em_pauli_triple is not None:
            for name, r, s in zip("xyz", self.em_pauli_triple.as_tuple(), self.em_pauli_se):
                d[f"em_pauli_{name}"] = r
                d[f"em_pauli_{name}_se"] = s
        return d


def _block_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _bb84_block(rng, size, q, c, pz) -> _Tally:
    alice_z = rng.random(size) < pz
    bob_z = rng.random(size) < pz
    bit = rng.integers(0, 2, size, dtype=np.uint8)
    e = sample_depolarizing(rng, q, size)
    flip = np.where(alice_z, PAULI_X_BIT[e], PAULI_Z_BIT[e])
    measured = bit ^ flip
    em = alice_z & bob_z
    cm = ~alice_z & ~bob_z
    err = measured != bit
    return _Tally(int(em.sum()), int(cm.sum()), int(size - em.sum() - cm.sum()),
                  int(err[em].sum()), cm_errors=np.array([int(err[cm].sum()), 0]))


def _lm05_block(rng, size, q, c, pz) -> _Tally:
    bob_x = (rng.random(size) >= pz).astype(np.uint8)
    prepared = rng.integers(0, 2, size, dtype=np.uint8)
    alice_em = rng.random(size) < c
    e1 = sample_depolarizing(rng, q, size)
    e2 = sample_depolarizing(rng, q, size)

    # encoding mode: Alice applies a uniformly random unitary
    u = rng.integers(0, 4, size, dtype=np.uint8)
    net = compose_paulis(e2, compose_paulis(u, e1))
    flip = np.where(bob_x == 1, PAULI_Z_BIT[net], PAULI_X_BIT[net])
    measured = prepared ^ flip
    key_bob = lm05_decode(bob_x, prepared, measured, LM05_IN_S1[u])
    em_err = key_bob != LM05_KEY_BIT[u]

    # control mode: Alice measures in X, resends what she found, Bob measures X
    alice_bit = prepared ^ PAULI_Z_BIT[e1]
    back_bit = alice_bit ^ PAULI_Z_BIT[e2]
    cm = ~alice_em & (bob_x == 1)
    fwd_err = alice_bit != prepared
    bwd_err = back_bit != alice_bit

    n_em = int(alice_em.sum())
    n_cm = int(cm.sum())
    return _Tally(n_em, n_cm, size - n_em - n_cm, int(em_err[alice_em].sum()),
                  cm_errors=np.array([int(fwd_err[cm].sum()), int(bwd_err[cm].sum())]))


def _sdc_block(rng, size, q, c, pz) -> _Tally:
    alice_em = rng.random(size) < c
    bob_bell = rng.random(size) < c
    e1 = sample_depolarizing(rng, q, size)
    e2 = sample_depolarizing(rng, q, size)

    u = rng.integers(0, 4, size, dtype=np.uint8)
    net = compose_paulis(e2, compose_paulis(u, e1))
    symbol = _BELL_TABLE[((INITIAL_BELL[0] ^ PAULI_X_BIT[net]) << 1) | (INITIAL_BELL[1] ^ PAULI_Z_BIT[net])]
    decoded = _DECODE_TABLE[symbol]
    err_pauli = compose_paulis(decoded, u)

    # control mode: psi+ has anticorrelated Z outcomes; Alice relays a fresh X state
    stored = rng.integers(0, 2, size, dtype=np.uint8)
    alice_z = (1 ^ stored) ^ PAULI_X_BIT[e1]
    fresh = rng.integers(0, 2, size, dtype=np.uint8)
    bob_x = fresh ^ PAULI_Z_BIT[e2]
    fwd_err = (alice_z ^ stored ^ 1) == 1
    bwd_err = bob_x != fresh

    em = alice_em & bob_bell
    cm = ~alice_em & ~bob_bell
    n_em, n_cm = int(em.sum()), int(cm.sum())
    pauli = np.bincount(err_pauli[em], minlength=4).astype(np.int64)
    return _Tally(n_em, n_cm, size - n_em - n_cm, int(n_em - pauli[I]), pauli,
                  np.array([int(fwd_err[cm].sum()), int(bwd_err[cm].sum())]))


def _statistical_block(rng, size, protocol, ch, c, pz) -> _Tally:
    """Counts from the sifting probabilities, errors from the stipulated rates."""
    if protocol is Protocol.LM05:
        probs = [c, (1 - c) * (1 - pz)]
    elif protocol is Protocol.BB84:
        probs = [pz * pz, (1 - pz) ** 2]
    else:
        probs = [c * c, (1 - c) ** 2]
    n_em, n_cm, n_w = (int(v) for v in rng.multinomial(size, probs + [1 - sum(probs)]))
    e = cm_bit_error(ch)
    paths = 1 if protocol is Protocol.BB84 else 2
    cm_err = np.array([int(rng.binomial(n_cm, e)) if i < paths else 0 for i in range(2)])
    pauli = np.zeros(4, dtype=np.int64)
    if protocol is Protocol.SDC:
        t = sdc_em_error(ch)
        pauli = np.asarray(rng.multinomial(n_em, [1 - t.total, t.q1, t.q2, t.q3]), dtype=np.int64)
        em_err = int(n_em - pauli[I])
    else:
        rate = lm05_em_error(ch) if protocol is Protocol.LM05 else e
        em_err = int(rng.binomial(n_em, rate))
    return _Tally(n_em, n_cm, n_w, em_err, pauli, cm_err)


_BLOCKS = {Protocol.BB84: _bb84_block, Protocol.LM05: _lm05_block, Protocol.SDC: _sdc_block}


def _run(cfg: SimConfig, block_fn, model: str, workers: int) -> SimReport:
    nblocks = -(-cfg.rounds // BLOCK_ROUNDS)

    def one(i):
        size = min(BLOCK_ROUNDS, cfg.rounds - i * BLOCK_ROUNDS)
        return block_fn(_block_rng(cfg.seed, i), size)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(nblocks)))
    else:
        parts = [one(i) for i in range(nblocks)]
    t = _Tally()
    for part in parts:
        t = t + part

    em_rate, em_se = _rate(t.em_errors, t.em)
    paths = 1 if cfg.protocol is Protocol.BB84 else 2
    cm = [_rate(int(t.cm_errors[i]), t.cm) for i in range(paths)]
    triple = triple_se = None
    if cfg.protocol is Protocol.SDC:
        stats = [_rate(int(t.pauli[j]), t.em) for j in (X, Y, Z)]
        triple = PauliErrorTriple(*(s[0] for s in stats))
        triple_se = tuple(s[1] for s in stats)
    return SimReport(cfg.protocol, model, cfg.rounds, t.em, t.cm, t.wasted, em_rate, em_se,
                     tuple(r for r, _ in cm), tuple(s for _, s in cm), triple, triple_se)


def simulate(cfg: SimConfig, workers: int = 1) -> SimReport:
    """Microscopic simulation with independent forward and backward Pauli errors.

    Raises:
        PhenomenologicalOnlyError: for correlated channels; use
            :func:`simulate_statistical` instead.
    """
    if cfg.channel.mode is ChannelMode.CORRELATED:
        raise PhenomenologicalOnlyError(
            "correlated channels are phenomenological-only; use simulate_statistical")
    fn = _BLOCKS[cfg.protocol]
    q, c, pz = cfg.channel.q, cfg.c, cfg.basis_prob
    return _run(cfg, lambda rng, size: fn(rng, size, q, c, pz), "microscopic", workers)


def simulate_statistical(cfg: SimConfig, workers: int = 1) -> SimReport:
    """Statistics-level sampling at the error rates the channel model stipulates."""
    p, ch, c, pz = cfg.protocol, cfg.channel, cfg.c, cfg.basis_prob
    return _run(cfg, lambda rng, size: _statistical_block(rng, size, p, ch, c, pz),
                "statistical", workers)


@dataclass(frozen=True)
class CountCheck:
    name: str
    observed: int
    expected: float
    se: float

    @property
    def z(self) -> float:
        if self.se == 0:
            return 0.0 if self.observed == self.expected else math.inf
        return (self.observed - self.expected) / self.se


@dataclass(frozen=True)
class CountingReport:
    allocation: BlockAllocation
    sim: SimReport
    checks: tuple[CountCheck, ...]

    def passed(self, sigmas: float = 3.0) -> bool:
        return all(abs(ch.z) <= sigmas for ch in self.checks)


def verify_counting(cfg: SimConfig, alloc: BlockAllocation, workers: int = 1) -> CountingReport:
    """Compare simulated encoding/control/wasted counts with an allocation.

    Expected counts are ``(n_e, k, wasted)`` from ``alloc``; standard errors are
    binomial, ``sqrt(M p (1 - p))``.
    """
    if cfg.rounds != alloc.M:
        raise DomainError(f"simulated rounds {cfg.rounds} differ from M={alloc.M}")
    if cfg.protocol is not alloc.protocol:
        raise DomainError("protocol of the config and the allocation differ")
    sim = simulate(cfg, workers) if cfg.channel.mode is ChannelMode.INDEPENDENT \
        else simulate_statistical(cfg, workers)
    M = alloc.M
    checks = []
    for name, obs, exp in (("em", sim.em_count, alloc.n_e), ("cm", sim.cm_count, alloc.k),
                           ("wasted", sim.wasted_count, alloc.wasted)):
        p = exp / M
        checks.append(CountCheck(name, obs, float(exp), math.sqrt(M * p * (1 - p))))
    return CountingReport(alloc, sim, tuple(checks))
