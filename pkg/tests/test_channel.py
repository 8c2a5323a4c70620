import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoway_qkd.channel import (
    ChannelMode,
    ChannelSpec,
    cm_bit_error,
    compose_depolarizing,
    lm05_em_error,
    sdc_em_error,
)
from twoway_qkd.errors import DomainError

IND, COR = ChannelMode.INDEPENDENT, ChannelMode.CORRELATED
qs = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)

PAULIS = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]


def _label(m):
    """Index of the Pauli proportional to ``m``."""
    for i, p in enumerate(PAULIS):
        if abs(abs(np.trace(p.conj().T @ m)) - 2) < 1e-9:
            return i
    raise AssertionError("not a Pauli")


# products of Pauli matrices, up to phase, as a lookup table
PRODUCT = np.array([[_label(PAULIS[b] @ PAULIS[a]) for b in range(4)] for a in range(4)])
FLIPS_Z = np.array([_label(p) in (1, 2) for p in PAULIS])  # anticommutes with sigma_z


def _sample_two_paths(q, size, seed):
    rng = np.random.default_rng(seed)
    probs = [1 - 3 * q / 4, q / 4, q / 4, q / 4]
    e1 = rng.choice(4, size=size, p=probs)
    e2 = rng.choice(4, size=size, p=probs)
    return PRODUCT[e1, e2]


def test_cm_bit_error_examples():
    assert cm_bit_error(ChannelSpec(0.0)) == 0.0
    assert cm_bit_error(ChannelSpec(1.0)) == 0.5
    assert cm_bit_error(ChannelSpec(0.1, COR)) == pytest.approx(0.05)


def test_lm05_em_error_examples():
    assert lm05_em_error(ChannelSpec(0.1, IND)) == pytest.approx(0.095, abs=1e-15)
    assert lm05_em_error(ChannelSpec(0.1, COR)) == pytest.approx(0.05, abs=1e-15)
    assert lm05_em_error(ChannelSpec(0.0, IND)) == lm05_em_error(ChannelSpec(0.0, COR)) == 0.0


def test_sdc_em_error_examples():
    assert sdc_em_error(ChannelSpec(0.1, IND)).as_tuple() == pytest.approx((0.0475,) * 3, abs=1e-15)
    assert sdc_em_error(ChannelSpec(0.1, COR)).as_tuple() == pytest.approx((0.025,) * 3, abs=1e-15)
    assert sdc_em_error(ChannelSpec(0.0)).as_tuple() == (0.0, 0.0, 0.0)


def test_lm05_em_error_monte_carlo_oracle():
    n = 400_000
    net = _sample_two_paths(0.1, n, seed=11)
    p = FLIPS_Z[net].mean()
    se = np.sqrt(p * (1 - p) / n)
    assert abs(p - lm05_em_error(ChannelSpec(0.1))) < 3 * se


def test_sdc_em_error_monte_carlo_oracle():
    n = 400_000
    net = _sample_two_paths(0.1, n, seed=12)
    counts = np.bincount(net, minlength=4)[1:] / n
    for emp, exp in zip(counts, sdc_em_error(ChannelSpec(0.1)).as_tuple()):
        assert abs(emp - exp) < 3 * np.sqrt(exp * (1 - exp) / n)


def test_compose_examples():
    assert compose_depolarizing(0.1, 0.1) == pytest.approx(0.19)
    assert compose_depolarizing(0.0, 0.37) == 0.37
    with pytest.raises(DomainError):
        compose_depolarizing(1.2, 0.0)


@given(qs)
def test_compose_matches_bit_level_independence(q):
    e = q / 2
    assert e * (1 - e) + e * (1 - e) == pytest.approx(compose_depolarizing(q, q) / 2, abs=1e-15)


@given(qs)
def test_channel_invariants(q):
    ind, cor = ChannelSpec(q, IND), ChannelSpec(q, COR)
    e = cm_bit_error(ind)
    assert lm05_em_error(ind) == pytest.approx(2 * e * (1 - e), abs=1e-15)
    assert sdc_em_error(ind).total == pytest.approx(3 * (2 * q - q * q) / 4, abs=1e-15)
    assert sdc_em_error(ind).total <= 0.75 + 1e-15
    assert lm05_em_error(cor) == cm_bit_error(cor)


def test_errors_monotone_in_q():
    grid = np.linspace(0, 1, 501)
    for mode in (IND, COR):
        chans = [ChannelSpec(q, mode) for q in grid]
        for f in (cm_bit_error, lm05_em_error, lambda c: sdc_em_error(c).q1):
            vals = np.array([f(c) for c in chans])
            assert np.all(np.diff(vals) >= 0)


def test_channel_spec_validation():
    with pytest.raises(DomainError):
        ChannelSpec(-0.01)
    with pytest.raises(DomainError):
        ChannelSpec(0.1, "weird")
    assert ChannelSpec(0.1, "correlated").mode is COR
    assert ChannelSpec.from_qhalf(0.05).q == pytest.approx(0.1)
