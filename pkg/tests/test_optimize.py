import math

import numpy as np
import pytest

from twoway_qkd.channel import ChannelMode, ChannelSpec
from twoway_qkd.errors import InfeasibleAllocationError, NoCrossoverError, NoPositiveRateError
from twoway_qkd.keyrate import ALL_PROTOCOLS, Protocol, SecurityParams, asymptotic_efficiency
from twoway_qkd.optimize import (
    Axis,
    Grid,
    SweepSpec,
    crossover,
    optimize_k,
    optimized_efficiency,
    sweep,
    zero_threshold,
)

from oracles import brute_force_argmax, h2 as _h2

IND, COR = ChannelMode.INDEPENDENT, ChannelMode.CORRELATED
SEC = SecurityParams()


@pytest.mark.parametrize("M,qhalf,mode,proto", [
    (10**4, 0.01, IND, Protocol.BB84),
    (10**4, 0.01, IND, Protocol.LM05),
    (10**4, 0.02, COR, Protocol.SDC),
    (2500, 0.0, IND, Protocol.LM05),
    (30000, 0.03, IND, Protocol.SDC),
])
def test_optimize_matches_brute_force(M, qhalf, mode, proto):
    ch = ChannelSpec.from_qhalf(qhalf, mode)
    rep = optimize_k(M, ch, SEC, proto)
    assert (rep.k_star, rep.L) == brute_force_argmax(M, 2 * qhalf, mode, proto)


def test_dead_protocol_reports_zero():
    rep = optimize_k(10**4, ChannelSpec.from_qhalf(0.2), SEC, Protocol.LM05)
    assert rep.L == 0 and rep.k_star == 1 and rep.efficiency == 0.0


def test_minimum_block():
    with pytest.raises(InfeasibleAllocationError):
        optimize_k(15, ChannelSpec(0.0), SEC, Protocol.BB84)
    assert optimize_k(16, ChannelSpec(0.0), SEC, Protocol.BB84).L == 0


def test_trace_covers_argmax():
    rep = optimize_k(5000, ChannelSpec.from_qhalf(0.01), SEC, Protocol.BB84, trace=True)
    ks = [k for k, _ in rep.scan_trace]
    assert ks == sorted(ks)
    assert max(L for _, L in rep.scan_trace) == rep.L
    assert all(L <= rep.L for _, L in rep.scan_trace)


def test_optimal_k_grows_sublinearly():
    ch = ChannelSpec.from_qhalf(0.01)
    ks = [(M, optimize_k(M, ch, SEC, Protocol.BB84).k_star) for M in (10**4, 10**6, 10**8, 10**10)]
    ratios = [k / M for M, k in ks]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    assert all(b[1] > a[1] for a, b in zip(ks, ks[1:]))


def test_error_sweep_fig1_shape():
    spec = SweepSpec(Axis.ERROR_RATE, Grid(0.0, 0.12, 25), 10**4, ALL_PROTOCOLS, IND)
    rows = sweep(spec)
    assert [r.qhalf for r in rows] == sorted(r.qhalf for r in rows)
    for r in rows:
        if r.qhalf <= 0.02:
            assert r.efficiency[Protocol.LM05] > r.efficiency[Protocol.BB84]
        if 0.03 <= r.qhalf <= 0.045:
            assert r.efficiency[Protocol.BB84] > r.efficiency[Protocol.LM05]
    assert all(r.efficiency[p] < 1 for r in rows for p in ALL_PROTOCOLS)
    q0 = rows[0]
    assert q0.qhalf == 0.0 and all(0 < q0.efficiency[p] < 1 for p in ALL_PROTOCOLS)


def test_block_sweep_converges_upward():
    spec = SweepSpec(Axis.BLOCK_SIZE, Grid(1e4, 1e7, 7, log=True), 0.01, ALL_PROTOCOLS, IND)
    rows = sweep(spec)
    for p in ALL_PROTOCOLS:
        effs = [r.efficiency[p] for r in rows]
        assert all(b > a for a, b in zip(effs, effs[1:]))
        assert all(e < rows[0].asymptotic[p] for e in effs)


def test_sweep_infeasible_cells_are_empty():
    rows = sweep(SweepSpec(Axis.BLOCK_SIZE, Grid(4, 100, 3), 0.01, (Protocol.BB84,), IND))
    assert rows[0].efficiency[Protocol.BB84] is None
    assert rows[-1].efficiency[Protocol.BB84] == 0.0


def test_sweep_independent_of_workers():
    spec = SweepSpec(Axis.ERROR_RATE, Grid(0.0, 0.05, 6), 20000, ALL_PROTOCOLS, COR)
    assert sweep(spec, workers=1) == sweep(spec, workers=2)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1.0, 1.0, 3)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 3, log=True)
    g = Grid.parse("0:0.12:121")
    assert len(g.values()) == 121 and g.values()[-1] == pytest.approx(0.12)


def test_lm05_beats_both_somewhere_at_small_blocks():
    rows = sweep(SweepSpec(Axis.ERROR_RATE, Grid(0.0, 0.03, 7), 10**4, ALL_PROTOCOLS, IND))
    assert any(r.efficiency[Protocol.LM05] > max(r.efficiency[Protocol.BB84], r.efficiency[Protocol.SDC])
               for r in rows)


def test_asymptotic_bb84_threshold():
    t = zero_threshold(Protocol.BB84, None, IND)
    assert t == pytest.approx(0.1100, abs=5e-4)
    assert 1 - 2 * _h2(t) > 0 > 1 - 2 * _h2(t + 2e-5)


def test_finite_threshold_below_infinite():
    for p in ALL_PROTOCOLS:
        assert zero_threshold(p, 10**5, IND) < zero_threshold(p, None, IND)


def test_correlated_lm05_threshold_matches_bb84():
    assert zero_threshold(Protocol.LM05, None, COR) == zero_threshold(Protocol.BB84, None, COR)


def test_threshold_dead_at_zero():
    with pytest.raises(NoPositiveRateError):
        zero_threshold(Protocol.BB84, 50, IND)


def test_threshold_is_reproducible():
    ch = ChannelSpec(0.0, IND)
    assert zero_threshold(Protocol.SDC, 10**5, ch) == zero_threshold(Protocol.SDC, 10**5, ch)


def test_crossover_small_block():
    x = crossover(Protocol.LM05, Protocol.BB84, 10**4, IND)
    assert x == pytest.approx(0.027, abs=0.005)
    lo = ChannelSpec.from_qhalf(x - 2e-3)
    hi = ChannelSpec.from_qhalf(x + 2e-3)
    assert optimized_efficiency(Protocol.LM05, 10**4, lo) > optimized_efficiency(Protocol.BB84, 10**4, lo)
    assert optimized_efficiency(Protocol.LM05, 10**4, hi) < optimized_efficiency(Protocol.BB84, 10**4, hi)


def test_crossover_with_bracket():
    x = crossover(Protocol.LM05, Protocol.BB84, 10**4, IND, bracket=(0.0, 0.03))
    assert x == pytest.approx(crossover(Protocol.LM05, Protocol.BB84, 10**4, IND), abs=2e-5)


def test_no_crossover():
    with pytest.raises(NoCrossoverError):
        crossover(Protocol.SDC, Protocol.BB84, None, COR)
    with pytest.raises(NoCrossoverError):
        crossover(Protocol.LM05, Protocol.BB84, 10**4, IND, bracket=(0.0, 0.01))


def test_asymptotic_optimized_efficiency():
    ch = ChannelSpec.from_qhalf(0.02, COR)
    assert optimized_efficiency(Protocol.SDC, None, ch) == asymptotic_efficiency(Protocol.SDC, ch)
    assert optimized_efficiency(Protocol.SDC, math.inf, ch) == asymptotic_efficiency(Protocol.SDC, ch)
