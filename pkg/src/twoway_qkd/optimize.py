"""Control-mode size optimisation, parameter sweeps and threshold search."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelMode, ChannelSpec
from .errors import DomainError, InfeasibleAllocationError, NoCrossoverError, NoPositiveRateError
from .keyrate import (
    ALL_PROTOCOLS,
    KeyLengthBreakdown,
    Protocol,
    SecurityParams,
    _budget,
    _counts,
    allocate,
    asymptotic_efficiency,
    final_length,
    key_length,
    max_feasible_k,
)

MIN_SIGNALS = 16
COARSE_FACTOR = 1.2
ROOT_TOL = 1e-5
# rounding of n and of sqrt(n k) moves the budget by well under this many bits
_PLATEAU_MARGIN = 2.0
QHALF_MAX = 0.5


@dataclass(frozen=True)
class OptimumReport:
    k_star: int
    breakdown: KeyLengthBreakdown
    scan_trace: list[tuple[int, int]] | None = None

    @property
    def L(self) -> int:
        return self.breakdown.L

    @property
    def efficiency(self) -> float:
        return self.breakdown.efficiency


def budget_over_k(M: int, ks, ch: ChannelSpec, sec: SecurityParams, p: Protocol) -> np.ndarray:
    """Unfloored key budget for every control size in ``ks``."""
    ks = np.asarray(ks, dtype=float)
    n, n_e = _counts(M, ks, p)
    raw, pa, ec = _budget(p, n, ks, n_e, ch, sec)
    return raw - pa - ec - sec.const_term


def _coarse_grid(kmax: int) -> np.ndarray:
    pts = [1]
    while pts[-1] < kmax:
        pts.append(min(kmax, max(pts[-1] + 1, int(math.floor(pts[-1] * COARSE_FACTOR)))))
    return np.asarray(pts, dtype=np.int64)


def optimize_k(M: int, ch: ChannelSpec, sec: SecurityParams = SecurityParams(),
               p: Protocol = Protocol.LM05, trace: bool = False) -> OptimumReport:
    """Integer ``k`` in ``[1, (sqrt(M) - 1)**2]`` maximising the final key length.

    A geometric scan locates the peak of the smooth budget; the neighbourhood is
    then scanned exhaustively and widened until the budget falls clearly below
    the best integer length on both sides. Ties go to the smaller ``k``.
    """
    p = Protocol.parse(p)
    M = int(M)
    if M < MIN_SIGNALS:
        raise InfeasibleAllocationError(f"M={M} is below the minimum of {MIN_SIGNALS} signals")
    kmax = max_feasible_k(M)

    coarse = _coarse_grid(kmax)
    cb = budget_over_k(M, coarse, ch, sec, p)
    i = int(np.argmax(cb))
    lo = int(coarse[max(i - 1, 0)])
    hi = int(coarse[min(i + 1, len(coarse) - 1)])

    ks = np.arange(lo, hi + 1)
    b = budget_over_k(M, ks, ch, sec, p)
    scanned_k = [ks]
    scanned_b = [b]
    best = float(final_length(b.max()))
    chunk = max(64, hi - lo + 1)

    left = lo
    while left > 1:
        new_left = max(1, left - chunk)
        seg = np.arange(new_left, left)
        sb = budget_over_k(M, seg, ch, sec, p)
        scanned_k.insert(0, seg)
        scanned_b.insert(0, sb)
        best = max(best, float(final_length(sb.max())))
        left = new_left
        if sb.max() < best - _PLATEAU_MARGIN:
            break
    right = hi
    while right < kmax:
        new_right = min(kmax, right + chunk)
        seg = np.arange(right + 1, new_right + 1)
        sb = budget_over_k(M, seg, ch, sec, p)
        scanned_k.append(seg)
        scanned_b.append(sb)
        best = max(best, float(final_length(sb.max())))
        right = new_right
        if sb.max() < best - _PLATEAU_MARGIN:
            break

    all_k = np.concatenate(scanned_k)
    all_L = final_length(np.concatenate(scanned_b))
    if all_L.max() <= 0:
        k_star = 1
    else:
        k_star = int(all_k[int(np.argmax(all_L))])

    breakdown = key_length(allocate(M, k_star, p), ch, sec)
    scan = None
    if trace:
        order = np.argsort(all_k)
        scan = [(int(k), int(L)) for k, L in zip(all_k[order], all_L[order])]
    return OptimumReport(k_star, breakdown, scan)


def optimized_efficiency(p: Protocol, M, ch: ChannelSpec,
                         sec: SecurityParams = SecurityParams()) -> float:
    """Efficiency at the optimal ``k``; ``M=None`` or ``inf`` gives the infinite-key value."""
    if M is None or (isinstance(M, float) and math.isinf(M)):
        return asymptotic_efficiency(p, ch)
    return optimize_k(int(M), ch, sec, p).efficiency


class Axis(enum.Enum):
    ERROR_RATE = "error"
    BLOCK_SIZE = "blocks"


@dataclass(frozen=True)
class Grid:
    min: float
    max: float
    points: int
    log: bool = False

    def __post_init__(self):
        if not self.min < self.max:
            raise DomainError(f"grid min {self.min} must be below max {self.max}")
        if self.points < 2:
            raise DomainError("grid needs at least 2 points")
        if self.log and self.min <= 0:
            raise DomainError("logarithmic grid needs min > 0")

    @classmethod
    def parse(cls, text: str, log: bool = False) -> "Grid":
        """Parse ``min:max:points``."""
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError(f"grid {text!r} is not of the form min:max:points")
        return cls(float(parts[0]), float(parts[1]), int(float(parts[2])), log)

    def values(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class SweepSpec:
    """One figure's worth of curves.

    ``fixed`` is the block size ``M`` for an error-rate sweep and the per-path
    error ``q/2`` for a block-size sweep.
    """

    axis: Axis
    grid: Grid
    fixed: float
    protocols: tuple[Protocol, ...] = ALL_PROTOCOLS
    mode: ChannelMode = ChannelMode.INDEPENDENT
    sec: SecurityParams = field(default_factory=SecurityParams)


@dataclass
class SweepRow:
    qhalf: float
    M: int
    efficiency: dict[Protocol, float | None]
    L: dict[Protocol, int | None]
    k_star: dict[Protocol, int | None]
    asymptotic: dict[Protocol, float]


def _sweep_point(args) -> SweepRow:
    qhalf, M, protocols, mode, sec = args
    ch = ChannelSpec.from_qhalf(qhalf, mode)
    eff, Ls, ks, asym = {}, {}, {}, {}
    for p in protocols:
        asym[p] = asymptotic_efficiency(p, ch)
        try:
            rep = optimize_k(M, ch, sec, p)
        except DomainError:
            eff[p] = Ls[p] = ks[p] = None
            continue
        eff[p], Ls[p], ks[p] = rep.efficiency, rep.L, rep.k_star
    return SweepRow(qhalf, M, eff, Ls, ks, asym)


def sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """Optimised efficiency of every protocol at every grid point, in axis order."""
    values = spec.grid.values()
    if spec.axis is Axis.ERROR_RATE:
        M = int(round(spec.fixed))
        tasks = [(float(v), M, spec.protocols, spec.mode, spec.sec) for v in values]
    else:
        tasks = [(float(spec.fixed), int(round(v)), spec.protocols, spec.mode, spec.sec)
                 for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]


def _alive(p, M, mode, sec, qhalf) -> bool:
    ch = ChannelSpec.from_qhalf(qhalf, mode)
    return optimized_efficiency(p, M, ch, sec) > 0.0


def zero_threshold(p: Protocol, M, ch: ChannelSpec | ChannelMode = ChannelMode.INDEPENDENT,
                   sec: SecurityParams = SecurityParams(), tol: float = ROOT_TOL) -> float:
    """Largest per-path error ``q/2`` at which the optimised key is still positive.

    Only the channel mode of ``ch`` is used. ``M=None`` selects the infinite-key limit.
    """
    p = Protocol.parse(p)
    mode = ch.mode if isinstance(ch, ChannelSpec) else ChannelMode.parse(ch)
    lo, hi = 0.0, QHALF_MAX
    if not _alive(p, M, mode, sec, lo):
        raise NoPositiveRateError(f"{p.value} produces no key at M={M} even without noise")
    if _alive(p, M, mode, sec, hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _alive(p, M, mode, sec, mid):
            lo = mid
        else:
            hi = mid
    return lo


def crossover(pA: Protocol, pB: Protocol, M, ch: ChannelSpec | ChannelMode = ChannelMode.INDEPENDENT,
              sec: SecurityParams = SecurityParams(), bracket: tuple[float, float] | None = None,
              scan_points: int = 101, tol: float = ROOT_TOL) -> float:
    """Per-path error ``q/2`` where the optimised efficiencies of ``pA`` and ``pB`` cross.

    Without an explicit bracket the first sign change of ``eff_A - eff_B`` on a
    uniform scan of ``[0, 1/2]`` is refined by bisection. Each protocol gets its
    own optimal ``k`` at every point.
    """
    pA, pB = Protocol.parse(pA), Protocol.parse(pB)
    mode = ch.mode if isinstance(ch, ChannelSpec) else ChannelMode.parse(ch)

    def diff(qh):
        c = ChannelSpec.from_qhalf(qh, mode)
        return optimized_efficiency(pA, M, c, sec) - optimized_efficiency(pB, M, c, sec)

    if bracket is not None:
        lo, hi = bracket
        dlo, dhi = diff(lo), diff(hi)
        if dlo == 0.0:
            return lo
        if dhi == 0.0:
            return hi
        if np.sign(dlo) == np.sign(dhi):
            raise NoCrossoverError(f"{pA.value} - {pB.value} keeps its sign on [{lo}, {hi}]")
    else:
        grid = np.linspace(0.0, QHALF_MAX, scan_points)
        lo = hi = None
        s0 = 0.0
        prev = None
        for qh in grid:
            d = diff(float(qh))
            s = np.sign(d)
            if s == 0:
                continue
            if s0 == 0:
                s0 = s
            elif s != s0:
                lo, hi = prev, float(qh)
                break
            prev = float(qh)
        if lo is None:
            raise NoCrossoverError(f"no crossover between {pA.value} and {pB.value} at M={M}")
        dlo = diff(lo)

    slo = np.sign(dlo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        d = diff(mid)
        if d == 0.0:
            return mid
        if np.sign(d) == slo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
