"""Shannon entropies and the finite-size fluctuation term.

All functions work on plain floats and, where noted, on numpy arrays so that the
optimizer can evaluate whole ranges of block sizes at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

LN2 = math.log(2.0)
_TINY = 1e-300
_SUM_SLACK = 1e-12


def _xlnx(p):
    # 0 * ln 0 := 0; anything below _TINY is treated as exactly zero.
    p = np.asarray(p, dtype=float)
    safe = np.where(p < _TINY, 1.0, p)
    return np.where(p < _TINY, 0.0, p * np.log(safe))


@dataclass(frozen=True)
class PauliErrorTriple:
    """Probabilities of the three non-trivial errors on a quaternary symbol.

    For a symbol carried by two noisy paths, ``q1`` and ``q2`` are the
    probabilities of an error on exactly one of the bits and ``q3`` of an error
    on both. Read as a Pauli frame, they are the frequencies of X, Y and Z.
    """

    q1: float
    q2: float
    q3: float

    def __post_init__(self):
        for name in ("q1", "q2", "q3"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise DomainError(f"{name}={v!r} is not a probability")
        if self.total > 1.0 + _SUM_SLACK:
            raise DomainError(f"q1 + q2 + q3 = {self.total!r} exceeds 1")

    @classmethod
    def symmetric(cls, x: float) -> "PauliErrorTriple":
        """The triple ``(x, x, x)``."""
        return cls(x, x, x)

    @property
    def total(self) -> float:
        return self.q1 + self.q2 + self.q3

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.q1, self.q2, self.q3)

    def distribution(self) -> tuple[float, float, float, float]:
        """Full four-outcome distribution, no-error probability last."""
        return (self.q1, self.q2, self.q3, max(0.0, 1.0 - self.total))


def _check_probability(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"probability outside [0, 1]: {p!r}")
    return arr


def binary_entropy(p):
    """Binary Shannon entropy in bits.

    Accepts a scalar or an array; returns the same shape (a float for scalars).

    Raises:
        DomainError: if any entry lies outside [0, 1].
    """
    arr = _check_probability(p)
    h = -(_xlnx(arr) + _xlnx(1.0 - arr)) / LN2
    h = np.clip(h, 0.0, 1.0)
    return float(h) if h.ndim == 0 else h


def quaternary_entropy(t: PauliErrorTriple) -> float:
    """Shannon entropy in bits of ``(q1, q2, q3, 1 - q1 - q2 - q3)``."""
    if not isinstance(t, PauliErrorTriple):
        t = PauliErrorTriple(*t)
    dist = np.asarray(t.distribution())
    return float(np.clip(-np.sum(_xlnx(dist)) / LN2, 0.0, 2.0))


def mu(n, k, eps_s: float):
    """Statistical fluctuation of the control-mode error estimate.

    ``sqrt((n + k) / (n k) * (k + 1) / k * ln(2 / eps_s))`` where ``n`` is the
    size of the string being bounded and ``k`` the number of control bits.
    Vectorized over ``n`` and ``k``.
    """
    if not (0.0 < eps_s < 1.0):
        raise DomainError(f"eps_s={eps_s!r} must lie in (0, 1)")
    n_arr = np.asarray(n, dtype=float)
    k_arr = np.asarray(k, dtype=float)
    if np.any(n_arr < 1) or np.any(k_arr < 1):
        raise DomainError("mu requires n >= 1 and k >= 1")
    val = np.sqrt((n_arr + k_arr) / (n_arr * k_arr) * (k_arr + 1.0) / k_arr
                  * math.log(2.0 / eps_s))
    return float(val) if val.ndim == 0 else val
