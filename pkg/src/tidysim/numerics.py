"""Deterministic random streams and the t-distribution tail probability.

The generator is pinned and will not change across releases, because row
seeds stored in grids must replay to identical data forever:

* seed mixing: splitmix64 (increment ``0x9E3779B97F4A7C15``, mixers
  ``0xBF58476D1CE4E5B9`` / ``0x94D049BB133111EB``),
* stream: xoshiro256++ with its 256-bit state filled by four successive
  splitmix64 outputs of the seed,
* uniforms: top 53 bits mapped to the open interval (0, 1) via
  ``((word >> 11) + 0.5) * 2**-53``,
* normals: Box-Muller; ``normal(mean, sd, n)`` consumes ``2 * ceil(n / 2)``
  uniforms, each consecutive uniform pair yielding a (cosine, sine) normal
  pair, so draws split at even boundaries compose.

Each simulation row owns its own :class:`Rng`, so streams never depend on
scheduling, worker count, or global state.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import TidysimError

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_TWO_PI = 2.0 * math.pi
_U53 = 2.0 ** -53


def splitmix64(x: int) -> int:
    """One splitmix64 output for state ``x`` (wrapping 64-bit arithmetic)."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`splitmix64` over a uint64 array."""
    z = (x + np.uint64(_GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """xoshiro256++ stream seeded from a single 64-bit value."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        seed &= _MASK64
        self._state = (
            splitmix64(seed),
            splitmix64((seed + _GOLDEN) & _MASK64),
            splitmix64((seed + 2 * _GOLDEN) & _MASK64),
            splitmix64((seed + 3 * _GOLDEN) & _MASK64),
        )

    def next_uint64(self) -> int:
        s0, s1, s2, s3 = self._state
        x = (s0 + s3) & _MASK64
        out = (((x << 23) & _MASK64 | (x >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << 45) & _MASK64 | (s3 >> 19)
        self._state = (s0, s1, s2, s3)
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` uniforms on the open interval (0, 1)."""
        if n < 0:
            raise TidysimError(f"draw count must be >= 0, got {n}")
        s0, s1, s2, s3 = self._state
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            x = (s0 + s3) & _MASK64
            word = (((x << 23) & _MASK64 | (x >> 41)) + s0) & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = (s3 << 45) & _MASK64 | (s3 >> 19)
            out[i] = ((word >> 11) + 0.5) * _U53
        self._state = (s0, s1, s2, s3)
        return out

    def normal(self, mean: float, sd: float, n: int) -> np.ndarray:
        """``n`` i.i.d. draws from Normal(mean, sd^2), Box-Muller pairs."""
        if sd < 0:
            raise TidysimError(f"standard deviation must be >= 0, got {sd}")
        if n < 0:
            raise TidysimError(f"draw count must be >= 0, got {n}")
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        theta = _TWO_PI * u[1::2]
        z = np.empty(2 * pairs, dtype=np.float64)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return mean + sd * z[:n]


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T_df| >= |t|) via the regularized incomplete beta function."""
    if not math.isfinite(t):
        raise TidysimError(f"t statistic must be finite, got {t}")
    if df < 1:
        raise TidysimError(f"degrees of freedom must be >= 1, got {df}")
    x = df / (df + t * t)
    return float(special.betainc(df / 2.0, 0.5, x))


def t_tail_array(t: np.ndarray, df: int) -> np.ndarray:
    """Vectorized two-sided t tail; tolerates infinite t (-> 0)."""
    tt = np.asarray(t, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        x = df / (df + tt * tt)
    x = np.where(np.isinf(tt), 0.0, x)
    return special.betainc(df / 2.0, 0.5, x)
