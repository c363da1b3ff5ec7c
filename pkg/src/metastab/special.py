"""Digamma and trigamma for positive real arguments (vectorized).

Both use upward recurrence until the argument reaches ``_SHIFT`` and then
the asymptotic expansion in Bernoulli numbers.
"""

from __future__ import annotations

import numpy as np

_SHIFT = 6.0

# B_2k for k = 1..10
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
)


def _check_positive(x: np.ndarray, name: str) -> None:
    if np.any(~(x > 0)):
        raise ValueError(f"{name} is only defined here for x > 0")


def digamma(x):
    """psi(x) = d/dx log Gamma(x), x > 0."""
    x = np.asarray(x, dtype=np.float64)
    _check_positive(x, "digamma")
    x = x.copy()
    acc = np.zeros_like(x)
    # psi(x) = psi(x + 1) - 1/x
    while True:
        small = x < _SHIFT
        if not np.any(small):
            break
        acc = np.where(small, acc - 1.0 / np.where(small, x, 1.0), acc)
        x = np.where(small, x + 1.0, x)
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    power = inv2.copy()
    for k, b in enumerate(_BERNOULLI, start=1):
        series += b / (2 * k) * power
        power *= inv2
    out = acc + np.log(x) - 0.5 / x - series
    return out[()] if out.ndim == 0 else out


def trigamma(x):
    """psi'(x), x > 0."""
    x = np.asarray(x, dtype=np.float64)
    _check_positive(x, "trigamma")
    x = x.copy()
    acc = np.zeros_like(x)
    # psi1(x) = psi1(x + 1) + 1/x^2
    while True:
        small = x < _SHIFT
        if not np.any(small):
            break
        xs = np.where(small, x, 1.0)
        acc = np.where(small, acc + 1.0 / (xs * xs), acc)
        x = np.where(small, x + 1.0, x)
    inv = 1.0 / x
    inv2 = inv * inv
    series = np.zeros_like(x)
    power = inv2 * inv  # x^-(2k+1)
    for b in _BERNOULLI:
        series += b * power
        power *= inv2
    out = acc + inv + 0.5 * inv2 + series
    return out[()] if out.ndim == 0 else out
