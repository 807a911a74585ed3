"""Bessel functions of fractional order and the zeros of ``J'_mu``.

Values come from ``scipy.special``; the zero finder is local because scipy
only tabulates derivative zeros for integer orders.
"""
from __future__ import annotations

import functools
import math

import numpy as np
from scipy import special

__all__ = [
    "bessel_j",
    "bessel_j_deriv",
    "bessel_zero",
    "bessel_deriv_zero",
    "bessel_deriv_zeros",
]

ZERO_ATOL = 1e-11


def _check(mu, x):
    if np.any(np.asarray(mu) < 0):
        raise ValueError("Bessel order must be non-negative")
    if np.any(np.asarray(x) < 0):
        raise ValueError("Bessel argument must be non-negative")


def bessel_j(mu, x):
    _check(mu, x)
    return special.jv(mu, x)


def bessel_j_deriv(mu, x):
    """``J'_mu(x)``; for ``mu = 0`` this is ``-J_1``."""
    _check(mu, x)
    return special.jvp(mu, x, 1)


def _second_deriv(mu, x):
    # Bessel equation: x^2 J'' + x J' + (x^2 - mu^2) J = 0
    return -bessel_j_deriv(mu, x) / x - (1.0 - mu * mu / (x * x)) * bessel_j(mu, x)


def _polish(f, df, a, b, fa, atol):
    """Newton iteration kept inside the sign-change bracket ``[a, b]``."""
    x = 0.5 * (a + b)
    for _ in range(200):
        fx = float(f(x))
        if fx == 0.0:
            return x
        if (fx < 0) == (fa < 0):
            a, fa = x, fx
        else:
            b = x
        d = float(df(x))
        step_ok = False
        if d != 0.0:
            xn = x - fx / d
            if a < xn < b:
                step_ok = True
        if not step_ok:
            xn = 0.5 * (a + b)
        if abs(xn - x) <= 0.1 * atol or b - a <= atol:
            return xn
        x = xn
    return x


def _scan_roots(f, df, count, step, start, atol, estimate):
    """Bracket sign changes of ``f`` on a uniform grid, then polish each."""
    roots: list[float] = []
    limit = estimate + 20.0 * step + 10.0
    lo = start
    while len(roots) < count:
        hi = min(lo + 4096 * step, limit + step)
        grid = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
        vals = f(grid)
        for i in np.flatnonzero(vals[:-1] * vals[1:] <= 0):
            if vals[i] == 0.0:
                if not roots or grid[i] > roots[-1]:
                    roots.append(float(grid[i]))
            elif vals[i + 1] != 0.0:
                roots.append(float(_polish(f, df, grid[i], grid[i + 1], vals[i], atol)))
            if len(roots) == count:
                break
        lo = float(grid[-1])
        if len(roots) < count and lo > limit:
            raise RuntimeError(
                f"no sign change found past x={lo:.3f} (estimate {estimate:.3f}); zero bracketing failed"
            )
    return roots


def _mcmahon(mu, j, deriv):
    # leading-order large-zero estimate, used only to bound the scan
    shift = 0.75 if deriv else 0.25
    return (j + 0.5 * mu - shift) * math.pi + max(mu, 1.0)


@functools.lru_cache(maxsize=4096)
def bessel_deriv_zeros(mu: float, count: int) -> tuple[float, ...]:
    """First ``count`` positive zeros ``z'_{mu,1} < z'_{mu,2} < ...`` of ``J'_mu``."""
    mu = float(mu)
    if not mu > 0:
        raise ValueError("order must be positive (J'_0 = -J_1 has its own zeros)")
    step = min(0.1, mu / 4.0)
    return tuple(
        float(z)
        for z in _scan_roots(
            lambda x: bessel_j_deriv(mu, x),
            lambda x: _second_deriv(mu, x),
            count,
            step,
            step,
            ZERO_ATOL * 1e-2,
            _mcmahon(mu, count, True),
        )
    )


def _bucket(j: int) -> int:
    # share cached scans between nearby indices
    return max(8, 1 << (int(j) - 1).bit_length())


def bessel_deriv_zero(mu: float, j: int) -> float:
    if j < 1:
        raise ValueError("zero index j must be >= 1")
    return bessel_deriv_zeros(float(mu), _bucket(j))[j - 1]


@functools.lru_cache(maxsize=4096)
def _bessel_zeros(mu: float, count: int) -> tuple[float, ...]:
    step = min(0.1, max(mu, 0.4) / 4.0)
    return tuple(
        float(z)
        for z in _scan_roots(
            lambda x: bessel_j(mu, x),
            lambda x: bessel_j_deriv(mu, x),
            count,
            step,
            step,
            ZERO_ATOL * 1e-2,
            _mcmahon(mu, count, False),
        )
    )


def bessel_zero(mu: float, j: int) -> float:
    """j-th positive zero of ``J_mu``."""
    if mu < 0:
        raise ValueError("order must be non-negative")
    if j < 1:
        raise ValueError("zero index j must be >= 1")
    return _bessel_zeros(float(mu), _bucket(j))[j - 1]
