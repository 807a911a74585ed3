"""Flux normalization.

Fluxes differing by an integer give unitarily equivalent operators, so every
solver in the package works with the canonical representative
``nu* = dist(nu, Z)`` in ``[0, 1/2]`` and maps angular labels back to the
caller's gauge at the end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["FluxData", "canonicalize_flux", "order_sequence", "INTEGER_TOL"]

INTEGER_TOL = 1e-12
# canonical values are snapped to this many decimals so that nu and nu + m
# produce bit-identical spectra
_SNAP_DIGITS = 12


@dataclass(frozen=True)
class FluxData:
    """A flux together with its canonical gauge representative.

    ``nu = base + sign * canonical`` up to rounding, which lets angular
    momenta computed in the canonical gauge (``k*``) be mapped back through
    ``k = base + sign * k*``.
    """

    nu: float
    canonical: float
    is_integer: bool
    base: int = 0
    sign: int = 1

    def original_k(self, k_canonical: int) -> int:
        return self.base + self.sign * k_canonical

    def canonical_k(self, k: int) -> int:
        return self.sign * (k - self.base)

    def order(self, k: int) -> float:
        """Frobenius index |k - nu| evaluated through the canonical gauge."""
        return abs(self.canonical_k(k) - self.canonical)


def canonicalize_flux(nu: float) -> FluxData:
    nu = float(nu)
    if not math.isfinite(nu):
        raise ValueError(f"flux must be finite, got {nu!r}")
    floor = math.floor(nu)
    frac = nu - floor
    if frac <= 0.5:
        base, sign, dist = floor, 1, frac
    else:
        base, sign, dist = floor + 1, -1, 1.0 - frac
    dist = round(dist, _SNAP_DIGITS)
    if dist < INTEGER_TOL:
        dist = 0.0
    if dist == 0.5:
        # two nearest integers; keep the lower one so that k = base comes first
        base, sign = floor, 1
    return FluxData(nu=nu, canonical=dist, is_integer=dist == 0.0, base=int(base), sign=sign)


def order_sequence(nu: float | FluxData, count: int) -> list[tuple[float, int]]:
    """The ``count`` smallest orders ``|k - nu|`` with their ``k``.

    Ties are broken by ``|k|``, then positive ``k`` first, in the caller's
    gauge.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    flux = nu if isinstance(nu, FluxData) else canonicalize_flux(nu)
    # in the canonical gauge the orders are |k* - c| for k* = 0, 1, -1, 2, -2, ...
    half = count // 2 + 2
    candidates = []
    for ks in range(-half, half + 2):
        k = flux.original_k(ks)
        candidates.append((abs(ks - flux.canonical), abs(k), -k))
    candidates.sort()
    return [(mu, -negk) for mu, _, negk in candidates[:count]]
