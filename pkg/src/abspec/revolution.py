"""Profiles of rotationally symmetric surfaces, metric ``dr^2 + theta(r)^2 dt^2``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy import integrate, optimize

__all__ = [
    "RevolutionProfile",
    "ProfileGeometry",
    "euclidean",
    "spherical",
    "hyperbolic",
    "get_profile",
    "profile_geometry",
    "radius_for_area",
    "volume",
]

QUAD_RTOL = 1e-12
AREA_RTOL = 1e-12

ScalarFn = Callable[[float], float]


@numba.cfunc("float64(float64)", cache=True)
def _theta_flat(r):
    return r


@numba.cfunc("float64(float64)", cache=True)
def _theta_sphere(r):
    return math.sin(r)


@numba.cfunc("float64(float64)", cache=True)
def _theta_hyper(r):
    return math.sinh(r)


@dataclass(frozen=True)
class RevolutionProfile:
    """Density ``theta`` of a 2-D manifold of revolution and its derivatives.

    ``jit_theta`` is a numba-compiled copy of ``theta`` when one exists; the
    shooting solver uses it for speed and falls back to plain Python
    otherwise.
    """

    kind: str
    theta: ScalarFn
    theta1: ScalarFn
    theta2: ScalarFn
    diameter: float = math.inf
    jit_theta: object = field(default=None, repr=False, compare=False)

    @classmethod
    def custom(cls, theta, theta1, theta2, diameter=math.inf):
        return cls("custom", theta, theta1, theta2, float(diameter))

    def curvature(self, r: float) -> float:
        return -self.theta2(r) / self.theta(r)

    def check_r(self, R: float) -> None:
        if not (R > 0 and R < self.diameter):
            raise ValueError(f"radius {R} outside (0, {self.diameter}) for {self.kind} profile")


euclidean = RevolutionProfile(
    "euclidean", lambda r: r, lambda r: 1.0, lambda r: 0.0, math.inf, _theta_flat
)
spherical = RevolutionProfile(
    "spherical", math.sin, math.cos, lambda r: -math.sin(r), math.pi, _theta_sphere
)
hyperbolic = RevolutionProfile(
    "hyperbolic", math.sinh, math.cosh, math.sinh, math.inf, _theta_hyper
)

_BUILTIN = {p.kind: p for p in (euclidean, spherical, hyperbolic)}


def get_profile(name: str | RevolutionProfile) -> RevolutionProfile:
    if isinstance(name, RevolutionProfile):
        return name
    try:
        return _BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown geometry {name!r}; expected one of {sorted(_BUILTIN)}") from None


@dataclass(frozen=True)
class ProfileGeometry:
    volume: float
    curvature_at: Callable[[float], float]
    first_critical_radius: float


def volume(profile: RevolutionProfile, R: float) -> float:
    """Area of the geodesic disk ``B(x0, R)``, ``2 pi int_0^R theta``."""
    if not 0.0 <= R <= profile.diameter:
        raise ValueError(f"radius {R} outside [0, {profile.diameter}]")
    val, err = integrate.quad(profile.theta, 0.0, R, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    if not math.isfinite(val) or err > 1e3 * QUAD_RTOL * max(abs(val), 1e-300):
        raise ArithmeticError(f"volume quadrature did not converge (R={R}, err={err})")
    return 2.0 * math.pi * val


def first_critical_radius(profile: RevolutionProfile, scan_max: float = 50.0, step: float = 1e-2) -> float:
    """Smallest positive root of ``theta'``, or the diameter when there is none."""
    top = min(profile.diameter, scan_max)
    grid = np.arange(step, top, step)
    prev_r, prev = 0.0, profile.theta1(0.0)
    for r in grid:
        cur = profile.theta1(float(r))
        if cur == 0.0:
            return float(r)
        if prev * cur < 0:
            return optimize.brentq(profile.theta1, prev_r, float(r), xtol=1e-15, rtol=4 * np.finfo(float).eps)
        prev_r, prev = float(r), cur
    return profile.diameter


def profile_geometry(profile: RevolutionProfile, R: float) -> ProfileGeometry:
    profile = get_profile(profile)
    profile.check_r(R)
    return ProfileGeometry(
        volume=volume(profile, R),
        curvature_at=profile.curvature,
        first_critical_radius=first_critical_radius(profile),
    )


def radius_for_area(profile: RevolutionProfile, area: float) -> float:
    """Radius of the geodesic disk centred at the pole with the given area."""
    profile = get_profile(profile)
    if not area > 0:
        raise ValueError("area must be positive")
    if math.isfinite(profile.diameter):
        total = volume(profile, profile.diameter)
        if area >= total:
            raise ValueError(f"area {area} exceeds total volume {total} of the {profile.kind} surface")
        hi = profile.diameter
    else:
        hi = 1.0
        while volume(profile, hi) < area:
            hi *= 2.0
    R = optimize.brentq(lambda r: volume(profile, r) - area, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(volume(profile, R) - area) > AREA_RTOL * area:
        R = _bisect_area(profile, area, 0.0, hi)
    return R


def _bisect_area(profile, area, lo, hi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if volume(profile, mid) < area:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    return 0.5 * (lo + hi)
