"""Numerical checks of the monotonicity facts behind the isoperimetric bounds.

All checks work with the canonical flux ``nu*`` and the ground mode
``(k = 0, j = 1)`` of the geodesic disk ``B(x0, R)``.  Monotonicity is
tested by forward differences on a uniform grid with a tolerance relative to
the sampled function's range.
"""
from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .gauge import canonicalize_flux
from .radial_spectra import _RadialProblem, ground_state
from .revolution import RevolutionProfile, first_critical_radius, get_profile

__all__ = [
    "MonotonicityReport",
    "HardyTestFunction",
    "check_F_monotone",
    "check_q_monotone",
    "check_eigenfunction_shape",
    "lambda_R_monotone",
    "sufficient_conditions",
    "hardy_check",
    "critical_eigenvalue",
    "MONOTONE_RTOL",
    "DERIVATIVE_RTOL",
]

GRID_SIZE = 512
MONOTONE_RTOL = 1e-8
DERIVATIVE_RTOL = 1e-4
# relative step of the central difference in lambda_R_monotone
FD_STEP = 1e-3
# pointwise identities such as the sphere form vanish identically; allow
# rounding relative to the size of the individual terms
ROUNDING_RTOL = 1e-12


@dataclass
class MonotonicityReport:
    """Samples of a function claimed to be non-increasing.

    ``max_forward_difference`` is the largest ``f(r_{i+1}) - f(r_i)``;
    ``violations`` lists the left radii where it exceeds ``tolerance``.
    """

    quantity: str
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    max_forward_difference: float
    tolerance: float
    violations: list[float]
    lam: float = math.nan

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "lambda": self.lam,
            "max_forward_difference": self.max_forward_difference,
            "tolerance": self.tolerance,
            "violations": self.violations,
            "holds": self.holds,
            "grid_size": int(self.grid.size),
        }


def _flux_star(nu) -> float:
    c = canonicalize_flux(nu).canonical
    if c == 0.0:
        raise ValueError("the monotonicity results need a non-integer flux")
    return c


def _check_radius(profile: RevolutionProfile, R: float) -> float:
    profile.check_r(R)
    rbar = first_critical_radius(profile)
    if R > rbar * (1 + 1e-12):
        raise ValueError(f"R={R} exceeds the first critical radius {rbar}; the hypotheses are void")
    return rbar


def _interior_grid(R: float, n: int) -> np.ndarray:
    delta = R / (10 * n)
    return np.linspace(delta, R - delta, n)


def _non_increasing(quantity, grid, values, lam, rtol=MONOTONE_RTOL) -> MonotonicityReport:
    diffs = np.diff(values)
    span = float(np.max(values) - np.min(values))
    tol = rtol * (span if span > 0 else float(np.max(np.abs(values))))
    bad = np.flatnonzero(diffs > tol)
    return MonotonicityReport(
        quantity=quantity,
        grid=grid,
        values=values,
        max_forward_difference=float(diffs.max()) if diffs.size else 0.0,
        tolerance=tol,
        violations=[float(grid[i]) for i in bad],
        lam=lam,
    )


def check_F_monotone(profile, nu, R: float, grid_size: int = GRID_SIZE) -> MonotonicityReport:
    """``F = u'^2 + nu^2 u^2 / theta^2`` along the ground mode is non-increasing."""
    profile = get_profile(profile)
    c = _flux_star(nu)
    _check_radius(profile, R)
    grid = _interior_grid(R, grid_size)
    mode = ground_state(profile, c, R, radii=grid)
    th = np.array([profile.theta(float(r)) for r in grid])
    F = mode.du**2 + c * c * mode.u**2 / th**2
    return _non_increasing("F", grid, F, mode.value)


def check_q_monotone(profile, nu, R: float, grid_size: int = GRID_SIZE) -> MonotonicityReport:
    """``q = theta u'/u`` is decreasing and starts from ``q(0+) = nu``.

    A violation is also recorded at the first grid radius if ``q`` exceeds
    ``nu`` there.
    """
    profile = get_profile(profile)
    c = _flux_star(nu)
    _check_radius(profile, R)
    grid = _interior_grid(R, grid_size)
    mode = ground_state(profile, c, R, radii=grid)
    th = np.array([profile.theta(float(r)) for r in grid])
    q = th * mode.du / mode.u
    rep = _non_increasing("q", grid, q, mode.value)
    if q[0] > c * (1 + MONOTONE_RTOL):
        rep.violations.insert(0, float(grid[0]))
    return rep


@dataclass(frozen=True)
class ShapeReport:
    u_positive: bool
    u_increasing: bool
    lambda_exceeds: bool
    lam: float
    bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def check_eigenfunction_shape(profile, nu, R: float, grid_size: int = GRID_SIZE) -> ShapeReport:
    """``u > 0``, ``u' > 0`` inside ``(0, R)`` and ``lam > nu^2 / theta(R)^2``."""
    profile = get_profile(profile)
    c = _flux_star(nu)
    _check_radius(profile, R)
    grid = _interior_grid(R, grid_size)
    mode = ground_state(profile, c, R, radii=grid)
    bound = c * c / profile.theta(R) ** 2
    return ShapeReport(
        u_positive=bool(np.all(mode.u > 0)),
        u_increasing=bool(np.all(mode.du > 0)),
        lambda_exceeds=bool(mode.value > bound),
        lam=mode.value,
        bound=bound,
    )


@dataclass
class LambdaSweep:
    R: list[float]
    lam: list[float]
    decreasing: bool
    # per interior grid point: (finite difference, formula, relative gap)
    derivative_checks: list[tuple[float, float, float]]
    derivative_ok: bool

    @property
    def holds(self) -> bool:
        return self.decreasing and self.derivative_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds
        return d


def _lam_and_derivative(profile, c, R):
    """``lam(R)`` and the Hadamard-type formula for ``d lam / dR``."""
    mode = ground_state(profile, c, R, radii=np.array([R]))
    thR = profile.theta(R)
    # u is normalized, so the denominator int u^2 theta is 1
    deriv = (c * c / thR**2 - mode.value) * mode.u[-1] ** 2 * thR
    return mode.value, deriv


def _lam(profile, c, R):
    prob = _RadialProblem(profile, c, R)
    return next(prob.eigenvalues())


def lambda_R_monotone(profile, nu, R_grid: Sequence[float]) -> LambdaSweep:
    """Strict decrease of ``lam_1(B(x0, R))`` in ``R`` and its derivative formula."""
    profile = get_profile(profile)
    c = _flux_star(nu)
    R_grid = [float(r) for r in R_grid]
    if len(R_grid) < 2 or any(b <= a for a, b in zip(R_grid, R_grid[1:])):
        raise ValueError("R_grid must be ascending with at least two points")
    for R in R_grid:
        _check_radius(profile, R)
    lams, derivs = zip(*(_lam_and_derivative(profile, c, R) for R in R_grid))
    checks = []
    for R, d in zip(R_grid[1:-1], derivs[1:-1]):
        h = FD_STEP * R
        fd = (_lam(profile, c, R + h) - _lam(profile, c, R - h)) / (2 * h)
        checks.append((fd, d, abs(fd - d) / abs(d)))
    return LambdaSweep(
        R=R_grid,
        lam=list(lams),
        decreasing=all(b < a for a, b in zip(lams, lams[1:])),
        derivative_checks=checks,
        derivative_ok=all(gap <= DERIVATIVE_RTOL for _, _, gap in checks),
    )


@functools.lru_cache(maxsize=64)
def critical_eigenvalue(profile: RevolutionProfile, nu_star: float) -> float | None:
    """``lam_bar = lam_1(B(x0, R_bar))``, or ``None`` when ``R_bar`` is infinite."""
    rbar = first_critical_radius(profile)
    if not math.isfinite(rbar):
        return None
    return _lam(profile, nu_star, rbar)


@dataclass(frozen=True)
class ConditionReport:
    cond_a: bool
    cond_a_margin: float
    cond_b: bool | None
    cond_b_margin: float | None
    lambda_bar: float | None
    sphere_form: bool
    sphere_form_margin: float

    def to_dict(self) -> dict:
        return asdict(self)


def _min_with_rounding(terms: np.ndarray) -> tuple[bool, float]:
    total = terms.sum(axis=0)
    slack = ROUNDING_RTOL * np.abs(terms).sum(axis=0)
    return bool(np.all(total >= -slack)), float(total.min())


def sufficient_conditions(profile, nu, R: float, grid_size: int = GRID_SIZE) -> ConditionReport:
    """Pointwise hypotheses a) and b) of the monotonicity theorem, plus the
    variant with ``lam_bar`` replaced by ``nu(nu + 1)``.

    a) ``theta' >= nu``;
    b) ``lam_bar theta^2 - nu^2 + nu^2 theta'^2 + nu theta theta'' >= 0``.
    Both forms of b) are reported so neither is assumed to imply the other.
    """
    profile = get_profile(profile)
    c = _flux_star(nu)
    _check_radius(profile, R)
    r = R * np.arange(1, grid_size + 1) / grid_size
    th = np.array([profile.theta(float(x)) for x in r])
    th1 = np.array([profile.theta1(float(x)) for x in r])
    th2 = np.array([profile.theta2(float(x)) for x in r])

    a_margin = float(np.min(th1 - c))
    rest = np.vstack([-c * c * np.ones_like(th), c * c * th1**2, c * th * th2])

    lam_bar = critical_eigenvalue(profile, c)
    if lam_bar is None:
        b_ok, b_margin = None, None
    else:
        b_ok, b_margin = _min_with_rounding(np.vstack([lam_bar * th**2, rest]))
    s_ok, s_margin = _min_with_rounding(np.vstack([c * (c + 1) * th**2, rest]))
    return ConditionReport(
        cond_a=a_margin >= 0,
        cond_a_margin=a_margin,
        cond_b=b_ok,
        cond_b_margin=b_margin,
        lambda_bar=lam_bar,
        sphere_form=s_ok,
        sphere_form_margin=s_margin,
    )


@dataclass(frozen=True)
class HardyTestFunction:
    """Separable test function ``f(r) e^{ikt}``; ``f`` must vanish at 0."""

    f: Callable[[float], float]
    df: Callable[[float], float]
    k: int = 0
    label: str = ""


@dataclass(frozen=True)
class HardyReport:
    label: str
    lhs: float
    rhs: float
    angular: float
    ratio: float
    constant: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _quad(fn, R):
    val, _ = integrate.quad(fn, 0.0, R, epsabs=0.0, epsrel=1e-12, limit=500)
    return val


def hardy_check(nu, R: float, test_functions: Sequence[HardyTestFunction]) -> list[HardyReport]:
    """Magnetic Hardy inequality ``int |grad^A u|^2 >= C^2 int |u|^2 / r^2``.

    For ``u = f(r) e^{ikt}`` and the potential ``nu dt`` the energy splits
    into ``2 pi int f'^2 r dr`` plus the angular part
    ``2 pi (k - nu)^2 int f^2 / r dr``.  ``ratio`` is the angular part over
    ``int |u|^2 / r^2``; it is never below ``C^2`` and equals it exactly
    when ``|k - nu| = C``.
    """
    flux = canonicalize_flux(nu)
    if flux.is_integer:
        raise ValueError("the magnetic Hardy inequality needs a non-integer flux")
    C = flux.canonical
    nu = flux.nu
    out = []
    for tf in test_functions:
        if abs(tf.f(0.0)) > 1e-12:
            raise ValueError(f"test function {tf.label or tf} does not vanish at the pole")
        radial = 2 * math.pi * _quad(lambda r: tf.df(r) ** 2 * r, R)
        inv_sq = 2 * math.pi * _quad(lambda r: tf.f(r) ** 2 / r if r > 0 else 0.0, R)
        angular = (tf.k - nu) ** 2 * inv_sq
        lhs = radial + angular
        rhs = inv_sq
        out.append(HardyReport(
            label=tf.label,
            lhs=lhs,
            rhs=rhs,
            angular=angular,
            ratio=angular / rhs,
            constant=C,
            holds=lhs >= C * C * rhs * (1 - 1e-10),
        ))
    return out
