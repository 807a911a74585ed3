"""Aharonov-Bohm spectra of geodesic disks centred at the pole.

Each angular mode ``u(r) e^{ikt}`` reduces the magnetic Laplacian to the
singular Sturm-Liouville problem

    u'' + (theta'/theta) u' + (lam - (k - nu)^2 / theta^2) u = 0,

solved here by Prüfer shooting (see ``_shooting``).  Euclidean disks also
have a Bessel closed form, and Steklov values on disks of revolution are
explicit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import linalg, optimize

from . import _shooting
from .gauge import FluxData, canonicalize_flux, order_sequence
from .revolution import RevolutionProfile, get_profile
from .specialfun import bessel_deriv_zero, bessel_zero

__all__ = [
    "RadialEigenpair",
    "SpectrumEntry",
    "SpectrumTable",
    "Annulus",
    "Cylinder",
    "neumann_radial_eigen",
    "neumann_spectrum",
    "neumann_disk_closed_form",
    "steklov_disk_revolution",
    "steklov_separable_extras",
    "schrodinger_radial_eigen",
    "second_eigenvalue_remarks",
    "radial_solution",
    "ground_state",
    "TOLERANCES",
]

TOLERANCES = {
    "frobenius_offset": 1e-6,  # times R
    "integrator_rtol": 1e-11,
    "integrator_atol": 1e-12,
    "eigenvalue_rtol": 1e-12,
    "multiplicity_rtol": 1e-8,
}

GRID_SIZE = 256


@dataclass
class RadialEigenpair:
    """One separated mode; ``u`` is normalized in ``L^2(theta dr)``."""

    k: int
    j: int
    value: float
    r: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    du: np.ndarray = field(repr=False)
    start_check: float = 0.0

    def sign_changes(self) -> int:
        s = np.sign(self.u[np.abs(self.u) > 1e-12 * np.abs(self.u).max()])
        return int(np.count_nonzero(s[1:] != s[:-1]))


@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    k: int
    j: int
    order: float


@dataclass
class SpectrumTable:
    entries: list[SpectrumEntry]
    multiplicity_groups: list[list[int]]
    problem: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def values(self) -> list[float]:
        return [e.value for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "meta": self.meta,
            "eigenvalues": [
                {"value": e.value, "k": e.k, "j": e.j, "order": e.order} for e in self.entries
            ],
            "multiplicity_groups": self.multiplicity_groups,
        }


def _cluster(values: Sequence[float], rtol: float) -> list[list[int]]:
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups:
            prev = values[groups[-1][-1]]
            if abs(v - prev) <= rtol * max(abs(v), abs(prev)) or (v == prev):
                groups[-1].append(i)
                continue
        groups.append([i])
    return groups


def _table(entries: list[SpectrumEntry], problem: str, meta: dict) -> SpectrumTable:
    entries = sorted(entries, key=lambda e: (e.value, e.order, abs(e.k), -e.k))
    groups = _cluster([e.value for e in entries], TOLERANCES["multiplicity_rtol"])
    return SpectrumTable(entries, groups, problem, meta)


def _flux(nu) -> FluxData:
    return nu if isinstance(nu, FluxData) else canonicalize_flux(nu)


# ---------------------------------------------------------------------------
# shooting


class _RadialProblem:
    """Fixed (profile, order, extra potential, R) with a cached phase map."""

    def __init__(self, profile: RevolutionProfile, mu: float, R: float, extra=None,
                 eps_factor: float = TOLERANCES["frobenius_offset"]):
        profile.check_r(R)
        self.profile = profile
        self.mu = float(mu)
        self.R = float(R)
        self.extra = extra
        self.eps = eps_factor * R
        self.theta = profile.jit_theta if profile.jit_theta is not None else profile.theta
        self.thetaR = profile.theta(R)

    def _scale(self, lam_ref: float) -> float:
        return max(1.0, self.mu, math.sqrt(max(lam_ref, 0.0)) * self.thetaR)

    def path(self, lam: float, radii, scale: float, eps: float | None = None) -> np.ndarray:
        return _shooting.integrate_path(
            self.theta, self.extra, self.mu, lam, scale, self.eps if eps is None else eps, radii,
            TOLERANCES["integrator_rtol"], TOLERANCES["integrator_atol"],
        )

    def phase(self, lam: float, scale: float, eps: float | None = None) -> float:
        return float(self.path(lam, np.array([self.R]), scale, eps)[0, 0])

    def has_zero_mode(self) -> bool:
        return self.mu == 0.0 and self.extra is None

    def initial_upper(self, j: int) -> float:
        z = (j + 0.5 * self.mu) * math.pi + 1.0
        return 4.0 * (z / self.R) ** 2

    def eigenvalues(self) -> Iterator[float]:
        """Yield lam_1 < lam_2 < ... for the Neumann condition at R."""
        lo = 0.0
        j = 0
        while True:
            j += 1
            if j == 1 and self.has_zero_mode():
                lo = 0.0
                yield 0.0
                continue
            target = 0.5 * math.pi + (j - 1) * math.pi
            hi = max(self.initial_upper(j), 2.0 * lo + 1.0)
            scale = self._scale(hi)
            f_hi = self.phase(hi, scale) - target
            grow = 0
            while f_hi <= 0.0:
                lo = hi
                hi *= 4.0
                grow += 1
                if grow > 60:
                    raise ArithmeticError(f"eigenvalue bracket exhausted for mu={self.mu}, j={j}")
                scale = self._scale(hi)
                f_hi = self.phase(hi, scale) - target
            # the sign of phase - target does not depend on the scale, so a
            # single scale is used throughout this root search
            f = lambda lam: self.phase(lam, scale) - target  # noqa: E731
            lam = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=TOLERANCES["eigenvalue_rtol"], maxiter=200)
            lo = lam
            yield lam

    def eigenpair(self, k: int, j: int, lam: float, grid_size: int = GRID_SIZE, radii=None) -> RadialEigenpair:
        """Sample the eigenfunction, normalized in ``L^2(theta dr)`` on (0, R).

        ``radii`` defaults to the uniform grid ``R i / grid_size``; custom
        radii must be increasing inside (0, R].
        """
        if radii is None:
            radii = self.R * np.arange(1, grid_size + 1) / grid_size
        radii = np.asarray(radii, dtype=float)
        if radii.size == 0 or radii[0] <= self.eps or radii[-1] > self.R or np.any(np.diff(radii) <= 0):
            raise ValueError("sample radii must increase inside (eps, R]")
        path_r = radii if radii[-1] == self.R else np.append(radii, self.R)
        scale = self._scale(lam)
        out = self.path(lam, path_r, scale)
        phi, lnrho, integral = out[:, 0], out[:, 1], out[:, 2]
        # normalize exp(lnrho) before exponentiating to stay in range
        shift = lnrho.max()
        rho = np.exp(lnrho - shift)
        norm = math.sqrt(integral[-1]) * math.exp(-shift)
        u = rho * np.sin(phi) / scale / norm
        th = np.array([self.profile.theta(float(r)) for r in path_r])
        du = rho * np.cos(phi) / th / norm
        # Richardson guard on the Frobenius start: restart at eps/2
        check = abs(self.phase(lam, scale, 0.5 * self.eps) - phi[-1])
        n = radii.size
        return RadialEigenpair(k, j, lam, radii, u[:n], du[:n], check)


def ground_state(profile, nu, R: float, radii=None, grid_size: int = GRID_SIZE) -> RadialEigenpair:
    """The ``(k = 0, j = 1)`` mode in the canonical gauge, i.e. order ``nu*``."""
    profile = get_profile(profile)
    flux = _flux(nu)
    eps_factor = TOLERANCES["frobenius_offset"]
    if radii is not None and len(radii) and np.min(radii) <= eps_factor * R:
        # start closer to the pole when samples are requested there
        eps_factor = 0.5 * float(np.min(radii)) / R
    prob = _RadialProblem(profile, flux.canonical, R, eps_factor=eps_factor)
    lam = next(prob.eigenvalues())
    return prob.eigenpair(flux.base, 1, lam, grid_size, radii)


def neumann_radial_eigen(profile, nu, k: int, R: float, j_max: int, grid_size: int = GRID_SIZE) -> list[RadialEigenpair]:
    """First ``j_max`` Neumann eigenpairs of angular momentum ``k`` on ``B(x0, R)``."""
    profile = get_profile(profile)
    flux = _flux(nu)
    prob = _RadialProblem(profile, flux.order(k), R)
    pairs = []
    for j, lam in enumerate(prob.eigenvalues(), start=1):
        pairs.append(prob.eigenpair(k, j, lam, grid_size))
        if j >= j_max:
            break
    return pairs


def neumann_spectrum(profile, nu, R: float, count: int) -> SpectrumTable:
    """Lowest ``count`` Neumann eigenvalues on ``B(x0, R)`` merged over all ``k``.

    Modes are visited in increasing order ``|k - nu|``; since ``lam_{k,1}``
    is non-decreasing in the order, the sweep stops at the first mode whose
    ground value exceeds the current ``count``-th value.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    profile = get_profile(profile)
    flux = _flux(nu)
    found: list[SpectrumEntry] = []

    def threshold():
        if len(found) < count:
            return math.inf
        return sorted(e.value for e in found)[count - 1]

    n_orders = 1
    idx = 0
    while True:
        seq = order_sequence(flux, n_orders)
        if idx >= len(seq):
            n_orders *= 2
            continue
        mu, k = seq[idx]
        idx += 1
        prob = _RadialProblem(profile, mu, R)
        stop_all = False
        for j, lam in enumerate(prob.eigenvalues(), start=1):
            if lam > threshold():
                stop_all = j == 1
                break
            found.append(SpectrumEntry(lam, k, j, mu))
        if stop_all:
            break
    table = _table(found, "neumann", {"geometry": profile.kind, "nu": flux.nu, "canonical_flux": flux.canonical, "R": R})
    table.entries = table.entries[:count]
    table.multiplicity_groups = _cluster(table.values, TOLERANCES["multiplicity_rtol"])
    return table


def neumann_disk_closed_form(nu, R: float, count: int) -> SpectrumTable:
    """Euclidean disk: ``lam_{kj} = (z'_{|k-nu|,j} / R)^2``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    flux = _flux(nu)
    found: list[SpectrumEntry] = []
    n_orders = 2 * count + 2
    for mu, k in order_sequence(flux, n_orders):
        if mu == 0.0:
            # Neumann Laplacian radial mode: constant, then zeros of J_0' = -J_1
            vals = [0.0] + [(bessel_zero(1.0, j) / R) ** 2 for j in range(1, count)]
        else:
            vals = [(bessel_deriv_zero(mu, j) / R) ** 2 for j in range(1, count + 1)]
        if len(found) >= count and vals[0] > sorted(e.value for e in found)[count - 1]:
            break
        found.extend(SpectrumEntry(v, k, j, mu) for j, v in enumerate(vals, start=1))
    table = _table(found, "neumann", {"geometry": "euclidean", "nu": flux.nu, "canonical_flux": flux.canonical, "R": R, "method": "bessel"})
    table.entries = table.entries[:count]
    table.multiplicity_groups = _cluster(table.values, TOLERANCES["multiplicity_rtol"])
    return table


def steklov_disk_revolution(profile, nu, R: float, count: int) -> SpectrumTable:
    """Steklov values ``eta_k = |k - nu| / theta(R)`` on ``B(x0, R)``.

    The bounded radial solution is ``exp(int_R^r |k-nu|/theta)``, whose
    logarithmic derivative at ``R`` is exactly ``|k-nu|/theta(R)``.
    """
    profile = get_profile(profile)
    profile.check_r(R)
    flux = _flux(nu)
    th = profile.theta(R)
    entries = [SpectrumEntry(mu / th, k, 1, mu) for mu, k in order_sequence(flux, count)]
    return _table(entries, "steklov", {"geometry": profile.kind, "nu": flux.nu, "canonical_flux": flux.canonical, "R": R})


@dataclass(frozen=True)
class Annulus:
    r_in: float
    r_out: float


@dataclass(frozen=True)
class Cylinder:
    """``S^1 x (-L, L)`` with unit-radius circles."""

    L: float


def _annulus_pair(mu: float, a: float, b: float) -> list[float]:
    # basis r^mu, r^-mu (or 1, ln r when mu = 0); outward normal is +d/dr at
    # r = b and -d/dr at r = a
    if mu == 0.0:
        P = np.array([[0.0, 1.0 / b], [0.0, -1.0 / a]])
        Q = np.array([[1.0, math.log(b)], [1.0, math.log(a)]])
    else:
        P = np.array([
            [mu * b ** (mu - 1), -mu * b ** (-mu - 1)],
            [-mu * a ** (mu - 1), mu * a ** (-mu - 1)],
        ])
        Q = np.array([[b ** mu, b ** -mu], [a ** mu, a ** -mu]])
    w = linalg.eigvals(P, Q)
    return sorted(float(x.real) for x in w)


def steklov_separable_extras(nu, shape: Annulus | Cylinder, count: int) -> SpectrumTable:
    flux = _flux(nu)
    if isinstance(shape, Cylinder):
        if not shape.L > 0:
            raise ValueError("cylinder half-length must be positive")
        L = shape.L

        def pair(mu):
            if mu == 0.0:
                return [0.0, 1.0 / L]
            return [mu * math.tanh(mu * L), mu / math.tanh(mu * L)]

        meta = {"shape": "cylinder", "L": L}
    elif isinstance(shape, Annulus):
        if not 0 < shape.r_in < shape.r_out:
            raise ValueError("annulus needs 0 < r_in < r_out")
        meta = {"shape": "annulus", "r_in": shape.r_in, "r_out": shape.r_out}

        def pair(mu):
            return _annulus_pair(mu, shape.r_in, shape.r_out)
    else:
        raise TypeError(f"unsupported separable shape {shape!r}")

    found: list[SpectrumEntry] = []
    for mu, k in order_sequence(flux, 2 * count + 4):
        vals = pair(mu)
        if len(found) >= count and vals[0] > sorted(e.value for e in found)[count - 1]:
            break
        found.extend(SpectrumEntry(v, k, j, mu) for j, v in enumerate(vals, start=1))
    meta.update(nu=flux.nu, canonical_flux=flux.canonical)
    table = _table(found, "steklov", meta)
    table.entries = table.entries[:count]
    table.multiplicity_groups = _cluster(table.values, TOLERANCES["multiplicity_rtol"])
    return table


def _inverse_square_coefficient(V: Callable[[float], float], R: float) -> float:
    """``lim_{r -> 0} r^2 V(r)``, rejecting potentials more singular than 1/r^2."""
    samples = [(R * 10.0 ** -p) ** 2 * V(R * 10.0 ** -p) for p in (6, 7, 8, 9)]
    if not all(math.isfinite(x) for x in samples):
        raise ValueError("potential is not finite near the pole")
    if any(x < -1e-12 for x in samples):
        raise ValueError("potential must be non-negative")
    spread = max(samples[1:]) - min(samples[1:])
    if spread > 1e-6 * max(1.0, abs(samples[-1])) or samples[-1] > 10.0 * max(samples[0], 1e-300) * 1.0001 + 1e-9:
        raise ValueError("r^2 V(r) does not converge as r -> 0; potential too singular")
    return max(samples[-1], 0.0)


def schrodinger_radial_eigen(profile, V: Callable[[float], float], R: float, j_max: int,
                             grid_size: int = GRID_SIZE) -> list[RadialEigenpair]:
    """Radial Neumann eigenpairs of ``Delta + V`` on ``B(x0, R)``."""
    profile = get_profile(profile)
    profile.check_r(R)
    c = _inverse_square_coefficient(V, R)
    probe = R * np.linspace(0.0, 1.0, 257)[1:]
    if not np.all(np.array([V(r) for r in probe]) >= 0):
        raise ValueError("potential must be non-negative")
    mu = math.sqrt(c)
    theta = profile.theta
    if c == 0.0:
        extra = V
    else:
        extra = lambda r: V(r) - c / theta(r) ** 2  # noqa: E731
    prob = _RadialProblem(profile, mu, R, extra=extra)
    pairs = []
    for j, lam in enumerate(prob.eigenvalues(), start=1):
        pairs.append(prob.eigenpair(0, j, lam, grid_size))
        if j >= j_max:
            break
    return pairs


def radial_solution(profile, radii, lam: float, V: Callable[[float], float] | None = None,
                    mu: float = 0.0) -> np.ndarray:
    """Frobenius solution of ``u'' + (theta'/theta) u' + (lam - V) u = 0``.

    No boundary condition is imposed; the solution is the one behaving like
    ``r^mu`` at the pole, normalized so that ``u(eps) = eps^mu`` at the start
    radius.  When ``V`` is given, ``mu = sqrt(lim r^2 V)``; otherwise ``V`` is
    taken to be ``mu^2 / theta^2``.
    """
    profile = get_profile(profile)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing")
    R = float(radii[-1])
    extra = None
    if V is not None:
        profile.check_r(R)
        c = _inverse_square_coefficient(V, R)
        mu = math.sqrt(c)
        theta = profile.theta
        extra = V if c == 0.0 else (lambda r: V(r) - c / theta(r) ** 2)  # noqa: E731
    prob = _RadialProblem(profile, mu, R, extra=extra)
    prob.eps = min(prob.eps, 0.5 * radii[0])
    scale = prob._scale(lam)
    out = prob.path(lam, radii, scale)
    return np.exp(out[:, 1]) * np.sin(out[:, 0]) / scale


@dataclass(frozen=True)
class SecondEigenvalues:
    lambda2: float
    sigma2: float
    laplacian_lambda2: float
    laplacian_sigma2: float


def second_eigenvalue_remarks(nu, R: float = 1.0) -> SecondEigenvalues:
    """Second Neumann and Steklov eigenvalues of the centred euclidean disk."""
    flux = _flux(nu)
    if flux.is_integer:
        raise ValueError("second-eigenvalue remarks need a non-integer flux")
    c = flux.canonical
    res = SecondEigenvalues(
        lambda2=(bessel_deriv_zero(1.0 - c, 1) / R) ** 2,
        sigma2=(1.0 - c) / R,
        laplacian_lambda2=(bessel_deriv_zero(1.0, 1) / R) ** 2,
        laplacian_sigma2=1.0 / R,
    )
    if not (res.lambda2 < res.laplacian_lambda2 and res.sigma2 < res.laplacian_sigma2):
        raise ArithmeticError(f"second-eigenvalue comparison failed: {res}")
    return res
