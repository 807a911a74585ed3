"""Stereographic coordinates, conformal invariance of the magnetic energy and
the functionals of Szegő's transplantation argument on the sphere.

A point at distance ``r`` from the pole with angle ``t`` is identified with
``z = tan(r/2) e^{it}``; the round metric becomes ``sigma(z) |dz|^2`` with
``sigma = 4 / (1 + |z|^2)^2``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .gauge import canonicalize_flux
from .radial_spectra import ground_state

__all__ = [
    "ConformalMap",
    "stereographic",
    "inverse_stereographic",
    "sigma",
    "cap_area_function",
    "cap_area_quadrature",
    "get_map",
    "MAP_NAMES",
    "energy_invariance_check",
    "szego_functional_check",
]

N_RADIAL = 512
N_ANGULAR = 256
ENERGY_RTOL = 1e-6
MARGIN_RTOL = 1e-9


@dataclass(frozen=True)
class ConformalMap:
    """Holomorphic map given by value and derivative evaluators."""

    forward: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    description: str = ""

    def __call__(self, z):
        return self.forward(z)


def stereographic(r, t):
    """``z = tan(r/2) e^{it}`` for ``0 <= r < pi``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= math.pi):
        raise ValueError("stereographic chart needs 0 <= r < pi (the antipode has no image)")
    return np.tan(0.5 * r) * np.exp(1j * np.asarray(t, dtype=float))


def inverse_stereographic(z):
    """``(r, t)`` with ``r = 2 atan |z|`` and ``t = arg z``."""
    z = np.asarray(z, dtype=complex)
    return 2.0 * np.arctan(np.abs(z)), np.angle(z)


def sigma(z):
    """Density of the round metric in the stereographic chart."""
    return 4.0 / (1.0 + np.abs(z) ** 2) ** 2


def cap_area_function(r):
    """``v(r) = 4 pi r^2 / (1 + r^2)``, the area of ``{|z| < r}``; ``inf`` maps to ``4 pi``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(r), 4 * math.pi, 4 * math.pi * r**2 / (1 + r**2))
    return out if out.ndim else float(out)


def cap_area_quadrature(r: float) -> float:
    """``int_{|z| < r} sigma`` by adaptive quadrature of ``2 pi s sigma(s)``."""
    val, _ = integrate.quad(lambda s: 2 * math.pi * s * 4 / (1 + s * s) ** 2, 0.0, r,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


# ---------------------------------------------------------------------------
# map registry


def _identity():
    return ConformalMap(lambda z: np.asarray(z, dtype=complex), lambda z: np.ones_like(z, dtype=complex), "identity")


def _rotation(alpha: float):
    e = complex(math.cos(alpha), math.sin(alpha))
    return ConformalMap(lambda z: e * np.asarray(z), lambda z: e * np.ones_like(z, dtype=complex), f"rotation:{alpha!r}")


def _quad(c: float):
    return ConformalMap(lambda z: z + c * z * z, lambda z: 1 + 2 * c * z, f"quad:{c!r}")


MAP_NAMES = ("identity", "rotation:<alpha>", "quad:<c>")


def get_map(spec: str) -> ConformalMap:
    """Parse ``identity``, ``rotation:alpha`` or ``quad:c`` (``z -> z + c z^2``)."""
    name, _, arg = spec.partition(":")
    try:
        if name == "identity" and not arg:
            return _identity()
        if name == "rotation":
            return _rotation(float(arg))
        if name == "quad":
            return _quad(float(arg))
    except ValueError:
        pass
    raise ValueError(f"unknown conformal map {spec!r}; expected one of {MAP_NAMES}")


def _require_pole_fixed(cmap: ConformalMap):
    w0 = complex(np.asarray(cmap.forward(np.array([0j])))[0])
    if abs(w0) > 1e-14:
        raise ValueError(f"map {cmap.description or cmap} does not fix the pole (maps 0 to {w0})")


# ---------------------------------------------------------------------------
# energy invariance


def _radial_rule(n: int, nu: float, R: float = 1.0):
    """Nodes and weights on ``(0, R)`` for integrands ``~ r^{2 nu - 1}``.

    Gauss-Legendre in ``x = (r/R)^{2 nu}``, which grades the nodes toward
    the pole and absorbs the power singularity into the Jacobian.
    """
    r, dr = _unit_radial_rule(n, nu)
    return R * r, R * dr


@functools.lru_cache(maxsize=32)
def _unit_radial_rule(n: int, nu: float):
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w
    p = 1.0 / (2.0 * nu)
    r, dr = x**p, p * x ** (p - 1) * w
    r.flags.writeable = dr.flags.writeable = False
    return r, dr


@dataclass(frozen=True)
class EnergyReport:
    map: str
    energy_source: float
    energy_target: float
    rel_diff: float
    holds: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _target_boundary_radius(cmap: ConformalMap, t: np.ndarray) -> np.ndarray:
    """Radius of the image of the unit circle along the rays ``arg w = t``."""
    s = np.linspace(0.0, 2 * math.pi, 4097)
    w = cmap.forward(np.exp(1j * s))
    arg = np.unwrap(np.angle(w))
    arg -= arg[0] - np.angle(w[0])
    if np.any(np.diff(arg) <= 0) or abs(arg[-1] - arg[0] - 2 * math.pi) > 1e-9:
        raise ValueError("image of the unit disk is not star-shaped with respect to the pole")
    base = arg[0]
    target = base + np.mod(t - base, 2 * math.pi)
    j = np.clip(np.searchsorted(arg, target) - 1, 0, len(s) - 2)
    lo, hi = s[j], s[j + 1]
    # bisection on the wrapped phase difference, all rays at once
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        above = np.angle(cmap.forward(np.exp(1j * mid)) * np.exp(-1j * target)) > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return np.abs(cmap.forward(np.exp(1j * 0.5 * (lo + hi))))


def energy_invariance_check(cmap: ConformalMap, nu: float, n_radial: int = N_RADIAL,
                            n_angular: int = N_ANGULAR) -> EnergyReport:
    """Magnetic energy of ``u = |w|^nu`` on ``Phi(B)`` against its pull-back on ``B``.

    The potential on the target is ``A = nu dt``.  On the unit disk the
    transplanted function ``u o Phi`` is paired with the pulled-back
    potential ``Phi^* A``; gradients and the potential are pulled back with
    the Jacobian of ``Phi`` at every quadrature node.  The target energy is
    integrated directly in polar coordinates about the pole over ``Phi(B)``.
    """
    nu = canonicalize_flux(nu).canonical
    if nu == 0.0:
        raise ValueError("the energy check needs a non-integer flux")
    _require_pole_fixed(cmap)
    t = 2 * math.pi * np.arange(n_angular) / n_angular
    dt = 2 * math.pi / n_angular

    # source: unit disk, quantities pulled back through Phi
    r, dr = _radial_rule(n_radial, nu)
    z = r[:, None] * np.exp(1j * t)[None, :]
    w = cmap.forward(z)
    dw = cmap.derivative(z)
    a, b = dw.real, dw.imag
    # Jacobian of w = Phi(z) is [[a, -b], [b, a]]; covectors pull back by J^T
    rho = np.abs(w)
    u = rho**nu
    grad_u = np.stack([nu * rho ** (nu - 2) * w.real, nu * rho ** (nu - 2) * w.imag])
    A = nu * np.stack([-w.imag, w.real]) / rho**2
    pull = lambda v: np.stack([a * v[0] + b * v[1], -b * v[0] + a * v[1]])  # noqa: E731
    grad_hat = pull(grad_u)
    A_hat = pull(A)
    mag = np.abs(grad_hat[0] - 1j * u * A_hat[0]) ** 2 + np.abs(grad_hat[1] - 1j * u * A_hat[1]) ** 2
    e_src = float(np.sum(mag * (r * dr)[:, None]) * dt)

    # target: polar coordinates about the pole on Phi(B)
    rho_b = _target_boundary_radius(cmap, t)
    e_tgt = 0.0
    for rb in rho_b:
        s, ds = _radial_rule(n_radial, nu, rb)
        # |grad u|^2 + |u A|^2 = 2 nu^2 s^{2 nu - 2} for u = s^nu, A = nu dt
        e_tgt += float(np.sum(2 * nu * nu * s ** (2 * nu - 2) * s * ds)) * dt
    rel = abs(e_src - e_tgt) / abs(e_tgt)
    return EnergyReport(cmap.description, e_src, e_tgt, rel, rel <= ENERGY_RTOL)


# ---------------------------------------------------------------------------
# Szegő transplantation


@dataclass
class SzegoReport:
    map: str
    T: float
    T_star: float
    R: float
    radii: np.ndarray = field(repr=False)
    a_samples: np.ndarray = field(repr=False)
    v_samples: np.ndarray = field(repr=False)
    dineq_margin: float
    cap_margin: float
    ratio_monotone: bool
    claim_lhs: float
    claim_rhs: float
    transplanted_rayleigh: float
    lambda_ball: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return (self.dineq_margin >= -self.tolerance and self.cap_margin >= -self.tolerance
                and self.ratio_monotone and self.claim_lhs >= self.claim_rhs * (1 - MARGIN_RTOL)
                and self.transplanted_rayleigh <= self.lambda_ball * (1 + MARGIN_RTOL))

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "T": self.T,
            "T_star": self.T_star,
            "R": self.R,
            "radii": self.radii.tolist(),
            "a_samples": self.a_samples.tolist(),
            "v_samples": self.v_samples.tolist(),
            "dineq_margin": self.dineq_margin,
            "cap_margin": self.cap_margin,
            "ratio_monotone": self.ratio_monotone,
            "claim_lhs": self.claim_lhs,
            "claim_rhs": self.claim_rhs,
            "transplanted_rayleigh": self.transplanted_rayleigh,
            "lambda_ball": self.lambda_ball,
            "holds": self.holds,
        }


def _gl(n: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return lo + 0.5 * (hi - lo) * (x + 1), 0.5 * (hi - lo) * w


def _area_density(g: ConformalMap, z):
    return np.abs(g.derivative(z)) ** 2 * sigma(g.forward(z))


def _a(g: ConformalMap, r: float, n_r: int, t: np.ndarray) -> float:
    """``a(r) = int_{B_r} |g'|^2 sigma(g)``."""
    s, ws = _gl(n_r, 0.0, r)
    vals = _area_density(g, s[:, None] * np.exp(1j * t)[None, :])
    return float(np.sum(vals.mean(axis=1) * s * ws) * 2 * math.pi)


def _a_prime(g: ConformalMap, r: float, t: np.ndarray) -> float:
    return float(2 * math.pi * r * _area_density(g, r * np.exp(1j * t)).mean())


def szego_functional_check(cmap: ConformalMap, nu: float, T: float = 1.0, grid_size: int = 64,
                           n_radial: int = 96, n_angular: int = N_ANGULAR) -> SzegoReport:
    """Functionals of the transplantation argument for ``Omega = f^{-1}(g(B_T))``.

    The disk ``B(x0, R)`` of equal area has ``tan(R/2) = T*`` with
    ``v(T*) = a(T)``; the map is rescaled to ``z -> g(z T / T*)`` on
    ``B_{T*}`` so that its area function meets ``v`` at ``T*``.  Reported:

    * ``dineq_margin``: min of ``a' - a (4 pi - a) / (2 pi r)`` on the grid;
    * ``cap_margin``: min of ``v - a``;
    * ``ratio_monotone``: ``a / (r^2 (4 pi - a))`` is non-decreasing;
    * ``claim_lhs >= claim_rhs``: ``int U |g'|^2 sigma(g) >= int U sigma``
      with ``U = (u o f^{-1})^2`` for the ground mode ``u`` of ``B(x0, R)``;
    * ``transplanted_rayleigh``: the resulting upper bound for ``lam_1(Omega)``.
    """
    c = canonicalize_flux(nu).canonical
    if c == 0.0:
        raise ValueError("the transplantation check needs a non-integer flux")
    if not T > 0:
        raise ValueError("T must be positive")
    _require_pole_fixed(cmap)
    t = 2 * math.pi * np.arange(n_angular) / n_angular
    area = _a(cmap, T, n_radial, t)
    if area > 2 * math.pi * (1 + 1e-12):
        raise ValueError(f"domain area {area} exceeds 2 pi; the argument needs R <= pi/2")
    T_star = math.sqrt(area / (4 * math.pi - area))
    kappa = T / T_star
    g = ConformalMap(lambda z: cmap.forward(kappa * z), lambda z: kappa * cmap.derivative(kappa * z),
                     f"{cmap.description} (rescaled)")
    R = 2 * math.atan(T_star)

    radii = T_star * np.arange(1, grid_size + 1) / grid_size
    a = np.array([_a(g, r, n_radial, t) for r in radii])
    a[-1] = area  # a(T*) of the rescaled map is a(T) of the original
    v = cap_area_function(radii)
    ap = np.array([_a_prime(g, r, t) for r in radii])
    rhs = a * (4 * math.pi - a) / (2 * math.pi * radii)
    scale = max(float(np.max(np.abs(ap))), 1.0)
    tol = MARGIN_RTOL * scale
    ratio = a / (radii**2 * (4 * math.pi - a))

    # ground mode of the cap and the claim inequality in the z-plane
    s, ws = _gl(n_radial, 0.0, T_star)
    mode = ground_state("spherical", c, R, radii=2 * np.arctan(s))
    U = mode.u**2
    z = s[:, None] * np.exp(1j * t)[None, :]
    lhs = float(np.sum(U * _area_density(g, z).mean(axis=1) * s * ws) * 2 * math.pi)
    rhs_claim = float(np.sum(U * sigma(s) * s * ws) * 2 * math.pi)

    # energy of u on B(x0, R): 2 pi int (u'^2 + c^2 u^2 / sin^2) sin dr
    rq, wq = _radial_rule(n_radial, c, R)
    m2 = ground_state("spherical", c, R, radii=rq)
    energy = float(np.sum((m2.du**2 + c * c * m2.u**2 / np.sin(rq) ** 2) * np.sin(rq) * wq)) * 2 * math.pi
    rayleigh = energy / lhs

    return SzegoReport(
        map=cmap.description,
        T=T,
        T_star=T_star,
        R=R,
        radii=radii,
        a_samples=a,
        v_samples=v,
        dineq_margin=float(np.min(ap - rhs)),
        cap_margin=float(np.min(v - a)),
        ratio_monotone=bool(np.all(np.diff(ratio) >= -MARGIN_RTOL * np.abs(ratio[1:]))),
        claim_lhs=lhs,
        claim_rhs=rhs_claim,
        transplanted_rayleigh=rayleigh,
        lambda_ball=mode.value,
        tolerance=tol,
    )
