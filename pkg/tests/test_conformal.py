import math

import numpy as np
import pytest
from scipy import integrate

from abspec import conformal as cf
from abspec.gauge import canonicalize_flux
from abspec.radial_spectra import ground_state


def test_stereographic_examples():
    assert cf.stereographic(math.pi / 2, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert abs(cf.stereographic(1e-12, 0.3)) < 1e-12
    assert cf.sigma(0.0) == 4.0
    with pytest.raises(ValueError, match="antipode"):
        cf.stereographic(math.pi, 0.0)


def test_stereographic_round_trip():
    r, t = np.meshgrid(np.linspace(0.01, 3.1, 40), np.linspace(-3.1, 3.1, 41))
    rr, tt = cf.inverse_stereographic(cf.stereographic(r, t))
    np.testing.assert_allclose(rr, r, rtol=0, atol=1e-14)
    np.testing.assert_allclose(tt, t, rtol=0, atol=1e-14)


def test_cap_area_examples():
    assert cf.cap_area_function(1.0) == pytest.approx(2 * math.pi, rel=1e-15)
    assert cf.cap_area_function(0.0) == 0.0
    assert cf.cap_area_function(np.inf) == 4 * math.pi
    assert cf.cap_area_function(1e8) == pytest.approx(4 * math.pi, rel=1e-15)
    with pytest.raises(ValueError):
        cf.cap_area_function(-1.0)


@pytest.mark.parametrize("r", [0.25, 0.5, 1.0, 2.0])
def test_cap_area_quadrature_identity(r):
    assert abs(cf.cap_area_quadrature(r) - cf.cap_area_function(r)) <= 1e-10


def test_map_registry():
    assert cf.get_map("identity").description == "identity"
    m = cf.get_map("rotation:0.7")
    assert m(1.0) == pytest.approx(complex(math.cos(0.7), math.sin(0.7)))
    q = cf.get_map("quad:0.1")
    assert q(1j) == pytest.approx(1j - 0.1)
    assert q.derivative(1j) == pytest.approx(1 + 0.2j)
    for bad in ("mobius:1", "quad:x", "identity:2", ""):
        with pytest.raises(ValueError, match="unknown conformal map"):
            cf.get_map(bad)


def _target_energy_oracle(cmap, nu):
    """``nu * int |w|^{2 nu} d(arg w)`` along the image of the unit circle."""
    def integrand(s):
        z = complex(math.cos(s), math.sin(s))
        w = complex(cmap.forward(np.array([z]))[0])
        dw = 1j * z * complex(cmap.derivative(np.array([z]))[0])
        return abs(w) ** (2 * nu) * (dw / w).imag
    val, _ = integrate.quad(integrand, 0, 2 * math.pi, epsabs=0, epsrel=1e-13, limit=400)
    return nu * val


def test_energy_identity_and_rotation():
    # the two routes sum in different orders, so "zero" means round-off
    rep = cf.energy_invariance_check(cf.get_map("identity"), 0.25)
    assert rep.rel_diff <= 1e-14 and rep.holds
    rep = cf.energy_invariance_check(cf.get_map("rotation:0.7"), 0.25)
    assert rep.rel_diff <= 1e-12


@pytest.mark.parametrize("spec", ["quad:0.05", "quad:0.1", "quad:-0.2", "rotation:2.0"])
@pytest.mark.parametrize("nu", [0.25, 0.5, 1.7])
def test_energy_invariance(spec, nu):
    cmap = cf.get_map(spec)
    rep = cf.energy_invariance_check(cmap, nu)
    assert rep.holds and rep.rel_diff <= 1e-6
    exact = _target_energy_oracle(cmap, canonicalize_flux(nu).canonical)
    assert rep.energy_target == pytest.approx(exact, rel=1e-9)
    assert rep.energy_source == pytest.approx(exact, rel=1e-6)


def test_energy_errors():
    shifted = cf.ConformalMap(lambda z: z + 0.1, lambda z: np.ones_like(z), "shift")
    with pytest.raises(ValueError, match="pole"):
        cf.energy_invariance_check(shifted, 0.25)
    with pytest.raises(ValueError, match="non-integer"):
        cf.energy_invariance_check(cf.get_map("identity"), 2.0)


def test_szego_identity_equality_case():
    rep = cf.szego_functional_check(cf.get_map("identity"), 0.25, T=1.0)
    assert rep.T_star == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(rep.a_samples, rep.v_samples, rtol=1e-11)
    assert abs(rep.cap_margin) < 1e-10
    assert abs(rep.dineq_margin) < 1e-9
    assert rep.transplanted_rayleigh == pytest.approx(rep.lambda_ball, rel=1e-6)
    assert rep.holds


def test_szego_identity_rayleigh_matches_ball():
    rep = cf.szego_functional_check(cf.get_map("identity"), 0.3, T=0.6)
    R = 2 * math.atan(0.6)
    assert rep.R == pytest.approx(R, rel=1e-12)
    assert rep.transplanted_rayleigh == pytest.approx(ground_state("spherical", 0.3, R).value, rel=1e-6)


@pytest.mark.parametrize("spec", ["quad:0.05", "quad:0.1", "rotation:0.7"])
def test_szego_registry_margins(spec):
    rep = cf.szego_functional_check(cf.get_map(spec), 0.25, T=0.8)
    assert rep.cap_margin >= -rep.tolerance
    assert rep.dineq_margin >= -rep.tolerance
    assert rep.ratio_monotone
    assert rep.claim_lhs >= rep.claim_rhs * (1 - 1e-9)
    assert rep.transplanted_rayleigh <= rep.lambda_ball * (1 + 1e-9)
    assert np.all(rep.a_samples <= 4 * math.pi)


def test_szego_errors():
    shifted = cf.ConformalMap(lambda z: z + 0.1, lambda z: np.ones_like(z), "shift")
    with pytest.raises(ValueError, match="pole"):
        cf.szego_functional_check(shifted, 0.25)
    with pytest.raises(ValueError, match="2 pi"):
        cf.szego_functional_check(cf.get_map("identity"), 0.25, T=2.0)
