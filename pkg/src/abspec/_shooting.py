"""Prüfer-angle shooting for singular radial Sturm-Liouville problems.

The radial equation ``(theta u')' = (theta V - lam theta) u`` is written for
the scaled Prüfer variables ``S u = rho sin(phi)``, ``theta u' = rho cos(phi)``
and integrated in ``s = ln r``.  In that variable the regular-singular point
at ``r = 0`` becomes a harmless constant-coefficient tail, the angle ``phi``
counts zeros of ``u`` (one per multiple of pi) and the Neumann condition
``u'(R) = 0`` reads ``cos(phi) = 0``.

The potential is split as ``V = mu^2 / theta^2 + extra(r)`` so the
inverse-square part never has to be evaluated at ``r = 0``.

``_kernel`` is plain Python that numba can also compile; the compiled copy
is used when both callables are numba ``cfunc`` objects.
"""
from __future__ import annotations

import math

import numba
import numpy as np
from numba.extending import register_jitable

# Dormand-Prince 5(4)
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

MAX_STEPS = 200000

# status codes returned by the kernel
OK, TOO_MANY_STEPS, NOT_FINITE = 0, 1, 2


@register_jitable
def _rhs(theta, extra, mu2, lam, scale, s, phi, lnrho):
    r = math.exp(s)
    th = theta(r)
    g = lam * th - mu2 / th - th * extra(r)
    sn = math.sin(phi)
    cs = math.cos(phi)
    dphi = r * (scale / th * cs * cs + g / scale * sn * sn)
    dlnrho = r * sn * cs * (scale / th - g / scale)
    di = r * th * math.exp(2.0 * lnrho) * sn * sn / (scale * scale)
    return dphi, dlnrho, di


def _kernel(theta, extra, mu, lam, scale, r_start, r_out, rtol, atol, out):
    """Integrate from ``r_start`` through the ascending radii ``r_out``.

    Writes ``(phi, ln rho, int_0^r u^2 theta)`` for each output radius into
    ``out`` and returns a status code.
    """
    mu2 = mu * mu
    eps = r_start
    th0 = theta(eps)
    if mu > 0.0:
        # u = r^mu, theta u' = theta mu r^(mu-1)
        phi = math.atan2(scale * eps, th0 * mu)
        lnrho = (mu - 1.0) * math.log(eps) + 0.5 * math.log(scale * scale * eps * eps + th0 * th0 * mu2)
    else:
        phi = 0.5 * math.pi
        lnrho = math.log(scale)
    integral = eps ** (2.0 * mu + 2.0) / (2.0 * mu + 2.0)

    s = math.log(eps)
    h = 1e-2
    steps = 0
    for idx in range(r_out.shape[0]):
        s_end = math.log(r_out[idx])
        while s < s_end:
            if steps > MAX_STEPS:
                return TOO_MANY_STEPS
            if s + h > s_end:
                h = s_end - s
            k1p, k1l, k1i = _rhs(theta, extra, mu2, lam, scale, s, phi, lnrho)
            k2p, k2l, k2i = _rhs(theta, extra, mu2, lam, scale, s + _C2 * h,
                                 phi + h * _A21 * k1p, lnrho + h * _A21 * k1l)
            k3p, k3l, k3i = _rhs(theta, extra, mu2, lam, scale, s + _C3 * h,
                                 phi + h * (_A31 * k1p + _A32 * k2p),
                                 lnrho + h * (_A31 * k1l + _A32 * k2l))
            k4p, k4l, k4i = _rhs(theta, extra, mu2, lam, scale, s + _C4 * h,
                                 phi + h * (_A41 * k1p + _A42 * k2p + _A43 * k3p),
                                 lnrho + h * (_A41 * k1l + _A42 * k2l + _A43 * k3l))
            k5p, k5l, k5i = _rhs(theta, extra, mu2, lam, scale, s + _C5 * h,
                                 phi + h * (_A51 * k1p + _A52 * k2p + _A53 * k3p + _A54 * k4p),
                                 lnrho + h * (_A51 * k1l + _A52 * k2l + _A53 * k3l + _A54 * k4l))
            k6p, k6l, k6i = _rhs(theta, extra, mu2, lam, scale, s + h,
                                 phi + h * (_A61 * k1p + _A62 * k2p + _A63 * k3p + _A64 * k4p + _A65 * k5p),
                                 lnrho + h * (_A61 * k1l + _A62 * k2l + _A63 * k3l + _A64 * k4l + _A65 * k5l))
            phi_n = phi + h * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p + _B6 * k6p)
            lnr_n = lnrho + h * (_B1 * k1l + _B3 * k3l + _B4 * k4l + _B5 * k5l + _B6 * k6l)
            int_n = integral + h * (_B1 * k1i + _B3 * k3i + _B4 * k4i + _B5 * k5i + _B6 * k6i)
            k7p, k7l, k7i = _rhs(theta, extra, mu2, lam, scale, s + h, phi_n, lnr_n)
            ep = h * (_E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p + _E6 * k6p + _E7 * k7p)
            el = h * (_E1 * k1l + _E3 * k3l + _E4 * k4l + _E5 * k5l + _E6 * k6l + _E7 * k7l)
            ei = h * (_E1 * k1i + _E3 * k3i + _E4 * k4i + _E5 * k5i + _E6 * k6i + _E7 * k7i)
            err = max(
                abs(ep) / (atol + rtol * max(abs(phi), abs(phi_n))),
                abs(el) / (atol + rtol * max(abs(lnrho), abs(lnr_n))),
                abs(ei) / (rtol * max(abs(integral), abs(int_n)) + 1e-300),
            )
            if not (err == err) or not math.isfinite(phi_n) or not math.isfinite(lnr_n):
                if h < 1e-12:
                    return NOT_FINITE
                h *= 0.25
                continue
            steps += 1
            if err <= 1.0:
                s += h
                phi, lnrho, integral = phi_n, lnr_n, int_n
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            else:
                fac = max(0.2, 0.9 * err ** -0.2)
            h *= fac
        out[idx, 0] = phi
        out[idx, 1] = lnrho
        out[idx, 2] = integral
    return OK


SCALAR_SIG = "float64(float64)"


@numba.cfunc(SCALAR_SIG, cache=True)
def _zero(r):
    return 0.0


# cfunc arguments have a stable signature type, so the compiled kernel is
# reused from the on-disk cache across processes
_kernel_jit = numba.njit(cache=True)(_kernel)


def _is_cfunc(fn) -> bool:
    return isinstance(fn, numba.core.ccallback.CFunc)


def integrate_path(theta, extra, mu, lam, scale, r_start, r_out, rtol=1e-11, atol=1e-12):
    """Run the kernel, choosing the compiled path when possible.

    Returns an ``(n, 3)`` array of ``(phi, ln rho, int u^2 theta)``.
    """
    r_out = np.ascontiguousarray(r_out, dtype=float)
    out = np.empty((r_out.shape[0], 3))
    if _is_cfunc(theta) and (extra is None or _is_cfunc(extra)):
        status = _kernel_jit(theta, _zero if extra is None else extra, float(mu), float(lam),
                             float(scale), float(r_start), r_out, rtol, atol, out)
    else:
        th = theta._pyfunc if _is_cfunc(theta) else theta
        ex = (lambda r: 0.0) if extra is None else (extra._pyfunc if _is_cfunc(extra) else extra)
        status = _kernel(th, ex, float(mu), float(lam), float(scale), float(r_start), r_out, rtol, atol, out)
    if status == TOO_MANY_STEPS:
        raise ArithmeticError(f"radial integration exceeded {MAX_STEPS} steps (mu={mu}, lam={lam})")
    if status == NOT_FINITE:
        raise ArithmeticError(f"radial integration produced non-finite values (mu={mu}, lam={lam}); check the profile")
    return out
