"""Independent reference values used across the test suite."""
import math


def bisect(f, a, b, tol=1e-15):
    fa = f(a)
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
        if b - a < tol:
            break
    return 0.5 * (a + b)


def tan_root(branch: int = 0) -> float:
    """Positive root of ``tan z = 2 z`` on ``(branch pi, branch pi + pi/2)``; these
    are the zeros of ``J'_{1/2}``."""
    lo = branch * math.pi + (1.0 if branch == 0 else 1e-9)
    hi = branch * math.pi + math.pi / 2 - 1e-12
    return bisect(lambda z: math.sin(z) - 2 * z * math.cos(z), lo, hi)


Z_HALF = tan_root(0)          # 1.1655611852072...
LAMBDA_HALF = Z_HALF**2       # 1.3585...
