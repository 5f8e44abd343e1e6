"""Complex gamma function and closed-form symbols of the Cesaro-type fixtures."""

from __future__ import annotations

import cmath
import math

import numpy as np

# Lanczos approximation, g = 671/128 with 14 coefficients (the set published
# in Numerical Recipes, 3rd ed., gamma function chapter); relative error below 1e-15 for
# Re z > 0.
LANCZOS_G = 671.0 / 128.0
LANCZOS_C0 = 0.999999999999997092
LANCZOS_COEF = (
    57.1562356658629235,
    -59.5979603554754912,
    14.1360979747417471,
    -0.491913816097620199,
    0.339946499848118887e-4,
    0.465236289270485756e-4,
    -0.983744753048795646e-4,
    0.158088703224912494e-3,
    -0.210264441724104883e-3,
    0.217439618115212643e-3,
    -0.164318106536763890e-3,
    0.844182239838527433e-4,
    -0.261908384015814087e-4,
    0.368991826595316234e-5,
)
_SQRT_2PI = 2.5066282746310005


class GammaPoleError(ValueError):
    pass


def _check_pole(z: complex):
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        raise GammaPoleError(f"gamma has a pole at z = {z.real:g}")


def _loggamma_right(z: complex) -> complex:
    # valid for Re z >= 0.5
    ser = LANCZOS_C0
    y = z
    for c in LANCZOS_COEF:
        y += 1
        ser += c / y
    tmp = z + LANCZOS_G
    return (z + 0.5) * cmath.log(tmp) - tmp + cmath.log(_SQRT_2PI * ser / z)


def complex_loggamma(z) -> complex:
    """log Gamma(z), not necessarily on the principal branch for Re z < 0.5;
    ``exp`` of the result is Gamma(z)."""
    z = complex(z)
    _check_pole(z)
    if z.real < 0.5:
        # reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        return cmath.log(math.pi) - cmath.log(cmath.sin(math.pi * z)) - _loggamma_right(1 - z)
    return _loggamma_right(z)


def complex_gamma(z) -> complex:
    z = complex(z)
    _check_pole(z)
    if z.real < 0.5:
        return math.pi / (cmath.sin(math.pi * z) * complex_gamma(1 - z))
    return cmath.exp(_loggamma_right(z))


def cesaro_gamma_symbol(alpha: float, n: int, t: float) -> complex:
    """Gamma(alpha+1) Gamma(n/2 + i t) / Gamma(alpha + n/2 + i t).

    Computed through log-gamma so that large |t| does not underflow."""
    if not alpha > 0 or n < 1:
        raise ValueError("need alpha > 0 and n >= 1")
    z = complex(n / 2.0, t)
    lg = complex_loggamma(alpha + 1) + complex_loggamma(z) - complex_loggamma(z + alpha)
    return cmath.exp(lg)


def qcesaro_symbol(q: float, s) -> np.ndarray | complex:
    """Scalar symbol of the q-Cesaro operator (1-q) sum_k q^k f(q^k x).

    For 0 < q < 1 this is (1-q) / (1 - sqrt(q) q^(-is)).  For -1 < q < 0 it is
    the branch (1-q) / (1 + sqrt(-q) (-q)^(-is)) = phi_plus + phi_minus; see
    :func:`qcesaro_branches` for the even/odd split.
    """
    if not 0 < abs(q) < 1:
        raise ValueError("need 0 < |q| < 1")
    s = np.asarray(s, dtype=float)
    p = abs(q)
    z = np.exp(-1j * s * math.log(p))
    sign = -1.0 if q > 0 else 1.0
    out = (1 - q) / (1 + sign * math.sqrt(p) * z)
    return complex(out) if out.ndim == 0 else out


def qcesaro_branches(q: float, s) -> dict:
    """Even/odd parts of the discrete symbol sum and the two eigenvalue
    branches phi = phi_plus + phi_minus and phi_star = phi_plus - phi_minus.

    phi_plus sums the even powers k = 2m, phi_minus the odd powers."""
    if not 0 < abs(q) < 1:
        raise ValueError("need 0 < |q| < 1")
    s = np.asarray(s, dtype=float)
    p = abs(q)
    z = np.exp(-1j * s * math.log(p))  # |q|^(-is)
    r = math.sqrt(p) * z  # |q|^(1/2 - is): ratio between consecutive k
    sgn = 1.0 if q > 0 else -1.0
    plus = (1 - q) / (1 - r * r)
    minus = (1 - q) * sgn * r / (1 - r * r)
    return {"plus": plus, "minus": minus, "phi": plus + minus, "phi_star": plus - minus}
