"""Self-contained special functions used by the closed-form densities.

Everything here is scalar, double precision, and free of external
dependencies: the Gauss hypergeometric series on [0, 1), the Bessel
function J0, the modified Bessel function I0, and the gamma function at
integer and half-integer arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NumericError

__all__ = [
    "SeriesControl",
    "gauss_2f1",
    "bessel_j0",
    "bessel_i0",
    "gamma_half",
]


@dataclass(frozen=True)
class SeriesControl:
    """Convergence policy for the power series evaluated in this module."""

    rel_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self) -> None:
        if self.rel_tol <= 0:
            raise DomainError("rel_tol must be positive")
        if self.max_terms < 1:
            raise DomainError("max_terms must be at least 1")


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and x == math.floor(x)


def gauss_2f1(a: float, b: float, c: float, z: float,
              control: SeriesControl | None = None) -> float:
    """Gauss hypergeometric function F(a, b; c; z) for 0 <= z < 1.

    The series sum_k (a)_k (b)_k / (c)_k * z^k / k! is summed directly.
    If ``a`` or ``b`` is a nonpositive integer the series terminates and
    is summed exactly as a polynomial, ignoring the term cap.

    Near z = 1 the series converges slowly (geometrically with ratio z),
    so callers probing close to the support boundary must supply a
    ``control`` with a generous ``max_terms``.
    """
    ctrl = control or SeriesControl()
    if not 0.0 <= z < 1.0:
        raise DomainError(f"gauss_2f1 requires 0 <= z < 1, got z={z}")
    if _is_nonpositive_int(c):
        raise DomainError(f"gauss_2f1 pole: c={c} is a nonpositive integer")

    n_exact = None
    if _is_nonpositive_int(a) or _is_nonpositive_int(b):
        stops = [int(-v) for v in (a, b) if _is_nonpositive_int(v)]
        n_exact = min(stops)  # series terminates after z^n_exact

    total = 1.0
    term = 1.0
    k = 0
    while True:
        if n_exact is not None and k >= n_exact:
            return total
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total += term
        k += 1
        if n_exact is None:
            if abs(term) <= ctrl.rel_tol * abs(total):
                return total
            if k >= ctrl.max_terms:
                raise NumericError(
                    f"gauss_2f1 did not converge within {ctrl.max_terms} terms "
                    f"(a={a}, b={b}, c={c}, z={z}, last term {term:.3e})")


# Hankel asymptotic coefficients for J0: A[j] = prod_{i<=j} (2i-1)^2 / (j! 8^j).
_J0_SWITCH = 12.0
_J0_ASY = [1.0]
for _j in range(1, 17):
    _J0_ASY.append(_J0_ASY[-1] * (2 * _j - 1) ** 2 / (8.0 * _j))


def bessel_j0(x: float) -> float:
    """Bessel function J0(x) for x >= 0, accurate to ~1e-12 on [0, 100].

    Ascending series up to the switch point, Hankel asymptotic expansion
    beyond it.
    """
    if x < 0:
        raise DomainError("bessel_j0 requires x >= 0")
    if x <= _J0_SWITCH:
        q = 0.25 * x * x
        total = 1.0
        term = 1.0
        k = 0
        while True:
            k += 1
            term *= -q / (k * k)
            total += term
            if abs(term) < 1e-18 * (abs(total) + 1.0):
                return total
    p = 0.0
    q = 0.0
    xk = 1.0
    for j, aj in enumerate(_J0_ASY):
        contrib = aj / xk
        if j % 2 == 0:
            p += contrib if j % 4 == 0 else -contrib
        else:
            q += -contrib if j % 4 == 1 else contrib
        xk *= x
    omega = x - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(omega) - q * math.sin(omega))


def bessel_i0(x: float, control: SeriesControl | None = None) -> float:
    """Modified Bessel function I0(x); even in x, >= 1 everywhere."""
    if abs(x) > 700.0:
        raise NumericError(f"bessel_i0 overflow for |x|={abs(x)} > 700")
    ctrl = control or SeriesControl(rel_tol=1e-16, max_terms=600)
    q = 0.25 * x * x
    total = 1.0
    term = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        total += term
        if term <= ctrl.rel_tol * total:
            return total
        if k >= ctrl.max_terms:
            raise NumericError(f"bessel_i0 series did not converge for x={x}")


def bessel_i1(x: float) -> float:
    """Modified Bessel function I1(x) (odd in x)."""
    if abs(x) > 700.0:
        raise NumericError(f"bessel_i1 overflow for |x|={abs(x)} > 700")
    q = 0.25 * x * x
    total = 0.5 * x
    term = 0.5 * x
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + 1))
        total += term
        if abs(term) <= 1e-16 * abs(total) + 1e-300:
            return total
        if k >= 600:
            raise NumericError(f"bessel_i1 series did not converge for x={x}")


_SQRT_PI = math.sqrt(math.pi)


def gamma_half(two_a: int) -> float:
    """Gamma(two_a / 2) by exact recursion from Gamma(1/2) and Gamma(1)."""
    if two_a < 1:
        raise DomainError("gamma_half requires two_a >= 1")
    value = _SQRT_PI if two_a % 2 == 1 else 1.0
    arg = two_a % 2 if two_a % 2 == 1 else 2  # 2*argument of the base case
    while arg < two_a:
        value *= arg / 2.0
        arg += 2
    return value
