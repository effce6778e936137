import math

import numpy as np
import pytest
from scipy import special

from randflight import (DomainError, NumericError, SeriesControl, bessel_i0,
                        bessel_j0, gamma_half, gauss_2f1)


def hyp_series(a, b, c, z, terms=400):
    """Oracle: plain term-by-term summation of the hypergeometric series."""
    total, term = 1.0, 1.0
    for k in range(terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total += term
    return total


def test_2f1_b_zero_is_one():
    for a, c, z in [(0.7, 1.3, 0.2), (2.5, 0.5, 0.9)]:
        assert gauss_2f1(a, 0.0, c, z) == 1.0


def test_2f1_against_summation_oracle():
    assert hyp_series(0.5, 1.0, 1.0, 0.25) == pytest.approx(0.75**-0.5, rel=1e-12)
    assert gauss_2f1(0.5, 1.0, 1.0, 0.25) == pytest.approx(1.1547005383792515,
                                                           rel=1e-12)
    # log identity F(1,1;2;z) = -log(1-z)/z
    assert gauss_2f1(1.0, 1.0, 2.0, 0.5) == pytest.approx(1.3862943611198906,
                                                          rel=1e-12)


def test_2f1_binomial_identity():
    for z in np.arange(0.0, 0.95, 0.1):
        val = gauss_2f1(0.5, 1.0, 1.0, z) * math.sqrt(1.0 - z)
        assert val == pytest.approx(1.0, abs=1e-10)


def test_2f1_terminating_polynomial_exact():
    # b = -2 terminates: 1 - 2az/c + a(a+1)z^2/(c(c+1))
    a, c = 1.5, 2.5
    for z in (0.0, 0.3, 0.9):
        exact = 1.0 - 2 * a * z / c + a * (a + 1) * z * z / (c * (c + 1))
        assert gauss_2f1(a, -2.0, c, z) == pytest.approx(exact, abs=1e-14)
    # termination ignores the term cap
    ctrl = SeriesControl(max_terms=1)
    assert gauss_2f1(a, -2.0, c, 0.5, ctrl) == pytest.approx(
        1.0 - 2 * a * 0.5 / c + a * (a + 1) * 0.25 / (c * (c + 1)), abs=1e-14)


def test_2f1_against_scipy():
    rng = np.random.default_rng(1)
    ctrl = SeriesControl(rel_tol=1e-14, max_terms=100_000)
    for _ in range(40):
        a = rng.uniform(0.1, 3.0)
        b = rng.uniform(0.1, 3.0)
        c = rng.uniform(0.5, 4.0)
        z = rng.uniform(0.0, 0.97)
        assert gauss_2f1(a, b, c, z, ctrl) == pytest.approx(
            float(special.hyp2f1(a, b, c, z)), rel=1e-9)


def test_2f1_domain_errors():
    with pytest.raises(DomainError):
        gauss_2f1(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        gauss_2f1(1.0, 1.0, 1.0, -0.1)
    with pytest.raises(DomainError):
        gauss_2f1(1.0, 1.0, -2.0, 0.5)
    with pytest.raises(NumericError):
        gauss_2f1(0.5, 1.0, 1.0, 0.999, SeriesControl(max_terms=50))


def test_j0_basics():
    assert bessel_j0(0.0) == 1.0
    assert abs(bessel_j0(2.404825557695773)) < 1e-10
    with pytest.raises(DomainError):
        bessel_j0(-1.0)


def test_j0_first_zero_by_series_bisection():
    # oracle: bisect the ascending series between 2 and 3
    def series(x, terms=40):
        total, term, q = 1.0, 1.0, 0.25 * x * x
        for k in range(1, terms):
            term *= -q / (k * k)
            total += term
        return total

    lo, hi = 2.0, 3.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if series(lo) * series(mid) <= 0:
            hi = mid
        else:
            lo = mid
    assert lo == pytest.approx(2.404825557695773, abs=1e-12)
    assert abs(bessel_j0(lo)) < 1e-8


def test_j0_quadrature_identity():
    # J0(x) = (1/pi) int_0^pi cos(x sin(phi)) dphi, composite trapezoid
    phi = np.linspace(0.0, np.pi, 4001)
    for x in np.linspace(0.0, 20.0, 41):
        ref = np.trapezoid(np.cos(x * np.sin(phi)), phi) / np.pi
        assert bessel_j0(x) == pytest.approx(ref, abs=1e-8)


def test_j0_matches_scipy_to_ten_digits():
    for x in np.linspace(0.0, 100.0, 301):
        ref = float(special.j0(x))
        assert abs(bessel_j0(x) - ref) < 1e-10


def test_j0_bounded():
    rng = np.random.default_rng(2)
    xs = rng.uniform(0.0, 100.0, 200)
    assert all(abs(bessel_j0(x)) <= 1.0 + 1e-12 for x in xs)


def test_i0_series_oracle_and_symmetry():
    def series(x, terms=60):
        total, term, q = 1.0, 1.0, 0.25 * x * x
        for k in range(1, terms):
            term *= q / (k * k)
            total += term
        return total

    assert bessel_i0(0.0) == 1.0
    assert series(1.0) == pytest.approx(1.2660658777520084, rel=1e-13)
    assert bessel_i0(1.0) == pytest.approx(1.2660658777520084, rel=1e-12)
    assert bessel_i0(-1.0) == bessel_i0(1.0)
    assert bessel_i0(3.7) == pytest.approx(float(special.i0(3.7)), rel=1e-12)
    assert bessel_i0(100.0) >= 1.0


def test_i0_overflow():
    with pytest.raises(NumericError):
        bessel_i0(701.0)


def test_gamma_half():
    assert gamma_half(2) == 1.0
    assert gamma_half(1) == pytest.approx(math.sqrt(math.pi), rel=1e-15)
    assert gamma_half(5) == pytest.approx(1.3293403881791372, rel=1e-14)
    for two_a in range(1, 14):
        assert gamma_half(two_a) == pytest.approx(math.gamma(two_a / 2),
                                                  rel=1e-13)
    with pytest.raises(DomainError):
        gamma_half(0)
