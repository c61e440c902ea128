import mpmath as mp
import numpy as np
import pytest

from dnlab.bessel import bessel_i, bessel_i_eval, bessel_j, bessel_j0_zero, bessel_j_eval, i_ratio, j_ratio

ARGS = [1e-6, 0.1, 0.5, 1.0, 2.5, 4.0, 4.5, 8.0, 15.0, 30.0]


@pytest.mark.parametrize("n", [0, 1, 2, 5, 9])
@pytest.mark.parametrize("s", ARGS)
def test_modified_bessel_against_mpmath(n, s):
    ref = float(mp.besseli(n, s))
    assert bessel_i(n, s) == pytest.approx(ref, rel=1e-13, abs=1e-300)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 9])
@pytest.mark.parametrize("s", ARGS[:-1])
def test_bessel_j_against_mpmath(n, s):
    ref = float(mp.besselj(n, s))
    # absolute error relative to the envelope near zeros
    assert abs(bessel_j(n, s) - ref) <= 1e-13 * max(abs(ref), 1e-3)


def test_vectorised_matches_scalar():
    s = np.linspace(0.0, 10.0, 41)
    assert np.allclose(bessel_i(1, s), [bessel_i(1, x) for x in s], rtol=1e-15)
    assert np.allclose(bessel_j(0, s), [bessel_j(0, x) for x in s], rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("s", [0.3, 1.0, 3.0, 12.0])
def test_ratios(s):
    assert i_ratio(0, s) == pytest.approx(float(mp.besseli(1, s) / mp.besseli(0, s)), rel=1e-13)
    assert j_ratio(2, s) == pytest.approx(float(mp.besselj(3, s) / mp.besselj(2, s)), rel=1e-12)


def test_derivatives():
    e = bessel_i_eval(0, 1.3)
    assert e.derivative == pytest.approx(float(mp.besseli(1, 1.3)), rel=1e-13)
    e = bessel_j_eval(2, 2.1)
    assert e.derivative == pytest.approx(float(mp.diff(lambda x: mp.besselj(2, x), 2.1)), rel=1e-12)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_j0_zeros(k):
    assert bessel_j0_zero(k) == pytest.approx(float(mp.besseljzero(0, k)), abs=1e-12)
