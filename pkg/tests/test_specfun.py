import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covquant.errors import NonConvergence
from covquant.quadrature import PhaseGrid, gauss_laguerre
from covquant.specfun import (SeriesControl, hyp1f1, laguerre, laguerre_table, log_factorials,
                              log_gamma, log_hyp1f1)


def _laguerre_exact(n, alpha, t):
    # explicit coefficients in exact rationals
    t = Fraction(t)
    total = Fraction(0)
    for k in range(n + 1):
        total += Fraction(math.comb(n + alpha, n - k) * (-1) ** k, math.factorial(k)) * t ** k
    return float(total)


def test_laguerre_low_orders():
    assert laguerre(0, 0, 5.0) == 1.0
    for t in (0.0, 0.3, 7.5):
        assert laguerre(1, 0, t) == pytest.approx(1.0 - t, abs=1e-15)


def test_laguerre_against_exact_coefficients():
    assert laguerre(4, 2, 1.3) == pytest.approx(_laguerre_exact(4, 2, "1.3"), rel=1e-14)
    assert laguerre(9, 3, 6.25) == pytest.approx(_laguerre_exact(9, 3, "6.25"), rel=1e-12)


def test_laguerre_frozen_value():
    # mpmath.laguerre(7, 0.5, 3.3)
    assert laguerre(7, 0.5, 3.3) == pytest.approx(-0.81220080857142814622, rel=1e-13)


def test_laguerre_rejects_nonfinite():
    with pytest.raises(ValueError):
        laguerre(3, 0, float("nan"))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 39), alpha=st.integers(0, 6), t=st.floats(0.0, 50.0))
def test_laguerre_recurrence(n, alpha, t):
    tab = laguerre_table(n + 1, alpha, t)
    lhs = (n + 1) * tab[n + 1]
    rhs = (2 * n + 1 + alpha - t) * tab[n] - (n + alpha) * tab[n - 1]
    scale = max(abs(lhs), abs((2 * n + 1 + alpha - t) * tab[n]), abs((n + alpha) * tab[n - 1]), 1e-300)
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_laguerre_scale_is_linear():
    t = np.array([0.5, 40.0, 300.0])
    plain = laguerre_table(12, 1, t[:2])
    scaled = laguerre_table(12, 1, t[:2], scale=np.exp(-t[:2] / 2))
    assert np.allclose(scaled, plain * np.exp(-t[:2] / 2), rtol=1e-13, atol=0)
    big = laguerre_table(40, 0, t[2:], scale=np.exp(-t[2:] / 2))
    assert np.all(np.isfinite(big))


def test_laguerre_orthogonality():
    u, w = gauss_laguerre(40)
    for alpha in (0, 2):
        tab = laguerre_table(15, alpha, u)
        gram = (tab * (w * u ** alpha)) @ tab.T
        norms = np.array([math.gamma(n + alpha + 1) / math.factorial(n) for n in range(16)])
        assert np.max(np.abs(gram - np.diag(norms)) / norms[:, None]) < 1e-8


def test_log_gamma_examples():
    assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
    assert log_gamma(1.5) == pytest.approx(math.log(math.sqrt(math.pi) / 2), rel=1e-13)
    assert log_gamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-14)


@pytest.mark.parametrize("x, ref", [
    (0.5, 0.5723649429247000870717),
    (3.25, 0.9358019311087253582585),
    (10.5, 13.94062521940376363316),
    (57.5, 174.3721298187451532268),
])
def test_log_gamma_frozen_mpmath(x, ref):
    assert log_gamma(x) == pytest.approx(ref, rel=1e-13)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.5, 200.0))
def test_log_gamma_functional_equation(x):
    assert abs(log_gamma(x + 1.0) - log_gamma(x) - math.log(x)) <= 1e-12 * max(1.0, abs(log_gamma(x + 1)))


def test_log_gamma_rejects_nonpositive():
    with pytest.raises(ValueError):
        log_gamma(0.0)
    with pytest.raises(ValueError):
        log_gamma(-1.5)


def test_log_factorials():
    lf = log_factorials(200)
    assert lf[0] == 0.0
    assert lf[10] == pytest.approx(math.log(3628800.0), rel=1e-14)
    assert lf[200] == pytest.approx(math.lgamma(201.0), rel=1e-13)


def test_hyp1f1_trivial():
    assert hyp1f1(2.3, 4.1, 0.0) == 1.0
    for t in (0.0, 1.0, 12.5):
        assert hyp1f1(3.5, 3.5, t) == pytest.approx(math.exp(t), rel=1e-14)


def test_hyp1f1_brute_force():
    from mpmath import mp, mpf, nsum, rf, factorial
    mp.dps = 30
    ref = float(nsum(lambda k: rf(2, k) / rf(3, k) * mpf("1.7") ** k / factorial(k), [0, 10000]))
    res = hyp1f1(2.0, 3.0, 1.7, full_output=True)
    assert res.value == pytest.approx(ref, rel=1e-14)
    assert res.rel_err <= 1e-15 and res.terms > 1


@pytest.mark.parametrize("a, b, t, ref", [
    (1.5, 2.0, 0.3, 0.2277422640950161326291),
    (3.0, 5.0, 10.0, 7.464203134857492279949),
    (0.5, 1.5, 25.0, 21.10909321386813476432),
    (6.0, 11.0, 400.0, 380.2970229932704962768),
])
def test_log_hyp1f1_frozen(a, b, t, ref):
    assert log_hyp1f1(a, b, t) == pytest.approx(ref, rel=1e-13)


def test_hyp1f1_nonconvergence():
    with pytest.raises(NonConvergence):
        hyp1f1(1.5, 2.0, 50.0, SeriesControl(rel_tol=1e-16, max_terms=5))


def test_series_control_validation():
    with pytest.raises(ValueError):
        SeriesControl(rel_tol=0.0)
    with pytest.raises(ValueError):
        SeriesControl(max_terms=0)


def test_phase_grid_exactness():
    g = PhaseGrid(8, 4)
    t, w = g.radial(1.0)
    for k in range(2 * 8):
        assert np.sum(w * np.exp(-t) * t ** k) == pytest.approx(math.factorial(k), rel=1e-11)
    assert g.degree == 15
