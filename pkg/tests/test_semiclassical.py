import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from bipolarqt import potentials as pots
from bipolarqt import semiclassical as sc

E4 = 79.875


@pytest.mark.parametrize("energy,edge", [(0.5, 1.0), (10.5, math.sqrt(21.0))])
def test_harmonic_turning_points(energy, edge):
    lo, hi = sc.turning_points(pots.harmonic(), energy)
    assert lo == pytest.approx(-edge, abs=1e-14) and hi == pytest.approx(edge, abs=1e-14)


def test_morse_turning_points(morse_pot):
    lo, hi = sc.turning_points(morse_pot, E4)
    w = math.sqrt(E4 / 200.0)
    assert lo == pytest.approx(-math.log(1 + w), abs=1e-12)
    assert hi == pytest.approx(-math.log(1 - w), abs=1e-12)


@pytest.mark.parametrize("n", [0, 3, 10])
def test_harmonic_action_and_frequency(n):
    data = sc.semiclassical_data(pots.harmonic(), n + 0.5)
    assert data.action == pytest.approx(2 * math.pi * (n + 0.5), rel=1e-12)
    assert data.omega == pytest.approx(1.0, rel=1e-9)
    assert data.flux == pytest.approx(1 / (2 * math.pi), rel=1e-9)
    assert data.x0 == pytest.approx(0.0, abs=1e-12)


def test_morse_action_frequency(morse_pot):
    data = sc.semiclassical_data(morse_pot, E4)
    # Morse WKB quantization is exact
    assert data.action == pytest.approx(2 * math.pi * 4.5, rel=1e-10)
    # omega(E) = alpha sqrt(2 (D - E) / m)
    assert data.omega == pytest.approx(math.sqrt(2 * (200.0 - E4)), rel=1e-8)
    assert data.omega == pytest.approx(15.5, rel=1e-8)


def test_morse_median_against_direct_bisection(morse_pot):
    lo, hi = sc.turning_points(morse_pot, E4)
    p = lambda x: math.sqrt(max(2 * (E4 - morse_pot(x)), 0.0))
    total = integrate.quad(p, lo, hi, epsabs=1e-13, limit=200)[0]
    oracle = optimize.brentq(lambda t: integrate.quad(p, lo, t, epsabs=1e-13, limit=200)[0] - total / 2,
                             lo, hi, xtol=1e-14)
    assert sc.median_action_point(morse_pot, E4) == pytest.approx(oracle, abs=1e-8)
    # the well is softer on the right, so the median is shifted outward
    assert oracle > 0


def test_quartic_median_is_symmetric():
    xs = np.linspace(-3, 3, 1201)
    v = pots.tabulated(xs, xs ** 4)
    assert sc.median_action_point(v, 1.0) == pytest.approx(0.0, abs=1e-9)


def test_action_increases_and_derivative_is_period(morse_pot):
    es = np.linspace(5.0, 180.0, 12)
    js = [sc.enclosed_action(morse_pot, e) for e in es]
    assert np.all(np.diff(js) > 0)
    e, h = 60.0, 1e-3
    djde = (sc.enclosed_action(morse_pot, e + h) - sc.enclosed_action(morse_pot, e - h)) / (2 * h)
    assert djde == pytest.approx(2 * math.pi / sc.classical_frequency(morse_pot, e), rel=1e-6)


def test_lm_area_equals_action():
    data = sc.semiclassical_data(pots.harmonic(), 0.5)
    lm = sc.sample_lm(data, np.linspace(-1, 1, 20001))
    assert lm.area() == pytest.approx(math.pi, abs=1e-4)
    assert data.p_sc(1.5) == 0.0
    np.testing.assert_array_equal(lm.lower, -lm.upper)
    assert lm.table(-1).y.max() <= 0


def test_turning_point_errors(morse_pot):
    with pytest.raises(sc.TurningPointError):
        sc.turning_points(morse_pot, 250.0)
    with pytest.raises(sc.TurningPointError):
        sc.turning_points(pots.harmonic(), -1.0)
    xs = np.linspace(-3, 3, 1201)
    double = pots.tabulated(xs, (xs ** 2 - 1) ** 2)
    # below the barrier only the well holding the minimum is returned
    lo, hi = sc.turning_points(double, 0.5)
    assert (lo > 0) == (hi > 0)


@given(st.floats(0.2, 30.0), st.floats(0.3, 4.0))
@settings(max_examples=20, deadline=None)
def test_harmonic_action_scales_with_energy(energy, k):
    v = pots.harmonic(k=k)
    assert sc.enclosed_action(v, energy) == pytest.approx(2 * math.pi * energy / math.sqrt(k), rel=1e-10)
