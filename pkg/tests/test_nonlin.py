import math

import numpy as np
import pytest

from hierarchylab import nonlin
from hierarchylab.errors import NotKStarZeroClass, OutOfRange, UnsupportedOrder


def test_eval_examples(relu, tanh):
    assert nonlin.eval(relu, 2.0, 0) == 2.0
    assert nonlin.eval(relu, -1.0, 1) == 0.0
    assert nonlin.eval(tanh, 0.0, 1) == 1.0


def test_tanh_taylor_data(tanh):
    assert tanh.sigma1 == 1.0
    assert tanh.sigma3 == pytest.approx(-1.0 / 3.0, abs=1e-15)
    assert tanh.smooth
    assert nonlin.taylor_a(tanh) == pytest.approx(2.0)


def test_tanh_like_taylor_a():
    nl = nonlin.tanh_like([lambda z: 2 * np.tanh(z)], sigma1=2.0, sigma3=-1.0)
    assert nonlin.taylor_a(nl) == pytest.approx(3.0)


def test_taylor_a_rejects_homog(relu):
    with pytest.raises(NotKStarZeroClass):
        nonlin.taylor_a(relu)


@pytest.mark.parametrize("ap, am", [(1.0, 1.0), (0.0, 0.0), (-0.5, -0.5)])
def test_homog_constraints(ap, am):
    with pytest.raises(OutOfRange):
        nonlin.homog1(ap, am)


def test_tanh_derivatives_match_closed_forms(tanh):
    z = np.linspace(-4, 4, 41)
    t = np.tanh(z)
    s2 = 1 - t**2
    np.testing.assert_allclose(nonlin.eval(tanh, z, 1), s2, atol=1e-14)
    np.testing.assert_allclose(nonlin.eval(tanh, z, 2), -2 * t * s2, atol=1e-14)
    np.testing.assert_allclose(nonlin.eval(tanh, z, 3), s2 * (6 * t**2 - 2), atol=1e-13)


def test_tanh_high_order_supported(tanh):
    # d^6 tanh at 0 is 0 by oddness, d^5 tanh(0) = 16
    assert nonlin.eval(tanh, 0.0, 5) == pytest.approx(16.0)
    assert nonlin.eval(tanh, 0.0, 6) == pytest.approx(0.0, abs=1e-12)


def test_unsupported_order(tanh):
    with pytest.raises(UnsupportedOrder):
        nonlin.eval(tanh, 0.1, tanh.max_order + 1)


def test_tanh_like_refuses_high_order_finite_differences():
    nl = nonlin.tanh_like([np.sin, np.cos])
    assert nonlin.eval(nl, 0.3, 1) == pytest.approx(math.cos(0.3))
    with pytest.raises(UnsupportedOrder):
        nonlin.eval(nl, 0.3, 4)


def test_homog_kink_convention(relu):
    lk = nonlin.leaky_relu(0.2)
    assert nonlin.eval(lk, 0.0, 1) == 1.0
    assert nonlin.eval(relu, 0.0, 2) == 0.0


def test_from_config():
    nl = nonlin.from_config({"kind": "leaky_relu", "a_plus": 1.0, "a_minus": 0.1})
    assert (nl.a_plus, nl.a_minus) == (1.0, 0.1)
    assert nonlin.from_config({"kind": "tanh"}).kind == nonlin.TANH
    with pytest.raises(OutOfRange):
        nonlin.from_config({"kind": "gelu"})


def test_kstar_zero_candidate(tanh, relu):
    assert nonlin.is_kstar_zero_candidate(tanh)
    assert not nonlin.is_kstar_zero_candidate(relu)
