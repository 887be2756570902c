"""Quadrature engine against closed forms and frozen mpmath references.

Reference values come from tests/oracles/generate.py (30-digit mpmath
adaptive quadrature, independent of this package).
"""

import math

import numpy as np
import pytest

from hierarchylab import gauss, nonlin
from hierarchylab.errors import NonFinite, NotPSD, SingularKernel

# <tanh(z)^2> at K = 0.04
TANH_SQ_004 = 0.0371175872113697660029
# E[s(u) s(v)] for the 1-homogeneous map (1, 0.2) at (Kaa, Kab, Kbb) = (1.3, 0.4, 0.9)
LEAKY_PAIR = 0.261800644120630760538
# ReLU E[s(u) s(v)] at (2, 0.7, 1.3)
RELU_PAIR = 0.456215319433991640754

TANH_T = {
    # (K, i, j): T_{i,j} for tanh, C_W = 1
    (0.5, 0, 2): 0.0648796877193894716,
    (0.5, 0, 3): 0.0131939032627484568,
    (0.5, 0, 4): 0.0106586541924241921,
    (0.5, 2, 2): 0.195032624891642525,
    (0.5, 2, 3): 0.140688318096299897,
    (0.5, 4, 1): -1.89163925652598128,
    (0.5, 4, 2): 0.147536127438158583,
    (0.01, 0, 2): 0.000185033758530606598,
    (0.01, 0, 3): 6.72481953983478940e-6,
    (0.01, 0, 4): 4.55817191184256599e-7,
    (0.01, 2, 2): 0.0712134412815467769,
    (0.01, 2, 3): 0.00487697160666510836,
    (0.01, 4, 1): -14.7323664095437811,
    (0.01, 4, 2): 20.0326052419741484,
}


def test_expect1_examples(relu):
    assert gauss.expect1(lambda z: z**2, 1.5) == pytest.approx(1.5, rel=1e-14)
    assert gauss.expect1(lambda z: nonlin.eval(relu, z) ** 2, 2.0, piecewise=True) == pytest.approx(1.0, rel=1e-13)
    assert gauss.expect1(lambda z: np.tanh(z) ** 2, 0.04) == pytest.approx(TANH_SQ_004, rel=1e-12)


def test_expect1_zero_variance():
    assert gauss.expect1(lambda z: np.cos(z) + 2, 0.0) == 3.0


@pytest.mark.parametrize("nodes", [4, 16, 64, 129])
def test_expect1_exact_on_monomials(nodes):
    K = 0.7
    # z^m at the outer nodes overflows doubles beyond degree ~200
    for m in range(0, min(2 * nodes, 200), 3):
        ref = 0.0 if m % 2 else K ** (m // 2) * math.prod(range(m - 1, 0, -2))
        got = gauss.expect1(lambda z: z**m, K, nodes=nodes)
        if ref == 0:
            assert abs(got) <= 1e-12 * K ** (m / 2) * math.prod(range(m, 0, -2))
        else:
            assert got == pytest.approx(ref, rel=1e-12)


def test_expect1_nonfinite():
    with pytest.raises(NonFinite):
        gauss.expect1(lambda z: np.where(z > 3, np.inf, 0.0), 1.0)


def test_weak_deriv_examples(relu):
    assert gauss.weak_deriv_expect(lambda z: z**2, 1.0, 2) == pytest.approx(2.0, rel=1e-12)
    assert gauss.weak_deriv_expect(lambda z: z, 4.0, 1) == pytest.approx(1.0, rel=1e-12)
    sq = lambda z: nonlin.eval(relu, z) ** 2  # noqa: E731
    for K in (0.3, 1.0, 7.5):
        assert gauss.weak_deriv_expect(sq, K, 2, piecewise=True) == pytest.approx(1.0, rel=1e-10)


def test_weak_deriv_singular():
    with pytest.raises(SingularKernel):
        gauss.weak_deriv_expect(lambda z: z, 0.0, 1)


@pytest.mark.parametrize("K", [0.05, 0.6, 2.5])
def test_stein_identity(K):
    f = lambda z: np.sin(z) * np.exp(-0.1 * z**2) + z**3  # noqa: E731
    lhs = gauss.weak_deriv_expect(f, K, 1)
    rhs = gauss.expect1(lambda z: z * f(z), K) / K
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_weak_matches_classical(i, tanh):
    for K in (0.2, 1.0, 3.0):
        weak = gauss.weak_deriv_expect(lambda z: nonlin.eval(tanh, z), K, i)
        direct = gauss.expect1(lambda z: nonlin.eval(tanh, z, i), K)
        assert abs(weak - direct) <= 1e-8


def test_expect2_examples(relu):
    s = lambda a, b: nonlin.eval(relu, a) * nonlin.eval(relu, b)  # noqa: E731
    assert gauss.expect2(lambda a, b: a * b, (1.0, 0.3, 1.0)) == pytest.approx(0.3, rel=1e-13)
    assert gauss.expect2(s, (1.7, 1.7, 1.7), piecewise=True) == pytest.approx(0.85, rel=1e-12)
    assert gauss.expect2(s, (1.0, 0.0, 1.0), piecewise=True) == pytest.approx(1 / (2 * math.pi), rel=1e-12)


def test_expect2_against_oracle():
    lk = nonlin.leaky_relu(0.2)
    s = lambda a, b: nonlin.eval(lk, a) * nonlin.eval(lk, b)  # noqa: E731
    assert gauss.expect2(s, (1.3, 0.4, 0.9), piecewise=True) == pytest.approx(LEAKY_PAIR, rel=1e-10)
    r = nonlin.relu()
    s = lambda a, b: nonlin.eval(r, a) * nonlin.eval(r, b)  # noqa: E731
    assert gauss.expect2(s, (2.0, 0.7, 1.3), piecewise=True) == pytest.approx(RELU_PAIR, rel=1e-10)


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_expect2_degenerate(sign, tanh):
    Kaa, Kbb = 0.8, 1.8
    kab = sign * math.sqrt(Kaa * Kbb)
    g = lambda a, b: np.tanh(a) * np.tanh(b)  # noqa: E731
    ref = gauss.expect1(lambda z: np.tanh(z) * np.tanh(sign * z * math.sqrt(Kbb / Kaa)), Kaa)
    assert gauss.expect2(g, (Kaa, kab, Kbb)) == pytest.approx(ref, rel=1e-12)


def test_expect2_not_psd():
    with pytest.raises(NotPSD):
        gauss.expect2(lambda a, b: a * b, (1.0, 1.1, 1.0))


@pytest.mark.parametrize("key, ref", list(TANH_T.items()))
def test_t_functional_tanh_oracle(key, ref, tanh):
    K, i, j = key
    assert gauss.t_functional(tanh, K, i, j, 1.0) == pytest.approx(ref, rel=1e-9)


def test_t_functional_relu(relu):
    assert gauss.t_functional(relu, 1.0, 0, 2, 2.0) == pytest.approx(5.0, rel=1e-12)
    for K in (0.1, 1.0, 4.0):
        assert gauss.t_functional(relu, K, 2, 1, 2.0) == pytest.approx(2.0, rel=1e-10)
        assert gauss.t_functional(relu, K, 0, 2, 2.0) == pytest.approx(5.0 * K**2, rel=1e-12)


@pytest.mark.parametrize("K", [0.01, 0.5, 3.0])
def test_t_functional_centered_vanishes(K, tanh, relu):
    assert abs(gauss.t_functional(tanh, K, 0, 1, 1.0)) < 1e-14
    assert abs(gauss.t_functional(relu, K, 0, 1, 2.0)) < 1e-14


def test_bracket_tanh_fast_path(tanh):
    # polynomial-in-tanh route against the Hermite identity at moderate K
    br = gauss.Bracket(tanh, 0.8)
    for a, b, m in [(2, 0, 2), (0, 2, 2), (1, 1, 1), (2, 0, 4), (0, 4, 0)]:
        f = lambda z, a=a, b=b: nonlin.eval(tanh, z) ** a * nonlin.eval(tanh, z, 1) ** b  # noqa: E731
        assert br(a, b, m) == pytest.approx(gauss.weak_deriv_expect(f, 0.8, m), rel=1e-9, abs=1e-12)


def test_rules_are_normalized():
    x, w = gauss.hermite_rule(40)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    assert (w * x**2).sum() == pytest.approx(1.0, rel=1e-13)
