"""Property tests for the structural invariants."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from hierarchylab import _kernels_py, _rng, crit, derivs as d, gauss, hierarchy as h, homog, nonlin
from hierarchylab.cli import _num

TANH = nonlin.tanh()
RELU = nonlin.relu()

finite = st.floats(-20, 20, allow_nan=False)
variances = st.floats(1e-3, 10.0)
homog_pairs = st.tuples(st.floats(0.1, 3.0), st.floats(-3.0, 3.0)).filter(lambda p: abs(abs(p[0]) - abs(p[1])) > 1e-3)

fast = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@given(finite)
def test_tanh_derivative_identity(z):
    assert nonlin.eval(TANH, z, 1) == pytest.approx(1 - nonlin.eval(TANH, z, 0) ** 2, abs=1e-12)


@given(homog_pairs, finite, st.floats(1e-3, 1e3))
def test_homog_positive_scaling(p, z, lam):
    nl = nonlin.homog1(*p)
    assert nonlin.eval(nl, lam * z, 0) == pytest.approx(lam * nonlin.eval(nl, z, 0), rel=1e-12, abs=1e-300)


@fast
@given(variances, st.floats(-2, 2), st.floats(0.1, 2))
def test_stein_identity(K, a, b):
    f = lambda z: np.sin(b * z + a)  # noqa: E731
    lhs = gauss.weak_deriv_expect(f, K, 1)
    assert lhs == pytest.approx(gauss.expect1(lambda z: z * f(z), K) / K, rel=1e-10, abs=1e-12)


@fast
@given(variances)
def test_t01_vanishes(K):
    for nl in (TANH, RELU, nonlin.leaky_relu(0.3)):
        assert abs(gauss.t_functional(nl, K, 0, 1, 1.0)) < 1e-12


@fast
@given(variances, st.floats(-1, 1))
def test_expect2_degenerate(K, sign):
    s = 1.0 if sign >= 0 else -1.0
    g = lambda a, b: np.tanh(a) * np.tanh(b)  # noqa: E731
    uni = gauss.expect1(lambda z: s * np.tanh(z) ** 2, K)
    assert gauss.expect2(g, (K, s * K, K)) == pytest.approx(uni, rel=1e-10, abs=1e-14)


@fast
@given(homog_pairs, st.floats(1e-3, 10.0))
def test_homog_tuning_is_critical(p, K):
    nl = nonlin.homog1(*p)
    t = crit.tune_critical(nl)
    assert h.kernel_step(K, t.C_b, t.C_W, nl) == pytest.approx(K, rel=1e-9)
    assert crit.chi_parallel(nl, t.C_W, K) == pytest.approx(1.0, abs=1e-9)
    assert crit.chi_perp(nl, t.C_W, K) == pytest.approx(1.0, abs=1e-9)


@fast
@given(st.floats(0.0, 1.0))
def test_correlation_step_vs_quadrature(eps):
    p = homog.HomogParams(1.0, 0.0)
    _, kab, _ = h.kernel_pair_step((1.0, 1 - 2 * eps, 1.0), 0.0, p.C_W, RELU)
    new = homog.correlation_step(eps, p)
    assert new == pytest.approx(0.5 * (1 - kab), abs=1e-9)
    assert 0.0 <= new <= eps + 1e-15


@fast
@given(st.lists(st.integers(1, 500), min_size=0, max_size=8), st.floats(0.01, 5.0))
def test_relu_hierarchy_k4_nonnegative(widths, K):
    spec = h.NetworkSpec(n0=1, widths=tuple(widths), nl=RELU, input_x=(math.sqrt(K),))
    states = h.run_hierarchy(spec)
    assert all(s.k4 >= 0 for s in states)
    assert states[-1].K == pytest.approx(2 * K, rel=1e-10)
    closed = homog.kappa4_closed_form(spec.norm_sq_over_n0, widths, homog.HomogParams(1.0, 0.0))
    assert states[-1].k4 == pytest.approx(closed, rel=1e-9, abs=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=4).filter(lambda x: abs(x[0]) + abs(x[1]) > 0.1))
def test_swap_symmetry(x):
    y = list(x)
    y[0], y[1] = y[1], y[0]
    a, b = d.seed_state(x, 0.0, 1.0), d.seed_state(y, 0.0, 1.0)
    fa = d.DerivFourthState(a.ell)
    fb = d.DerivFourthState(b.ell)
    for _ in range(2):
        fa, fb = d.deriv_fourth_step(fa, a, 8, 1.0, TANH), d.deriv_fourth_step(fb, b, 8, 1.0, TANH)
        a, b = d.deriv_kernel_step(a, 0.0, 1.0, TANH), d.deriv_kernel_step(b, 0.0, 1.0, TANH)
    np.testing.assert_allclose(list(vars(a.swap()).values()), list(vars(b).values()), rtol=1e-12, atol=1e-15)
    sa = fa.swap()
    for k in d.CANONICAL:
        assert getattr(sa, k) == pytest.approx(getattr(fb, k), rel=1e-10, abs=1e-15)


@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_csv_number_round_trip(v):
    assert float(_num(v)) == v


@given(st.integers(0, 2**32), st.integers(1, 20000))
@settings(max_examples=25, deadline=None)
def test_block_map_independent_of_workers(seed, n):
    fn = lambda b, m: _rng.block_rng(seed, 0, b).standard_normal(m)  # noqa: E731
    one = np.concatenate(_rng.map_blocks(fn, n, workers=1))
    four = np.concatenate(_rng.map_blocks(fn, n, workers=4))
    assert one.size == n
    assert one.tobytes() == four.tobytes()


@given(st.integers(1, 30), st.integers(1, 3), st.integers(0, 2**31))
def test_chol3_factors_gram(m, k, seed):
    A = np.random.default_rng(seed).standard_normal((m, k, k))
    G = A @ A.transpose(0, 2, 1)
    L = _kernels_py.chol3(G)
    np.testing.assert_allclose(L @ L.transpose(0, 2, 1), G, atol=1e-10 * max(1.0, np.abs(G).max()))
    assert np.all(np.triu(L, 1) == 0)
