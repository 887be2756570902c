import numpy as np
import pytest
from scipy.special import ndtr

from hierarchylab import crit, nonlin
from hierarchylab.errors import NotKStarZeroClass

CHI_PAR_TANH = {0.5: 0.324629995988866999976, 0.01: 0.961621667906009364}
CHI_PERP_TANH = {0.5: 0.592425793371796394, 0.01: 0.980670243464981518}


def test_relu_tuning(relu):
    t = crit.tune_critical(relu)
    assert (t.C_b, t.C_W, t.K_star, t.cls) == (0.0, 2.0, 1.0, crit.HOMOG1_CLASS)


def test_tanh_tuning(tanh):
    t = crit.tune_critical(tanh)
    assert (t.C_b, t.C_W, t.K_star, t.cls) == (0.0, 1.0, 0.0, crit.KSTAR_ZERO_CLASS)
    assert t.to_json() == {"C_b": 0.0, "C_W": 1.0, "K_star": 0.0, "class": "KStarZero"}


def test_leaky_tuning():
    t = crit.tune_critical(nonlin.leaky_relu(0.1))
    assert t.C_W == pytest.approx(2 / 1.01, rel=1e-15)
    assert t.C_b == 0.0


def test_chi_examples(relu, tanh):
    assert crit.chi_parallel(relu, 2.0, 3.7) == pytest.approx(1.0, rel=1e-12)
    assert crit.chi_perp(relu, 2.0, 0.4) == pytest.approx(1.0, rel=1e-12)
    assert crit.chi_parallel(tanh, 1.0, 0.0) == 1.0
    assert crit.chi_perp(tanh, 1.0, 0.0) == 1.0
    assert crit.chi_parallel(tanh, 1.0, 0.5) < 1.0
    assert crit.chi_perp(nonlin.leaky_relu(0.1), 2 / 1.01, 2.2) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("K", [0.5, 0.01])
def test_chi_tanh_oracle(K, tanh):
    assert crit.chi_parallel(tanh, 1.0, K) == pytest.approx(CHI_PAR_TANH[K], rel=1e-10)
    assert crit.chi_perp(tanh, 1.0, K) == pytest.approx(CHI_PERP_TANH[K], rel=1e-10)


def test_homog_chi_independent_of_K(rng):
    for nl in (nonlin.relu(), nonlin.leaky_relu(0.3), nonlin.homog1(0.5, -1.5)):
        t = crit.tune_critical(nl)
        for K in rng.uniform(1e-3, 10.0, 20):
            assert crit.chi_parallel(nl, t.C_W, K) == pytest.approx(1.0, abs=1e-9)
            assert crit.chi_perp(nl, t.C_W, K) == pytest.approx(1.0, abs=1e-9)


def test_tanh_chi_parallel_below_one_and_monotone(tanh):
    Ks = np.geomspace(1e-4, 5.0, 30)
    chi = np.array([crit.chi_parallel(tanh, 1.0, K) for K in Ks])
    assert np.all(chi < 1.0)
    assert np.all(np.diff(chi) < 0)
    assert chi[0] == pytest.approx(1.0, abs=1e-3)


def test_classify(relu, tanh):
    assert crit.classify(relu) == crit.HOMOG1_CLASS
    assert crit.classify(tanh) == crit.KSTAR_ZERO_CLASS
    sinh_like = nonlin.tanh_like([np.sinh, np.cosh, np.sinh, np.cosh], name="sinh")
    assert sinh_like.sigma3 > 0
    assert crit.classify(sinh_like) == crit.GENERIC_CLASS


def test_classify_needs_oddness():
    shifted = nonlin.tanh_like(
        [lambda z: np.tanh(z) + 0.1, lambda z: 1 - np.tanh(z) ** 2],
        sigma1=1.0,
        sigma3=-1.0 / 3.0,
    )
    assert crit.classify(shifted) == crit.GENERIC_CLASS


def test_generic_tuning_gelu():
    # GELU has a nontrivial critical point at K* = (3 + sqrt 17) / 2
    phi = lambda z: np.exp(-z * z / 2) / np.sqrt(2 * np.pi)  # noqa: E731
    gelu = nonlin.tanh_like(
        [lambda z: z * ndtr(z), lambda z: ndtr(z) + z * phi(z), lambda z: phi(z) * (2 - z * z)],
        name="gelu",
    )
    assert crit.classify(gelu) == crit.GENERIC_CLASS
    t = crit.tune_critical(gelu, generic=True)
    K = t.K_star
    assert K == pytest.approx((3 + np.sqrt(17)) / 2, rel=1e-9)
    assert t.C_W == pytest.approx(1.98305826, rel=1e-7)
    assert t.C_b == pytest.approx(0.17292239, rel=1e-6)
    assert t.C_b + t.C_W * crit.mean_sigma_sq(gelu, K) == pytest.approx(K, abs=1e-9)
    assert crit.chi_perp(gelu, t.C_W, K) == pytest.approx(1.0, abs=1e-9)
    assert crit.chi_parallel(gelu, t.C_W, K) == pytest.approx(1.0, abs=1e-9)


def test_kstar_unique_and_require(tanh, relu):
    assert crit.kstar_unique(tanh, crit.tune_critical(tanh))
    crit.require_kstar_zero(tanh)
    with pytest.raises(NotKStarZeroClass):
        crit.require_kstar_zero(relu)
