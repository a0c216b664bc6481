from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lugsail.chains import ChainSet
from lugsail.mcvar import (
    BatchConfig,
    EstimatorError,
    VarianceEstimate,
    between_chain,
    relative_efficiency,
    replicated_batch_means,
    replicated_lugsail,
    sigma_hat,
    sigma_hat_L,
)
from lugsail.samplers import AR1, SamplerSpec, ar1_generate
from oracles import naive_between, naive_lugsail, naive_rbm


def explicit(b):
    return BatchConfig("explicit", b)


def test_batch_policies():
    assert BatchConfig().resolve(10_000).b == 100
    assert BatchConfig("cuberoot").resolve(1000).b == 10
    assert BatchConfig("cuberoot").resolve(999).b == 9
    r = explicit(7).resolve(50)
    assert (r.b, r.a) == (7, 7)
    assert BatchConfig.parse("cube") == BatchConfig("cuberoot")
    assert BatchConfig.parse("12") == explicit(12)
    with pytest.raises(ValueError):
        BatchConfig.parse("fast")
    with pytest.raises(EstimatorError):
        explicit(11).resolve(10)


def test_between_chain_hand_value():
    x = np.array([[1.0, 1.0, 1.0, 1.0], [3.0, 3.0, 3.0, 3.0]])
    x = x + np.array([0.5, -0.5, 0.5, -0.5])
    assert between_chain(ChainSet(x)).scalar == pytest.approx(8.0)
    assert between_chain(ChainSet(np.tile([1.0, 2.0, 3.0], (3, 1)))).scalar == 0.0
    with pytest.raises(EstimatorError):
        between_chain(ChainSet(np.zeros((1, 5))))


def test_rbm_hand_value():
    est = replicated_batch_means(ChainSet(np.array([[1.0, 2.0, 3.0, 4.0]])), explicit(2))
    assert est.scalar == pytest.approx(4.0)


def test_constant_chain_gives_zero():
    cs = ChainSet(np.full((2, 30, 2), 3.25))
    assert np.all(replicated_batch_means(cs, explicit(5)).value == 0)
    assert np.all(replicated_lugsail(cs, explicit(5)).value == 0)


def test_rbm_needs_two_batches():
    with pytest.raises(EstimatorError, match="a\\*m >= 2"):
        replicated_batch_means(ChainSet(np.arange(10.0)[None]), explicit(6))


def test_duplicate_chains_match_oracle(rng):
    x = rng.standard_normal(24)
    cs = ChainSet(np.stack([x, x]))
    np.testing.assert_allclose(
        replicated_batch_means(cs, explicit(4)).value, naive_rbm(cs.samples, 4), rtol=1e-12
    )


def test_lugsail_linear_combination(rng):
    cs = ChainSet(rng.standard_normal((2, 90, 1)))
    est = replicated_lugsail(cs, explicit(9))
    Tb = replicated_batch_means(cs, explicit(9)).value
    Tb3 = replicated_batch_means(cs, explicit(3)).value
    np.testing.assert_allclose(est.value, 2 * Tb - Tb3, rtol=1e-14)
    np.testing.assert_allclose(est.parts["T_b"], Tb)
    assert est.parts["b3"] == 3


def test_lugsail_small_b_uses_batch_size_one(rng):
    cs = ChainSet(rng.standard_normal((1, 8)))
    est = replicated_lugsail(cs, explicit(2))
    assert est.parts["b3"] == 1
    np.testing.assert_allclose(est.value, naive_lugsail(cs.samples, 2), rtol=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(4, 60), st.integers(1, 3), st.data())
def test_estimators_match_loop_oracle(seed, m, n, p, data):
    b = data.draw(st.integers(1, n // 2))
    if m * (n // b) < 2:
        return
    x = np.random.default_rng(seed).standard_normal((m, n, p))
    cs = ChainSet(x)
    np.testing.assert_allclose(replicated_batch_means(cs, explicit(b)).value, naive_rbm(x, b), rtol=1e-12, atol=1e-14)
    if m * (n // max(1, b // 3)) >= 2:
        np.testing.assert_allclose(replicated_lugsail(cs, explicit(b)).value, naive_lugsail(x, b),
                                   rtol=1e-12, atol=1e-13)
    if m >= 2:
        np.testing.assert_allclose(between_chain(cs).value, naive_between(x), rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_location_invariance_and_scale_equivariance(seed, p):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((3, 48, p))
    D = rng.standard_normal((p, p)) + 2 * np.eye(p)
    c = rng.normal(0, 100, p)
    bc = explicit(6)
    for f in (between_chain, lambda cs: replicated_batch_means(cs, bc), lambda cs: replicated_lugsail(cs, bc)):
        base = f(ChainSet(x)).value
        np.testing.assert_allclose(f(ChainSet(x + c)).value, base, rtol=1e-9, atol=1e-10)
        np.testing.assert_allclose(f(ChainSet(x @ D.T)).value, D @ base @ D.T, rtol=1e-12, atol=1e-12)


def test_p1_matrix_path_matches_scalar_values(rng):
    x = rng.standard_normal((3, 64))
    one = replicated_lugsail(ChainSet(x), explicit(8)).scalar
    assert one == pytest.approx(float(naive_lugsail(x[:, :, None], 8)[0, 0]), rel=1e-12)


def _fake(n, s2, kind, value):
    cs = SimpleNamespace(n=n)
    summ = SimpleNamespace(pooled_cov=np.array([[s2]]))
    est = VarianceEstimate(kind, np.array([[value]]), 1, n)
    return cs, summ, est


@pytest.mark.parametrize("n,s2,B,want", [(100, 1.0, 0.0, 0.99), (100, 0.0, 200.0, 2.0), (4, 1.0, 8.0, 2.75)])
def test_sigma_hat(n, s2, B, want):
    assert float(sigma_hat(*_fake(n, s2, "between_B", B))[0, 0]) == pytest.approx(want)


@pytest.mark.parametrize("n,s2,TL,want", [(100, 1.0, 100.0, 1.99), (50, 2.0, 0.0, 49 / 50 * 2), (4, 4.0, 4.0, 4.0)])
def test_sigma_hat_L(n, s2, TL, want):
    assert float(sigma_hat_L(*_fake(n, s2, "lugsail", TL))[0, 0]) == pytest.approx(want)


def test_sigma_hat_kind_checks():
    with pytest.raises(EstimatorError):
        sigma_hat(*_fake(4, 1.0, "lugsail", 1.0))
    cs, summ, _ = _fake(4, 1.0, "lugsail", 1.0)
    with pytest.raises(EstimatorError, match="dimension"):
        sigma_hat_L(cs, summ, VarianceEstimate("lugsail", np.eye(2), 1, 4))


def test_relative_efficiency():
    assert relative_efficiency(2, 3) == 2.0
    assert relative_efficiency(3, 3) == 1.5
    assert relative_efficiency(4, 10) == 2 * relative_efficiency(4, 5)
    with pytest.raises(EstimatorError):
        relative_efficiency(1, 3)


def test_lugsail_estimates_ar1_long_run_variance():
    vals = []
    for seed in range(50):
        cs = ar1_generate(SamplerSpec(AR1(0.95), m=1, seed=(7, seed)), 100_000)
        vals.append(replicated_lugsail(cs).scalar)
    assert np.mean(vals) == pytest.approx(400.0, rel=0.10)


def test_lugsail_exceeds_batch_means_on_average():
    lug, rbm = [], []
    for seed in range(200):
        cs = ar1_generate(SamplerSpec(AR1(0.95), m=1, seed=(8, seed)), 5000)
        lug.append(replicated_lugsail(cs).scalar)
        rbm.append(replicated_batch_means(cs).scalar)
    assert np.mean(lug) > np.mean(rbm)
