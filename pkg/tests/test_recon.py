import math

import numpy as np
import pytest

from dass.core import FieldBlock, Measurement, SamplingPattern, SignalModel
from dass.recon import (IllConditionedPattern, UnderdeterminedError, error_bound, expected_mse,
                        ols_reconstruct, theta_cost)
from helpers import random_model

E2 = SignalModel(np.eye(4)[:, :2], np.zeros(4), np.array([2.0, 1.0]), sample_count=5)


def _meas(values, idx, N, sigma=0.0):
    return Measurement(np.asarray(values, float), SamplingPattern(idx, N), sigma)


def test_ols_recovers_in_span_block():
    m = _meas([3.0, -1.0], [0, 1], 4)
    r = ols_reconstruct(E2, m)
    assert r.estimate.values.tolist() == [3.0, -1.0, 0.0, 0.0]
    assert r.theta == pytest.approx(2.0)


def test_ols_underdetermined():
    with pytest.raises(UnderdeterminedError):
        ols_reconstruct(E2, _meas([1.0], [0], 4))


def test_ols_rank_deficient_selection():
    # rows 2 and 3 of the basis are zero
    with pytest.raises(IllConditionedPattern) as err:
        ols_reconstruct(E2, _meas([1.0, 1.0], [2, 3], 4))
    assert "2,3" in str(err.value)
    assert theta_cost(E2, SamplingPattern([2, 3], 4)) == math.inf


def test_ols_mean_is_restored():
    model = SignalModel(np.eye(3)[:, :1], np.array([5.0, 6.0, 7.0]), np.array([1.0]), 3)
    r = ols_reconstruct(model, _meas([9.0], [0], 3))
    assert r.estimate.values.tolist() == [9.0, 6.0, 7.0]


def test_theta_inf_when_fewer_rows_than_dimension():
    assert theta_cost(E2, SamplingPattern([0], 4)) == math.inf


@pytest.mark.parametrize("seed", range(5))
def test_theta_invariances(seed):
    model = random_model(12, 3, seed)
    tau = SamplingPattern([0, 2, 5, 7, 11], 12)
    th = theta_cost(model, tau)
    rng = np.random.default_rng(seed)
    Q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    rotated = SignalModel(model.basis @ Q, model.mean, model.eigenvalues, 3)
    assert theta_cost(rotated, tau) == pytest.approx(th, rel=1e-9)
    # more rows never hurt
    assert theta_cost(model, SamplingPattern([0, 2, 3, 5, 7, 11], 12)) <= th + 1e-12
    assert theta_cost(model, SamplingPattern(np.arange(12), 12)) == pytest.approx(3.0)


def test_error_bound_terms():
    tau = SamplingPattern([0, 1], 4)
    assert error_bound(E2, tau, 0.0, 0.5) == pytest.approx(0.25 * 2.0)
    assert error_bound(E2, tau, 0.3, 0.0) == pytest.approx(0.09)
    assert error_bound(E2, SamplingPattern([0], 4), 0.1, 0.1) == math.inf


def test_expected_mse_monte_carlo():
    N, K_full, K = 10, 4, 2
    model = random_model(N, K_full, 3, spectrum=[3.0, 1.5, 0.6, 0.2])
    tau = SamplingPattern([0, 2, 4, 6, 8], N)
    sigma = 0.3
    rng = np.random.default_rng(0)
    small = model.truncated(K)
    trials = 20000
    coef = rng.standard_normal((trials, K_full)) * np.sqrt(model.eigenvalues)
    X = coef @ model.basis.T + model.mean
    A = small.basis[tau.indices]
    Y = X[:, tau.indices] + sigma * rng.standard_normal((trials, tau.M))
    alpha = np.linalg.lstsq(A, (Y - small.mean[tau.indices]).T, rcond=None)[0].T
    est = alpha @ small.basis.T + small.mean
    mc = np.mean(np.sum((est - X) ** 2, axis=1)) / N
    assert expected_mse(model, tau, K, sigma) == pytest.approx(mc, rel=0.03)


def test_expected_mse_full_dimension_is_noise_term():
    model = random_model(8, 3, 1)
    tau = SamplingPattern([0, 1, 3, 4, 6], 8)
    assert expected_mse(model, tau, 3, 0.2) == pytest.approx(0.04 * theta_cost(model, tau) / 8)
    assert expected_mse(model, SamplingPattern([0, 1], 8), 3, 0.2) == math.inf


@pytest.mark.parametrize("failures", [1, 2])
def test_thin_svd_survives_lapack_failure(monkeypatch, failures):
    import dass.recon as recon
    real = np.linalg.svd
    calls = {"n": 0}

    def flaky(*a, **k):
        calls["n"] += 1
        if calls["n"] <= failures:
            raise np.linalg.LinAlgError("SVD did not converge")
        return real(*a, **k)

    A = np.random.default_rng(0).standard_normal((9, 4))
    monkeypatch.setattr(recon.np.linalg, "svd", flaky)
    U, s, Vt = recon.thin_svd(A)
    assert np.allclose((U * s) @ Vt, A, atol=1e-10)
    assert np.allclose(s, real(A, compute_uv=False))
