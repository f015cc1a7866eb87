"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (shown in the pytest terminal summary)
before asserting.  Run directly with ``python3 tests/test_acceptance.py`` to
get the lines without pytest.
"""
import dataclasses
import itertools
import logging
import math
import time

import numpy as np
import pytest

from acceptance_log import record
from dass.cli import main as cli_main
from dass.core import Measurement, SamplingPattern, SignalModel, make_rng
from dass.cs import L1Config, l1_reconstruct, optimality_certificate
from dass.energy import energy_saving, preset, zero_crossing
from dass.model import (LearnerConfig, batch_model, update_model_buffer,
                        update_model_incremental)
from dass.core import FieldBlock
from dass.recon import error_bound, ols_reconstruct, theta_cost
from dass.scheduler import baseline_pattern, exhaustive_oracle, greedy_schedule
from dass.simulator import ExperimentConfig, joint_vs_independent_ratio, run_experiment
from dass.synth import SynthParams, generate_synthetic, restrict_nodes



@pytest.fixture(autouse=True, scope="module")
def _quiet_warnings():
    # ingestion and warmup warnings are expected here; restore for other modules
    logger = logging.getLogger("dass")
    level = logger.level
    logger.setLevel(logging.ERROR)
    yield
    logger.setLevel(level)


def _model(rng, N, K, spectrum=None):
    basis = np.linalg.qr(rng.standard_normal((N, K)))[0]
    lam = np.sort(rng.uniform(0.1, 3.0, K))[::-1] if spectrum is None else np.asarray(spectrum)
    return SignalModel(basis, rng.standard_normal(N), lam, sample_count=10)


def _pattern(rng, N, M):
    return SamplingPattern(np.sort(rng.choice(N, M, replace=False)), N)


def test_01_ols_matches_normal_equations():
    rng = make_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        N = int(rng.integers(2, 17))
        K = int(rng.integers(1, min(5, N) + 1))
        M = int(rng.integers(K, min(8, N) + 1))
        model = _model(rng, N, K)
        tau = _pattern(rng, N, M)
        y = rng.standard_normal(M) * 3
        est = ols_reconstruct(model, Measurement(y, tau, 0.0)).estimate.values
        A = model.basis[tau.indices]
        alpha = np.linalg.solve(A.T @ A, A.T @ (y - model.mean[tau.indices]))
        oracle = model.basis @ alpha + model.mean
        worst = max(worst, np.linalg.norm(est - oracle) / np.linalg.norm(oracle))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 5
    record(1, ok, f"max relative deviation {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_02_noise_term_matches_monte_carlo():
    rng = make_rng(202)
    t0 = time.perf_counter()
    N, K, M, sigma, trials = 32, 4, 10, 0.3, 10_000
    model = _model(rng, N, K)
    tau = _pattern(rng, N, M)
    x = model.basis @ rng.standard_normal(K) + model.mean  # exactly in the model span
    total = 0.0
    for _ in range(trials):
        y = x[tau.indices] + sigma * rng.standard_normal(M)
        est = ols_reconstruct(model, Measurement(y, tau, sigma)).estimate.values
        total += np.sum((est - x) ** 2)  # N * rmse^2
    mc = total / trials
    predicted = sigma ** 2 * theta_cost(model, tau)
    elapsed = time.perf_counter() - t0
    rel = abs(mc / predicted - 1)
    ok = rel <= 0.05 and elapsed < 30
    record(2, ok, f"mean N*eps^2 {mc:.5f} vs sigma^2*Theta {predicted:.5f} ({rel:.1%}), "
                  f"{elapsed:.1f} s")
    assert ok


def _recon_operator(model, tau):
    """Matrix mapping measurements to the estimate, measured column by column."""
    zero = ols_reconstruct(model, Measurement(np.zeros(tau.M), tau, 0.0)).estimate.values
    cols = [ols_reconstruct(model, Measurement(np.eye(tau.M)[j], tau, 0.0)).estimate.values - zero
            for j in range(tau.M)]
    return np.array(cols).T


def test_03_error_bound_holds():
    # The noise part is taken in expectation over the noise, measured from
    # the reconstruction operator; the approximation part is exact per trial.
    rng = make_rng(303)
    violations, tight = 0, 0.0
    for trial in range(1000):
        N = int(rng.integers(6, 25))
        K = int(rng.integers(1, 5))
        M = int(rng.integers(K, N))
        model = _model(rng, N, K)
        tau = _pattern(rng, N, M)
        if theta_cost(model, tau) > 1e8:
            tau = baseline_pattern("uniform", N, M)
        eps_a = float(rng.uniform(0.0, 2.0))
        sigma = float(rng.choice([0.0, rng.uniform(0.0, 1.0)]))
        A = model.basis[tau.indices]
        if trial % 2 == 0:
            # residual along the weakest direction of the selected rows
            v = np.linalg.svd(A)[2][-1]
            e = np.zeros(N)
            e[tau.indices] = A @ v
        else:
            e = rng.standard_normal(N)
        e *= eps_a * math.sqrt(N) / max(np.linalg.norm(e), 1e-300)
        x = model.basis @ rng.standard_normal(K) + model.mean + e
        est = ols_reconstruct(model, Measurement(x[tau.indices], tau, sigma)).estimate.values
        op = _recon_operator(model, tau)
        measured = (np.sum((x - est) ** 2) + sigma ** 2 * np.sum(op * op)) / N
        bound = error_bound(model, tau, eps_a, sigma)
        if measured > bound * (1 + 1e-12) + 1e-15:
            violations += 1
        if bound > 0:
            tight = max(tight, measured / bound)
    ok = violations == 0
    record(3, ok, f"{violations}/1000 violations, largest measured/bound {tight:.3f}")
    assert ok


def test_04_theta_is_trace_of_inverse_gram():
    rng = make_rng(404)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(4, 30))
        K = int(rng.integers(1, min(5, N) + 1))
        M = int(rng.integers(K, N + 1))
        model = _model(rng, N, K)
        tau = _pattern(rng, N, M)
        A = model.basis[tau.indices]
        oracle = float(np.trace(np.linalg.inv(A.T @ A)))
        worst = max(worst, abs(theta_cost(model, tau) - oracle) / oracle)
    sentinel = all(
        theta_cost(_model(rng, 10, K), _pattern(rng, 10, K - 1)) == math.inf for K in range(2, 6)
    )
    ok = worst <= 1e-9 and sentinel
    record(4, ok, f"max relative deviation {worst:.2e}, M<K sentinel {'ok' if sentinel else 'wrong'}")
    assert ok


def test_05_greedy_near_optimal():
    t0 = time.perf_counter()
    cells, never_worse = [], True
    for K in (2, 3):
        for M in (3, 4, 5):
            good = 0
            for seed in range(50):
                model = _model(make_rng((505, K, M, seed)), 10, K)
                # eps_a = 0: the fallback compares sigma^2 * Theta directly
                dec = greedy_schedule(model, M, 0.0, 0.1)
                best = theta_cost(model, exhaustive_oracle(model, M))
                good += dec.theta <= 2 * best
                never_worse &= dec.theta <= theta_cost(model, baseline_pattern("uniform", 10, M))
            cells.append((K, M, good))
    elapsed = time.perf_counter() - t0
    ok = all(g >= 45 for _, _, g in cells) and never_worse and elapsed < 60
    detail = ", ".join(f"K={K} M={M}: {g}/50" for K, M, g in cells)
    record(5, ok, f"{detail}; decision never above uniform: {never_worse}; {elapsed:.1f} s")
    assert ok


def _theta_ratio(profile, seeds):
    g = u = 0.0
    for s in seeds:
        r = run_experiment(generate_synthetic(profile, 100, 144, seed=s),
                           ExperimentConfig(method="DASS", gamma=0.1, snr_db=30.0, seed=s))
        g += np.sum(r.theta)
        u += np.sum(r.theta_uniform)
    return g / u


def test_06_theta_contrast_between_profiles():
    spiky = _theta_ratio("diurnal_spiky", range(5))
    smooth = _theta_ratio("diurnal_smooth", range(5))
    ok = spiky < 0.1 and abs(smooth - 1) <= 0.2
    record(6, ok, f"mean Theta greedy/uniform: spiky {spiky:.4f} (need < 0.1), "
                  f"smooth {smooth:.3f} (need within 20% of 1)")
    assert ok


def _affinity(U, V):
    return float(np.sum((U.T @ V) ** 2) / U.shape[1])


def test_07_incremental_pca_tracking():
    rng = make_rng(707)
    N, K = 32, 4
    truth = np.linalg.qr(rng.standard_normal((N, K)))[0]
    mean = rng.standard_normal(N)
    X = mean + (rng.standard_normal((500, K)) * np.sqrt([16.0, 8.0, 4.0, 2.0])) @ truth.T \
        + 0.05 * rng.standard_normal((500, N))
    cfg = LearnerConfig(K=K, variant="rescaled")
    model = SignalModel(np.zeros((N, 0)), X[0], np.zeros(0), sample_count=1)
    for row in X[1:]:
        model = update_model_incremental(model, FieldBlock(row), cfg)
    batch = batch_model(X, K)
    aff = _affinity(model.basis, batch.basis)

    printed = LearnerConfig(K=K, variant="as_printed")
    start = SignalModel(batch.basis, batch.mean, batch.eigenvalues, sample_count=12)
    after = update_model_incremental(start, FieldBlock(batch.mean.copy()), printed)
    L = min(start.sample_count, printed.buffer_length)
    forced = np.max(np.abs(after.eigenvalues - start.eigenvalues / (L + 1)))

    import collections
    buf = collections.deque(maxlen=30)
    for row in X[:45]:
        bm = update_model_buffer(buf, FieldBlock(row), K)
    W = X[15:45]
    C = (W - W.mean(0)).T @ (W - W.mean(0)) / len(W)
    lam, vec = np.linalg.eigh(C)
    lam, vec = lam[::-1][:K], vec[:, ::-1][:, :K]
    buf_err = max(np.max(np.abs(bm.eigenvalues - lam)),
                  np.max(np.abs(np.abs(bm.basis.T @ vec) - np.eye(K))))
    ok = aff >= 0.95 and forced <= 1e-12 * start.eigenvalues[0] and buf_err <= 1e-8
    record(7, ok, f"affinity {aff:.4f}, as_printed deviation {forced:.1e}, "
                  f"buffer vs eigensolve {buf_err:.1e}")
    assert ok


def _correlated(seed, nodes=3):
    return generate_synthetic("multi_node_correlated", 100, 144, node_count=nodes, seed=seed,
                              params=SynthParams(latent="diurnal_spiky"))


def test_08_method_ordering():
    ordered = 0
    for seed in range(20):
        data = _correlated(seed)
        r = {m: run_experiment(data, ExperimentConfig(method=m, node_count=3, seed=seed,
                                                      snr_db=30.0)).mean_rmse
             for m in ("DASS", "OLS_uniform", "OLS_random")}
        ordered += r["DASS"] <= r["OLS_uniform"] <= r["OLS_random"]
    low_snr = {}
    for snr in (20.0, 15.0, 10.0):
        u = c = 0.0
        for seed in range(10):
            data = _correlated(seed)
            base = ExperimentConfig(node_count=3, seed=seed, snr_db=snr)
            u += run_experiment(data, dataclasses.replace(base, method="OLS_uniform")).mean_rmse
            c += run_experiment(data, dataclasses.replace(base, method="CSN")).mean_rmse
        low_snr[snr] = (u / 10, c / 10)
    csn_ok = all(u <= c for u, c in low_snr.values())
    ok = ordered >= 18 and csn_ok
    detail = ", ".join(f"{s:g} dB {u:.2f} vs {c:.2f}" for s, (u, c) in low_snr.items())
    record(8, ok, f"DASS<=uniform<=random in {ordered}/20 seeds; "
                  f"mean RMSE OLS_uniform vs CSN: {detail}")
    assert ok


def test_09_csn_sensitive_to_snr_estimate():
    rmse = {}
    for method in ("DASS", "CSN"):
        for err in (0.0, -10.0):
            rmse[method, err] = np.mean([
                run_experiment(generate_synthetic("diurnal_smooth", 100, 144, seed=s),
                               ExperimentConfig(method=method, seed=s, snr_db=30.0,
                                                snr_estimation_error_db=err)).mean_rmse
                for s in range(10)])
    csn = rmse["CSN", -10.0] / rmse["CSN", 0.0] - 1
    dass = rmse["DASS", -10.0] / rmse["DASS", 0.0] - 1
    ok = csn >= 0.5 and abs(dass) <= 0.1
    record(9, ok, f"RMSE change with estimate 10 dB low: CSN {csn:+.1%}, DASS {dass:+.1%}")
    assert ok


def test_10_cs_exact_recovery():
    N, M, S = 64, 24, 3
    recovered = certified = 0
    for seed in range(100):
        rng = make_rng((1010, seed))
        basis = np.linalg.qr(rng.standard_normal((N, N)))[0]
        dictionary = SignalModel(basis, np.zeros(N), np.ones(N), sample_count=10)
        s = np.zeros(N)
        support = rng.choice(N, S, replace=False)
        s[support] = rng.choice([-1, 1], S) * rng.uniform(1, 3, S)
        x = basis @ s
        tau = _pattern(rng, N, M)
        res = l1_reconstruct(dictionary, Measurement(x[tau.indices], tau, 0.0), L1Config())
        found = set(np.flatnonzero(np.abs(res.coefficients) > 1e-6).tolist())
        err = math.sqrt(np.mean((res.estimate.values - x) ** 2))
        recovered += found == set(support.tolist()) and err < 1e-4
        certified += optimality_certificate(basis[tau.indices], x[tau.indices], res.coefficients,
                                            res.mu, 1e-6)
    ok = recovered >= 95 and certified == 100
    record(10, ok, f"support and RMSE<1e-4 in {recovered}/100 seeds, certificate {certified}/100")
    assert ok


def test_11_joint_versus_independent():
    distance, nodes = 3.0, 6
    p = SynthParams(decorrelation_distance=distance, gain_spread=0.0)
    data = generate_synthetic("multi_node_correlated", 120, 48, node_count=nodes, seed=0, params=p)
    cfg = ExperimentConfig(method="DASS", snr_db=30.0, N=48)
    full = run_experiment(restrict_nodes(data, [0]), dataclasses.replace(cfg, gamma=1.0))
    ratios = joint_vs_independent_ratio(data, cfg, target_rmse=2 * full.mean_rmse)
    # n nodes span a distance of n - 1 at unit spacing
    edge = int(distance) + 1
    rising = [ratios[n] for n in range(2, edge + 1)]
    monotone = all(b <= a for a, b in zip(rising, rising[1:]))
    flat = all(abs(ratios[n] / ratios[edge] - 1) <= 0.05 for n in range(edge + 1, nodes + 1))
    ok = ratios[3] <= 0.8 and monotone and flat
    shown = ", ".join(f"n={n}: {r:.3f}" for n, r in ratios.items())
    record(11, ok, f"{shown}; n=3 <= 0.8: {ratios[3] <= 0.8}, nonincreasing to n={edge}: "
                   f"{monotone}, flat after: {flat}")
    assert ok


def test_12_energy_model():
    rc = np.linspace(1.0, 50.0, 50)
    rs = np.linspace(0.0, 2.0, 50)
    worst_zero = 0.0
    for gamma in (0.05, 0.1, 0.3, 0.6, 0.9):
        for o in (0.0, 0.5):
            z = zero_crossing(rc, gamma)
            keep = z >= 0
            if keep.any():
                worst_zero = max(worst_zero, float(np.max(np.abs(
                    energy_saving(z[keep], rc[keep], gamma, o)))))
    mono = True
    for gamma in (0.05, 0.3, 0.9):
        grid = energy_saving(rs[:, None], rc[None, :], gamma)
        mono &= bool(np.all(np.diff(grid, axis=0) >= -1e-12))  # rises with r_s
        mono &= bool(np.all(np.diff(grid, axis=1) <= 1e-12))  # falls with r_c
    gammas = np.linspace(0.02, 1.0, 50)
    by_gamma = np.array([energy_saving(rs[:, None], rc[None, :], g) for g in gammas])
    mono &= bool(np.all(np.diff(by_gamma, axis=0) <= 1e-12))  # falls with gamma
    tm = preset("tmote_sky")
    verbatim = (tm.e_sensor == 7.5e-6 and tm.r_s == 0.26 and tm.packet_energy == 6.9e-4
                and tm.packet_bytes == 24)
    ok = worst_zero < 1e-9 and mono and verbatim
    record(12, ok, f"max |saving| on zero curve {worst_zero:.1e}, monotone {mono}, "
                   f"tmote_sky constants {'verbatim' if verbatim else 'wrong'}")
    assert ok


def test_13_reproducible_reports(tmp_path, capsys):
    csv = tmp_path / "d.csv"
    assert cli_main(["synth", "--profile", "multi_node_correlated", "--nodes", "2", "--blocks",
                     "12", "--N", "48", "--seed", "3", "--out", str(csv)]) == 0
    commands = {
        "simulate-dass": ["simulate", "--data", "synth:diurnal_spiky", "--data-blocks", "20",
                          "--N", "48", "--gamma", "0.25", "--seed", "7"],
        "simulate-csn-csv": ["simulate", "--data", str(csv), "--N", "48", "--method", "CSN",
                             "--gamma", "0.25", "--seed", "7"],
        "sweep": ["sweep", "--data", "synth:diurnal_smooth", "--data-blocks", "15", "--N", "48",
                  "--methods", "DASS,OLS_random,CS", "--gamma", "0.2,0.25", "--snr-db", "20:10:30",
                  "--seed", "7"],
    }
    same = {}
    for name, argv in commands.items():
        outs = []
        for run, extra in enumerate(([], [], ["--workers", "2"] if name == "sweep" else [])):
            f = tmp_path / f"{name}-{run}.txt"
            assert cli_main(argv + extra + ["--out", str(f)]) == 0
            outs.append(f.read_bytes())
        same[name] = all(o == outs[0] for o in outs)
    capsys.readouterr()
    ok = all(same.values())
    record(13, ok, ", ".join(f"{k}: {'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok


if __name__ == "__main__":
    logging.getLogger("dass").setLevel(logging.ERROR)
    import tempfile
    from pathlib import Path

    class _Capsys:
        def readouterr(self):
            return None

    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                if name.startswith("test_13"):
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d), _Capsys())
                else:
                    fn()
            except AssertionError:
                pass
