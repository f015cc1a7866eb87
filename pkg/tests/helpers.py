import numpy as np

from dass.core import SignalModel


def random_model(N, K, seed, mean_scale=0.0, spectrum=None):
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(rng.standard_normal((N, K)))[0]
    lam = np.sort(rng.uniform(0.1, 2.0, K))[::-1] if spectrum is None else np.asarray(spectrum)
    return SignalModel(basis, mean_scale * rng.standard_normal(N), lam, sample_count=10)
