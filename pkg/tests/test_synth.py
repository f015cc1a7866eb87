import numpy as np
import pytest

from dass.core import PreconditionError
from dass.synth import SynthParams, generate_synthetic, restrict_nodes


@pytest.mark.parametrize("profile", ["diurnal_smooth", "diurnal_spiky", "multi_node_correlated"])
def test_shapes_and_determinism(profile):
    a = generate_synthetic(profile, 6, 48, node_count=2, seed=1)
    b = generate_synthetic(profile, 6, 48, node_count=2, seed=1)
    assert len(a) == 6 and a[0].N == 96 and a[0].node_count == 2
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    c = generate_synthetic(profile, 6, 48, node_count=2, seed=2)
    assert not np.array_equal(a[0].values, c[0].values)


def test_spiky_energy_sits_in_daytime():
    blocks = generate_synthetic("diurnal_spiky", 20, 144, seed=0)
    X = np.array([b.values for b in blocks])
    day = X[:, 48:96]
    assert np.sum(day ** 2) >= 0.4 * np.sum(X ** 2)
    assert np.all(X[:, :48] == 0)


def test_correlation_decreases_with_distance():
    p = SynthParams(decorrelation_distance=2.0, gain_spread=0.0)
    blocks = generate_synthetic("multi_node_correlated", 60, 48, node_count=5, seed=3, params=p)
    series = [np.concatenate([b.node(i) for b in blocks]) for i in range(5)]
    corr = [abs(np.corrcoef(series[0], series[j])[0, 1]) for j in range(1, 5)]
    assert corr[0] > corr[-1]
    assert corr[0] > 0.5


def test_copy_factor_one_copies_node_zero():
    p = SynthParams(copy_factor=1.0)
    blocks = generate_synthetic("multi_node_correlated", 3, 32, node_count=3, seed=0, params=p)
    for b in blocks:
        assert np.allclose(b.node(1), b.node(0)) and np.allclose(b.node(2), b.node(0))


def test_restrict_nodes():
    blocks = generate_synthetic("multi_node_correlated", 2, 16, node_count=3, seed=0)
    sub = restrict_nodes(blocks, [2, 0])
    assert sub[0].node_count == 2
    assert np.array_equal(sub[0].node(0), blocks[0].node(2))


def test_validation():
    with pytest.raises(PreconditionError):
        generate_synthetic("ocean", 2, 16)
    with pytest.raises(PreconditionError):
        SynthParams(copy_factor=2.0)
