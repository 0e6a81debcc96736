import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epsrank.exceptions import DomainError
from epsrank.gram import build_grid, layer_rank_profile
from epsrank.initializers import (UdiConfig, default_offset_range, grid_init_1d, grid_nodes, initialize, udi_init,
                                  xavier_init)
from epsrank.net import Network, layer_features


def test_xavier_bounds():
    net = xavier_init(Network.zeros(1, 3, 100), 5)
    assert np.abs(net.get_flat()).max() <= 0.1


def test_xavier_deterministic():
    a = xavier_init(Network.zeros(2, 2, 10), 3)
    b = xavier_init(Network.zeros(2, 2, 10), 3)
    assert a.get_flat().tobytes() == b.get_flat().tobytes()
    c = xavier_init(Network.zeros(2, 2, 10), 4)
    assert not np.array_equal(a.get_flat(), c.get_flat())


def test_grid_init_two_neurons():
    net = grid_init_1d(Network.zeros(1, 1, 2))
    np.testing.assert_allclose(grid_nodes(2), [-1, 0])
    x = np.linspace(-1, 1, 5)[:, None]
    D = layer_features(net, x)
    np.testing.assert_allclose(D, np.stack([np.tanh(x[:, 0] + 1), np.tanh(x[:, 0])], 1))


@pytest.mark.parametrize("n", [3, 30, 64])
def test_grid_nodes_span(n):
    nodes = grid_nodes(n)
    assert np.all(np.diff(nodes) > 0)
    assert nodes[0] == -1 and nodes[-1] == pytest.approx(1 - 2 / n)


def test_grid_init_rank():
    g = build_grid((-1, 1), "trapezoid", 129)
    net = initialize(Network.zeros(1, 2, 30), "grid", 0)
    assert layer_rank_profile(net, g)[0] >= 24


def test_grid_init_rejects_2d_and_non_tanh():
    with pytest.raises(DomainError):
        grid_init_1d(Network.zeros(2, 1, 4))
    with pytest.raises(DomainError):
        grid_init_1d(Network.zeros(1, 1, 4, "sigmoid"))


def test_grid_and_udi_leave_deeper_layers_alone():
    base = xavier_init(Network.zeros(1, 3, 8), 9)
    for scheme in ("grid", "udi"):
        net = initialize(Network.zeros(1, 3, 8), scheme, 9, domain=[(-1, 1)])
        for k in (1, 2):
            np.testing.assert_array_equal(net.weights[k], base.weights[k])
        np.testing.assert_array_equal(net.beta, base.beta)


def test_udi_directions_and_offsets():
    cfg = UdiConfig(gamma=3.0, R=1.5, seed=2)
    net = udi_init(Network.zeros(3, 1, 200), cfg)
    a = net.weights[0] / cfg.gamma
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0, atol=1e-12)
    b = net.biases[0] / cfg.gamma
    assert np.all((b >= 0) & (b <= cfg.R))


def test_udi_direction_mean_is_small():
    net = udi_init(Network.zeros(2, 1, 10_000), UdiConfig(1.0, 1.0, 0))
    assert np.linalg.norm(net.weights[0].mean(axis=0)) <= 0.05


def test_udi_rank_2d():
    g = build_grid([(-1, 1), (-1, 1)], "trapezoid", 65)
    net = udi_init(xavier_init(Network.zeros(2, 1, 50), 1), UdiConfig(2.0, np.sqrt(2), 1))
    assert layer_rank_profile(net, g)[0] >= 40


def test_udi_config_validation():
    with pytest.raises(DomainError):
        UdiConfig(gamma=0.0)
    with pytest.raises(DomainError):
        UdiConfig(R=-1.0)


def test_default_offset_range():
    assert default_offset_range([(-1, 1), (-1, 1)]) == pytest.approx(np.sqrt(2))
    assert default_offset_range([(0, 3)]) == pytest.approx(3.0)


def test_unknown_scheme():
    with pytest.raises(DomainError):
        initialize(Network.zeros(1, 1, 3), "he", 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["xavier", "grid", "udi"]))
def test_initializers_are_pure(seed, scheme):
    a = initialize(Network.zeros(1, 2, 6), scheme, seed, domain=[(-1, 1)])
    b = initialize(Network.zeros(1, 2, 6), scheme, seed, domain=[(-1, 1)])
    assert a.get_flat().tobytes() == b.get_flat().tobytes()
