"""First-order perturbation experiments on tiny dense networks."""

import math

import numpy as np
import pytest

from clvr import (
    CosineStats,
    TensorMap,
    TinyNetSpec,
    constructed_circle_deltas,
    forward,
    increment_cosine,
    init_tiny_net,
    jvp_fd,
    random_delta,
    superposition_error,
    superposition_sweep,
)
from clvr.perturbation import train_to_targets

# Frozen output of superposition_sweep() at its defaults, recorded when the
# experiment was first run. Exact regression values; the acceptance suite
# re-checks only the scientific claims (slope near 2, flat control).
SWEEP_ERRORS = (
    4.053868e-01,
    1.082269e-01,
    2.771876e-02,
    6.903746e-03,
    1.713153e-03,
    4.260092e-04,
    1.061720e-04,
    2.649855e-05,
)
SWEEP_SLOPE = 1.9923465926186665


def identity_net(scale=1.0) -> TinyNetSpec:
    w = TensorMap(
        {"layer0.weight": scale * np.eye(2), "layer0.bias": np.zeros(2)}
    )
    return TinyNetSpec((2, 2), "identity", w)


# ------------------------------------------------------------------ network


def test_init_tiny_net_layout():
    net = init_tiny_net((3, 5, 2), "tanh", np.random.default_rng(0))
    assert net.weights["layer0.weight"].shape == (5, 3)
    assert net.weights["layer0.bias"].shape == (5,)
    assert net.weights["layer1.weight"].shape == (2, 5)
    assert np.all(net.weights["layer0.bias"] == 0)


def test_net_spec_validation():
    with pytest.raises(ValueError, match="activation"):
        init_tiny_net((2, 2), "relu", np.random.default_rng(0))
    with pytest.raises(ValueError):
        init_tiny_net((2,), "tanh", np.random.default_rng(0))


def test_forward_identity_net_is_the_identity():
    x = np.array([[1.0, -2.0], [0.5, 0.25]])
    np.testing.assert_array_equal(forward(identity_net(), x), x)


def test_forward_applies_activation_between_layers():
    w = TensorMap(
        {
            "layer0.weight": np.eye(2),
            "layer0.bias": np.zeros(2),
            "layer1.weight": np.eye(2),
            "layer1.bias": np.zeros(2),
        }
    )
    net = TinyNetSpec((2, 2, 2), "tanh", w)
    x = np.array([[0.5, -1.0]])
    np.testing.assert_allclose(forward(net, x), np.tanh(x), rtol=1e-15)


def test_random_delta_matches_weight_layout():
    net = init_tiny_net((2, 4, 2), "tanh", np.random.default_rng(1))
    d = random_delta(net, np.random.default_rng(2))
    assert d.names() == net.weights.names()
    for k in d.names():
        assert d[k].shape == net.weights[k].shape


# ---------------------------------------------------------------------- jvp


def test_jvp_is_exact_on_linear_nets():
    net = identity_net(scale=2.0)
    direction = TensorMap(
        {"layer0.weight": np.array([[0.0, 1.0], [1.0, 0.0]]), "layer0.bias": np.ones(2)}
    )
    x = np.array([[3.0, 5.0]])
    got = jvp_fd(net, direction, x)
    # d/dh [(W + hD)x + hb] = Dx + b
    np.testing.assert_allclose(got, [[6.0, 4.0]], atol=1e-9)


def test_jvp_checks_direction_keys():
    net = identity_net()
    with pytest.raises(ValueError, match="keys"):
        jvp_fd(net, TensorMap({"layer0.weight": np.eye(2)}), np.zeros((1, 2)))


# -------------------------------------------------------------- superposition


def test_superposition_error_vanishes_for_linear_nets():
    net = identity_net()
    rng = np.random.default_rng(3)
    d1, d2 = random_delta(net, rng), random_delta(net, rng)
    err = superposition_error(net, d1, d2, 0.05, rng.standard_normal((8, 2)))
    assert err < 1e-8


def test_superposition_error_rejects_nonpositive_scale():
    net = identity_net()
    d = random_delta(net, np.random.default_rng(0))
    with pytest.raises(ValueError, match="s must be positive"):
        superposition_error(net, d, d, 0.0, np.zeros((1, 2)))


def test_superposition_error_shrinks_quadratically():
    rng = np.random.default_rng(4)
    net = init_tiny_net((2, 8, 2), "tanh", rng)
    d1, d2 = random_delta(net, rng), random_delta(net, rng)
    probes = rng.standard_normal((16, 2))
    big = superposition_error(net, d1, d2, 0.02, probes)
    small = superposition_error(net, d1, d2, 0.01, probes)
    assert 3.5 <= big / small <= 4.5


def test_superposition_sweep_reproduces_frozen_run():
    sweep = superposition_sweep()
    assert sweep.scales == tuple(0.1 / 2**k for k in range(8))
    np.testing.assert_allclose(sweep.errors, SWEEP_ERRORS, rtol=1e-5)
    assert sweep.slope == pytest.approx(SWEEP_SLOPE, abs=1e-9)
    assert max(sweep.control_errors) < 1e-8


def test_superposition_sweep_needs_two_scales():
    with pytest.raises(ValueError, match="2 scales"):
        superposition_sweep(scales=(0.1,))


def test_sweep_dict_shape():
    d = superposition_sweep(scales=(0.1, 0.05), widths=(2, 4, 2), n_probe=4).to_dict()
    assert set(d) == {"scales", "errors", "slope", "control_errors"}
    assert len(d["errors"]) == 2


# ------------------------------------------------------------------- cosines


def test_cosine_stats_excludes_zero_increments():
    stats = CosineStats.from_cosines([], excluded=3)
    assert stats.excluded == 3
    assert math.isnan(stats.median_abs)


def test_cosine_stats_summaries():
    stats = CosineStats.from_cosines([0.5, -0.1, 0.2], excluded=0)
    assert stats.median_abs == pytest.approx(0.2)
    assert stats.mean_abs == pytest.approx(0.8 / 3)
    assert stats.max_abs == pytest.approx(0.5)


def test_increment_cosine_counts_dead_probes():
    net = identity_net()
    zero = TensorMap({"layer0.weight": np.zeros((2, 2)), "layer0.bias": np.zeros(2)})
    live = TensorMap({"layer0.weight": np.eye(2), "layer0.bias": np.zeros(2)})
    stats = increment_cosine(net, zero, live, np.ones((5, 2)))
    assert stats.excluded == 5
    assert stats.cosines == ()


def test_constructed_deltas_are_numerically_orthogonal():
    base, d_distill, d_align, probes = constructed_circle_deltas()
    stats = increment_cosine(base, d_distill, d_align, probes)
    assert stats.excluded == 0
    assert stats.max_abs < 1e-10


def test_constructed_increments_are_radial_and_tangential():
    base, d_distill, d_align, probes = constructed_circle_deltas(epsilon=0.1)
    base_out = forward(base, probes)
    merged_d = TensorMap(
        {k: base.weights[k] + d_distill[k] for k in base.weights.names()}
    )
    inc_d = forward(base, probes, merged_d) - base_out
    # radial: parallel to the probe itself
    for x, inc in zip(probes, inc_d):
        np.testing.assert_allclose(inc, 0.1 * x, atol=1e-12)


def test_constructed_deltas_validation():
    with pytest.raises(ValueError, match="epsilon"):
        constructed_circle_deltas(epsilon=0.0)


def test_train_to_targets_fits_a_linear_map():
    rng = np.random.default_rng(6)
    net = identity_net()
    x = rng.standard_normal((64, 2))
    target = x @ np.array([[0.5, 0.0], [0.0, 2.0]]).T
    fitted = train_to_targets(net, x, target, steps=2000, lr=0.1)
    np.testing.assert_allclose(forward(fitted, x), target, atol=1e-3)
