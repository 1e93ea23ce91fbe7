"""Network forward/backward/Adam checks against independent oracles."""

import numpy as np
import pytest

from smadrl import network
from smadrl.errors import DivergenceError

from oracles import finite_difference_grads, mlp_forward_loops


def small_params(rng, dims=(5, 8, 7, 5), dtype=np.float64):
    return network.init_params(rng, dims[0], tuple(dims[1:-1]), dims[-1], dtype=dtype)


def test_zero_network_outputs_zeros():
    rng = np.random.default_rng(0)
    params = small_params(rng)
    params = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    out = network.forward(params, np.ones(5))
    assert np.all(out == 0.0)


def test_identity_single_layer():
    params = [(np.array([[1.0]]), np.zeros(1))]
    for x in (-2.0, 0.0, 3.5):
        assert network.forward(params, np.array([x]))[0] == x


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(1)
    for seed in range(5):
        params = small_params(np.random.default_rng(seed))
        x = rng.normal(size=5)
        ours = network.forward(params, x)
        oracle = mlp_forward_loops(params, x)
        assert np.allclose(ours, oracle, rtol=1e-12, atol=1e-12)


def test_forward_batch_matches_single():
    rng = np.random.default_rng(2)
    params = small_params(rng)
    batch = rng.normal(size=(6, 5))
    stacked = network.forward(params, batch)
    for row, x in zip(stacked, batch):
        assert np.allclose(row, network.forward(params, x), rtol=1e-12)


def test_forward_dimension_mismatch_rejected():
    params = small_params(np.random.default_rng(0))
    with pytest.raises(ValueError):
        network.forward(params, np.ones(4))
    with pytest.raises(ValueError):
        network.loss_and_grads(params, np.ones((2, 4)), np.zeros(2, dtype=int), np.zeros(2))


def test_loss_zero_when_targets_match_predictions():
    rng = np.random.default_rng(3)
    params = small_params(rng)
    obs = rng.normal(size=(4, 5))
    actions = np.array([0, 1, 2, 3])
    q = network.forward(params, obs)
    targets = q[np.arange(4), actions]
    loss, grads = network.loss_and_grads(params, obs, actions, targets)
    assert loss == 0.0
    for gw, gb in grads:
        assert np.all(gw == 0.0) and np.all(gb == 0.0)


def test_single_linear_param_gradient_by_hand():
    # One linear layer, batch of one: dL/dw = 2 * err * x on the taken action.
    w = np.zeros((1, 5))
    w[0, 3] = 1.5
    b = np.zeros(5)
    b[3] = 0.5
    params = [(w, b)]
    obs = np.array([[2.0]])
    actions = np.array([3])
    targets = np.array([7.0])
    loss, grads = network.loss_and_grads(params, obs, actions, targets)
    err = (2.0 * 1.5 + 0.5) - 7.0
    assert loss == pytest.approx(err**2)
    assert grads[0][0][0, 3] == pytest.approx(2 * err * 2.0)
    assert grads[0][1][3] == pytest.approx(2 * err)
    assert np.all(np.delete(grads[0][0][0], 3) == 0.0)


def _loop_loss(params, obs, actions, targets):
    """Loss recomputed with the loop-based forward oracle."""
    total = 0.0
    for x, a, y in zip(obs, actions, targets):
        q = mlp_forward_loops(params, x)
        total += (q[a] - y) ** 2
    return total / len(obs)


def _gradcheck_instance(seed, dims=(5, 8, 7, 5), batch=6, h=1e-5):
    """Build a random net/batch pair, keeping pre-activations away from the
    rectifier kink so the central difference stays two-sided."""
    rng = np.random.default_rng(seed)
    while True:
        params = small_params(rng, dims)
        obs = rng.normal(size=(batch, dims[0]))
        clear = True
        hidden = obs
        for w, b in params[:-1]:
            z = hidden @ w + b
            if np.min(np.abs(z)) < 1e-3:
                clear = False
                break
            hidden = np.maximum(z, 0.0)
        if clear:
            actions = rng.integers(0, dims[-1], size=batch)
            targets = rng.normal(size=batch)
            return params, obs, actions, targets


def assert_grads_match_fd(params, obs, actions, targets, h=1e-5, rel=1e-4):
    _, analytic = network.loss_and_grads(params, obs, actions, targets)
    fd = finite_difference_grads(
        lambda p: _loop_loss(p, obs, actions, targets), params, h=h
    )
    for (aw, ab), (fw, fb) in zip(analytic, fd):
        for a, f in ((aw, fw), (ab, fb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-6)
            assert np.max(np.abs(a - f) / denom) < rel


def test_gradients_match_finite_differences():
    for seed in range(3):
        params, obs, actions, targets = _gradcheck_instance(seed)
        assert_grads_match_fd(params, obs, actions, targets)


def test_non_finite_loss_raises():
    params = small_params(np.random.default_rng(0))
    obs = np.random.default_rng(0).normal(size=(2, 5))
    with pytest.raises(DivergenceError):
        network.loss_and_grads(params, obs, np.array([0, 1]), np.array([np.inf, 0.0]))


def test_adam_zero_grads_keep_params():
    params = small_params(np.random.default_rng(4))
    before = network.clone_params(params)
    adam = network.init_adam(params)
    zero = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    network.adam_update(params, adam, zero)
    assert adam.t == 1
    assert network.params_equal(params, before)


def test_adam_first_step_by_hand():
    params = [(np.zeros((1, 1)), np.zeros(1))]
    adam = network.init_adam(params, step_size=1e-4)
    grads = [(np.ones((1, 1)), np.zeros(1))]
    network.adam_update(params, adam, grads)
    # Bias correction makes the first step exactly -lr * g / (|g| + eps).
    expected = -1e-4 * 1.0 / (1.0 + 1e-8)
    assert params[0][0][0, 0] == pytest.approx(expected, rel=1e-12)
    assert params[0][1][0] == 0.0
    assert adam.t == 1


def test_adam_runs_bitwise_deterministic():
    def run():
        rng = np.random.default_rng(7)
        params = small_params(rng, dtype=np.float32)
        adam = network.init_adam(params, step_size=1e-3)
        for _ in range(20):
            obs = rng.normal(size=(4, 5)).astype(np.float32)
            actions = rng.integers(0, 5, size=4)
            targets = rng.normal(size=4).astype(np.float32)
            _, grads = network.loss_and_grads(params, obs, actions, targets)
            network.adam_update(params, adam, grads)
        return params

    a, b = run(), run()
    assert network.params_equal(a, b)


def test_float32_stays_float32():
    params = small_params(np.random.default_rng(0), dtype=np.float32)
    adam = network.init_adam(params)
    obs = np.ones((2, 5), dtype=np.float32)
    loss, grads = network.loss_and_grads(params, obs, np.array([0, 1]), np.zeros(2, dtype=np.float32))
    network.adam_update(params, adam, grads)
    assert all(w.dtype == np.float32 and b.dtype == np.float32 for w, b in params)
    assert all(gw.dtype == np.float32 for gw, _ in grads)
