import numpy as np
import pytest

from drq import nn
from helpers import fd_gradient, max_relative_gradient_error


def make_params(sizes, seed=0, init_scale=1.0):
    return nn.init_params(nn.LayerSpec(sizes), nn.TrainConfig(seed=seed, init_scale=init_scale))


def test_layer_spec_validation():
    with pytest.raises(ValueError):
        nn.LayerSpec((3, 1))  # no hidden layer
    with pytest.raises(ValueError):
        nn.LayerSpec((3, 0, 1))
    with pytest.raises(ValueError):
        nn.LayerSpec((3, 4, 2))  # output width != 1
    assert nn.LayerSpec((3, 10, 1)).input_width == 3


def test_forward_zero_params_is_zero():
    spec = nn.LayerSpec((3, 5, 1))
    params = nn.MlpParams(
        spec,
        [np.zeros((5, 3)), np.zeros((1, 5))],
        [np.zeros(5), np.zeros(1)],
    )
    for x in (np.zeros(3), np.ones(3), np.array([-2.0, 7.0, 0.3])):
        assert nn.forward(params, x) == 0.0


def test_forward_single_hidden_neuron_hand_value():
    # hidden weight 0, hidden bias 0 -> sigmoid(0) = 0.5; output weight 2 -> 1.0
    spec = nn.LayerSpec((1, 1, 1))
    params = nn.MlpParams(
        spec, [np.zeros((1, 1)), np.array([[2.0]])], [np.zeros(1), np.zeros(1)]
    )
    for x in (-3.0, 0.0, 11.0):
        assert nn.forward(params, np.array([x])) == pytest.approx(1.0, abs=1e-15)


def test_forward_deterministic_and_pure():
    params = make_params((4, 6, 3, 1), seed=7)
    x = np.array([0.1, -0.2, 0.9, 2.0])
    before = [w.copy() for w in params.weights]
    v1 = nn.forward(params, x)
    v2 = nn.forward(params, x)
    assert v1 == v2
    for w, w0 in zip(params.weights, before):
        assert np.array_equal(w, w0)


def test_forward_dimension_mismatch():
    params = make_params((3, 4, 1))
    with pytest.raises(ValueError):
        nn.forward(params, np.ones(5))


def test_hidden_activations_in_unit_interval():
    rng = np.random.default_rng(3)
    for _ in range(20):
        params = make_params((3, 8, 4, 1), seed=int(rng.integers(1000)), init_scale=3.0)
        x = rng.normal(scale=5.0, size=3)
        for act in nn.hidden_activations(params, x):
            assert np.all(act > 0.0) and np.all(act < 1.0)


def test_gradient_zero_when_target_matches():
    params = make_params((2, 5, 1), seed=1)
    x = np.array([0.3, -1.2])
    grads = nn.gradient(params, x, nn.forward(params, x))
    for dw, db in grads:
        assert np.allclose(dw, 0.0, atol=1e-12)
        assert np.allclose(db, 0.0, atol=1e-12)


def test_gradient_output_bias_is_twice_residual():
    params = make_params((3, 4, 4, 1), seed=5)
    x = np.array([0.5, 0.1, -0.4])
    target = -0.7
    residual = nn.forward(params, x) - target
    grads = nn.gradient(params, x, target)
    assert grads[-1][1][0] == pytest.approx(2.0 * residual, rel=1e-12)


def test_gradient_matches_finite_differences_100_random():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        n_in = int(rng.integers(1, 6))
        hidden = tuple(int(rng.integers(1, 7)) for _ in range(int(rng.integers(1, 4))))
        params = make_params((n_in, *hidden, 1), seed=int(rng.integers(2**31)), init_scale=2.0)
        x = rng.normal(size=n_in)
        target = float(rng.normal())
        analytic = nn.gradient(params, x, target)
        numeric = fd_gradient(params, x, target)
        worst = max(worst, max_relative_gradient_error(analytic, numeric))
    assert worst <= 1e-4


def test_fit_reduces_residual_on_repeated_pair():
    params = make_params((2, 4, 1), seed=9)
    x = np.array([[0.2, 0.8]] * 8)
    y = np.full(8, 0.6)
    data = nn.LabeledDataset(x, y)
    initial = abs(nn.forward(params, x[0]) - 0.6)
    fitted, residuals = nn.fit(params, data, nn.TrainConfig(epochs=200, seed=1))
    assert abs(residuals[0]) < initial


def test_fit_bit_identical_given_seed():
    rng = np.random.default_rng(11)
    x = rng.uniform(size=(30, 3))
    y = rng.normal(size=30)
    data = nn.LabeledDataset(x, y)
    cfg = nn.TrainConfig(epochs=10, seed=123)
    p1, r1 = nn.fit(make_params((3, 5, 1), seed=2), data, cfg)
    p2, r2 = nn.fit(make_params((3, 5, 1), seed=2), data, cfg)
    for a, b in zip(p1.weights + p1.biases, p2.weights + p2.biases):
        assert np.array_equal(a, b)
    assert np.array_equal(r1, r2)


def test_fit_loss_nonincreasing_constant_target():
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(16, 2))
    y = np.full(16, 0.25)
    data = nn.LabeledDataset(x, y)
    params = make_params((2, 6, 1), seed=3)
    # full-batch descent with a small rate: epoch-to-epoch loss trace
    losses = [float(np.mean((nn.forward_many(params, x) - y) ** 2))]
    for epoch in range(40):
        params, residuals = nn.fit(
            params, data, nn.TrainConfig(learning_rate=0.01, epochs=1, batch_size=16, seed=epoch)
        )
        losses.append(float(np.mean(residuals**2)))
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_fit_empty_dataset_rejected():
    params = make_params((2, 3, 1))
    data = nn.LabeledDataset(np.empty((0, 2)), np.empty(0))
    with pytest.raises(ValueError):
        nn.fit(params, data, nn.TrainConfig())


def test_fit_divergence_raises():
    rng = np.random.default_rng(8)
    x = rng.uniform(size=(32, 2))
    y = rng.normal(size=32)
    data = nn.LabeledDataset(x, y)
    params = make_params((2, 4, 1), seed=1)
    with pytest.raises(nn.DivergenceError):
        nn.fit(params, data, nn.TrainConfig(learning_rate=1e12, epochs=200, seed=0))


def test_fit_does_not_mutate_input_params():
    params = make_params((2, 3, 1), seed=6)
    snapshot = [w.copy() for w in params.weights] + [b.copy() for b in params.biases]
    data = nn.LabeledDataset(np.ones((4, 2)), np.zeros(4))
    nn.fit(params, data, nn.TrainConfig(epochs=5))
    for arr, orig in zip(params.weights + params.biases, snapshot):
        assert np.array_equal(arr, orig)


def test_snapshot_roundtrip(tmp_path):
    params = make_params((3, 4, 2, 1), seed=13)
    path = tmp_path / "net.txt"
    nn.save_params(params, path)
    loaded = nn.load_params(path)
    assert loaded.spec == params.spec
    for a, b in zip(params.weights + params.biases, loaded.weights + loaded.biases):
        assert np.array_equal(a, b)
