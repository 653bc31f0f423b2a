import numpy as np
import pytest

from linksight import nn
from linksight.nn import ops
from linksight.nn.network import backward_pass, forward_pass, weighted_bce


def small_config(num_classes=5, padding=0, stride=1):
    return nn.NetworkConfig(8, (
        nn.conv(3, 3, stride=stride, padding=padding),
        nn.conv(2, 2),
        nn.maxpool(2),
        nn.flatten(),
        nn.dense(4),
        nn.output(num_classes),
    ), num_classes=num_classes)


def numeric_grad(f, arr, h=1e-4, picks=None):
    flat = arr.reshape(-1)
    out = {}
    for j in picks:
        old = flat[j]
        flat[j] = old + h
        up = f()
        flat[j] = old - h
        down = f()
        flat[j] = old
        out[j] = (up - down) / (2 * h)
    return out


def check_gradients(config, seed, n_checks=6):
    rng = np.random.default_rng(seed)
    state = nn.init_state(config, seed)
    for b in state.biases:
        if b is not None:
            b[:] = rng.normal(0, 0.1, b.shape)
    x = rng.normal(size=(3, config.input_size, config.input_size, 1))
    y = rng.integers(0, 5, size=3)
    cw = np.array([0.1, 1, 1, 1, 1.0])
    grads = nn.gradients(state, config, x, y, cw)
    f = lambda: nn.loss(state, config, x, y, cw)
    worst = 0.0
    for params, g in ((state.weights, grads.weights), (state.biases, grads.biases)):
        for p, gp in zip(params, g):
            if p is None:
                continue
            picks = rng.choice(p.size, size=min(n_checks, p.size), replace=False)
            num = numeric_grad(f, p, picks=picks)
            for j, v in num.items():
                a = gp.reshape(-1)[j]
                worst = max(worst, abs(a - v) / max(abs(a) + abs(v), 1e-7))
    return worst


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    assert check_gradients(small_config(), seed) <= 1e-4


def test_gradients_with_padding_and_stride():
    assert check_gradients(small_config(padding=1), 11) <= 1e-4
    cfg = nn.NetworkConfig(9, (nn.conv(2, 3, stride=2), nn.flatten(), nn.output(5)))
    assert check_gradients(cfg, 12) <= 1e-4


def test_gradients_binary_output():
    assert check_gradients(small_config(num_classes=1), 3) <= 1e-4


@pytest.mark.parametrize("stride,padding", [(1, 0), (1, 2), (2, 0), (3, 1)])
def test_fft_and_direct_routes_agree(monkeypatch, rng, stride, padding):
    x = rng.normal(size=(2, 13, 13, 3))
    w = rng.normal(size=(3, 3, 3, 4))
    b = rng.normal(size=4)
    dy_shape = None
    results = {}
    for route in (True, False):
        monkeypatch.setattr(ops, "use_fft", lambda *a, r=route: r)
        y, cache = ops.conv_forward(x, w, b, (stride, stride), (padding, padding))
        if dy_shape is None:
            dy_shape = y.shape
            dy = rng.normal(size=dy_shape)
        grads = ops.conv_backward(dy, w, cache, (stride, stride), (padding, padding))
        results[route] = (y, *grads)
    for a, c in zip(results[True], results[False]):
        assert np.allclose(a, c, atol=1e-10)


def test_conv_against_loops(rng):
    x = rng.normal(size=(1, 6, 6, 2))
    w = rng.normal(size=(3, 3, 2, 2))
    y, _ = ops.conv_forward(x, w, np.zeros(2))
    ref = np.zeros((4, 4, 2))
    for i in range(4):
        for j in range(4):
            for f in range(2):
                ref[i, j, f] = np.sum(x[0, i:i + 3, j:j + 3, :] * w[..., f])
    assert np.allclose(y[0], ref, atol=1e-12)


def test_maxpool_routes_to_argmax():
    x = np.array([[1, 5], [3, 2.0]]).reshape(1, 2, 2, 1)
    y, cache = ops.maxpool_forward(x)
    assert y.item() == 5
    dx = ops.maxpool_backward(np.ones((1, 1, 1, 1)), cache)
    assert dx.reshape(2, 2).tolist() == [[0, 1], [0, 0]]


def test_zero_weights_give_half():
    cfg = nn.default_config(16, filters=(2, 2, 2, 2), kernels=(3, 3, 3, 3), dense_units=4)
    scores = nn.forward(nn.zero_state(cfg), cfg, np.random.default_rng(0).normal(size=(16, 16)))
    assert np.array_equal(scores, np.full(5, 0.5))


def test_straight_line_oracle(rng):
    # conv 1x1 -> flatten -> output computed by hand
    cfg = nn.NetworkConfig(3, (nn.conv(1, 1), nn.flatten(), nn.output(5)))
    st = nn.init_state(cfg, 4)
    img = rng.normal(size=(3, 3))
    hidden = np.maximum(img * st.weights[0][0, 0, 0, 0] + st.biases[0][0], 0).reshape(-1)
    z = hidden @ st.weights[2] + st.biases[2]
    expected = 1 / (1 + np.exp(-z))
    assert np.allclose(nn.forward(st, cfg, img), expected, rtol=0, atol=1e-10)


def test_sigmoid_stable():
    s = ops.sigmoid(np.array([-800.0, 0.0, 800.0]))
    assert s.tolist() == [0.0, 0.5, 1.0]


def toy_images(n, rng):
    labels = np.arange(n) % 2
    imgs = rng.uniform(0, 0.4, size=(n, 8, 8))
    imgs[labels == 1] += 0.5
    return imgs, labels


def test_training_separable_toy():
    rng = np.random.default_rng(1)
    x, y = toy_images(40, rng)
    cfg = nn.NetworkConfig(8, (nn.conv(2, 3), nn.maxpool(2), nn.flatten(), nn.dense(4), nn.output(1)),
                           num_classes=1)
    st, hist = nn.train(nn.init_state(cfg, 0), cfg, x, y, class_weights=[1, 1], epochs=50,
                        learning_rate=0.1, batch_size=8)
    assert hist[-1] < hist[0]
    assert np.array_equal(nn.predict(st, cfg, x), y)


def test_zero_learning_rate_keeps_state():
    rng = np.random.default_rng(2)
    x, y = toy_images(8, rng)
    cfg = small_config()
    st0 = nn.init_state(cfg, 0)
    st1, _ = nn.train(st0, cfg, x, y, epochs=2, learning_rate=0.0)
    for a, b in zip(st0.weights + st0.biases, st1.weights + st1.biases):
        assert a is None or np.array_equal(a, b)


def test_training_is_deterministic():
    rng = np.random.default_rng(3)
    x, y = toy_images(16, rng)
    cfg = small_config()
    runs = [nn.train(nn.init_state(cfg, 7), cfg, x, y, epochs=2, learning_rate=0.1,
                     batch_size=4, seed=9) for _ in range(2)]
    for a, b in zip(runs[0][0].weights, runs[1][0].weights):
        assert a is None or np.array_equal(a, b)
    assert runs[0][1] == runs[1][1]


def test_zero_class_weight_zero_gradient():
    cfg = small_config()
    st = nn.init_state(cfg, 1)
    x = np.random.default_rng(4).normal(size=(2, 8, 8))
    g = nn.gradients(st, cfg, x, [0, 0], class_weights=[0, 1, 1, 1, 1])
    assert all(w is None or not w.any() for w in g.weights + g.biases)


def test_duplicated_batch_same_gradient():
    cfg = small_config()
    st = nn.init_state(cfg, 1)
    x = np.random.default_rng(5).normal(size=(2, 8, 8))
    g1 = nn.gradients(st, cfg, x, [1, 3])
    g2 = nn.gradients(st, cfg, np.concatenate([x, x]), [1, 3, 1, 3])
    for a, b in zip(g1.weights, g2.weights):
        assert a is None or np.allclose(a, b, atol=1e-14)


def test_weighted_bce_gradient_formula(rng):
    z = rng.normal(size=(4, 5))
    labels = np.array([0, 1, 2, 4])
    cw = np.array([0.1, 1, 1, 1, 1])
    loss, grad = weighted_bce(z, labels, cw, 5)
    t = np.eye(5)[labels]
    s = 1 / (1 + np.exp(-z))
    per = -(t * np.log(s) + (1 - t) * np.log(1 - s))
    assert np.isclose(loss, (cw[labels][:, None] * per).mean())
    assert np.allclose(grad, cw[labels][:, None] * (s - t) / 20)


def test_training_errors():
    cfg = small_config()
    st = nn.init_state(cfg, 0)
    with pytest.raises(nn.TrainingError):
        nn.train(st, cfg, np.zeros((0, 8, 8)), [])
    blown = st.copy()
    blown.weights[-1][:] = np.inf
    with pytest.raises(nn.TrainingError) as info:
        nn.train(blown, cfg, np.ones((2, 8, 8)), [1, 2], epochs=3)
    assert info.value.epoch == 0


def test_shape_errors():
    cfg = small_config()
    st = nn.init_state(cfg, 0)
    with pytest.raises(nn.ShapeError):
        nn.forward(st, cfg, np.zeros((7, 7)))
    other = nn.init_state(small_config(num_classes=1), 0)
    with pytest.raises(nn.ShapeError):
        nn.forward(other, cfg, np.zeros((8, 8)))


def test_config_validation():
    with pytest.raises(nn.ConfigError):
        nn.NetworkConfig(8, (nn.conv(2, 3, stride=2), nn.flatten(), nn.output(5)))
    with pytest.raises(nn.ConfigError):
        nn.NetworkConfig(8, (nn.flatten(), nn.output(3)), num_classes=3)
    with pytest.raises(nn.ConfigError):
        nn.NetworkConfig(8, (nn.flatten(), nn.dense(4)))
    with pytest.raises(nn.ConfigError):
        nn.NetworkConfig(8, (nn.dense(4), nn.output(5)))
    assert nn.default_config(300).shapes()[-1] == (5,)


def test_decide_binary_threshold():
    assert nn.decide(np.array([[0.5], [0.49]])).tolist() == [1, 0]
    assert nn.decide(np.array([[0.1, 0.7, 0.2]])).tolist() == [1]


def test_probe_sees_every_relu():
    cfg = small_config()
    st = nn.init_state(cfg, 0)
    x = np.random.default_rng(6).normal(size=(1, 8, 8, 1))
    logits, caches = forward_pass(st, cfg, x)
    seen = []
    backward_pass(st, cfg, caches, np.ones_like(logits), probe=lambda i, z, d: seen.append(i))
    assert seen == [4, 1, 0]
