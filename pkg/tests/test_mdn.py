import math

import numpy as np
import pytest
from sklearn.base import clone

from interactee.exceptions import DimensionMismatch, NonFiniteLoss
from interactee.geometry import BoundingBox, LocalizationParams, PersonInstance
from interactee.mdn import (
    GmmParams, MdnNetwork, MixtureDensityRegressor, TrainConfig, forward_batch, gradient_check,
    loss_and_grads, mdn_forward, mdn_init, mdn_predict, mdn_sample, nll, train,
)


def net_with_head(logits, means, log_sigmas, input_dim=2):
    """A network whose output ignores the input: zero weights, chosen head biases."""
    m = len(logits)
    net = mdn_init(input_dim, (3,), m, seed=0)
    net.weights[-1][:] = 0.0
    net.biases[-1][:] = np.concatenate([logits, np.ravel(means), log_sigmas])
    return net


def test_single_component_weight_is_one():
    gmm = mdn_forward(mdn_init(4, (5,), 1, seed=2), np.ones(4))
    assert gmm.weights.tolist() == [1.0]


def test_uniform_alpha_with_zeroed_logit_head():
    net = mdn_init(4, (8,), 5, seed=0)
    net.weights[-1][:, :5] = 0.0
    gmm = mdn_forward(net, np.arange(4.0))
    np.testing.assert_allclose(gmm.weights, 0.2, rtol=1e-15)


def test_init_deterministic():
    a, b = mdn_init(3, (4, 5), 2, seed=9), mdn_init(3, (4, 5), 2, seed=9)
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p, q)


def test_init_ranges():
    net = mdn_init(6, (10,), 3, seed=0)
    lim = math.sqrt(6 / 16)
    assert np.abs(net.weights[0]).max() <= lim
    assert all(np.all(b == 0) for b in net.biases)
    assert net.weights[-1].shape == (10, 15)


def test_softmax_hand_case():
    net = net_with_head([0.0, math.log(3)], np.zeros(6), [0.0, 0.0])
    gmm = mdn_forward(net, np.zeros(2))
    np.testing.assert_allclose(gmm.weights, [0.25, 0.75], rtol=1e-14)


def test_sigma_floor():
    net = net_with_head([0.0], np.zeros(3), [-1000.0])
    assert mdn_forward(net, np.zeros(2), sigma_floor=1e-3).sigmas.tolist() == [1e-3]


def test_forward_invariants(rng):
    for seed in range(5):
        net = mdn_init(4, (8,), 4, seed=seed)
        alpha, mu, sigma = forward_batch(net, rng.normal(size=(20, 4)) * 10)
        np.testing.assert_allclose(alpha.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(sigma >= 1e-3)


def test_forward_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        mdn_forward(mdn_init(4, (3,), 2, seed=0), np.zeros(5))


def test_nll_standard_gaussian_at_mean():
    gmm = GmmParams([1.0], [[0.1, 0.2, 0.3]], [1.0])
    assert nll(gmm, LocalizationParams(0.1, 0.2, 0.3)) == pytest.approx(1.5 * math.log(2 * math.pi), abs=1e-12)
    assert nll(gmm, np.array([0.1, 0.2, 0.3])) == pytest.approx(2.7568155996140185, abs=1e-12)


def test_nll_narrower_peak_is_smaller():
    y = np.array([0.0, 0.0, 1.0])
    assert nll(GmmParams([1.0], [y], [1.0]), y) < nll(GmmParams([1.0], [y], [2.0]), y)


def test_nll_identical_components():
    y = np.array([0.3, -0.1, 0.7])
    one = GmmParams([1.0], [[0.1, 0.1, 0.5]], [0.7])
    two = GmmParams([0.5, 0.5], [[0.1, 0.1, 0.5]] * 2, [0.7, 0.7])
    assert nll(two, y) == pytest.approx(nll(one, y), abs=1e-12)


def test_nll_component_permutation(rng):
    w = rng.dirichlet(np.ones(4))
    mu = rng.normal(size=(4, 3))
    s = rng.uniform(0.2, 2, 4)
    y = rng.normal(size=3)
    perm = rng.permutation(4)
    assert nll(GmmParams(w, mu, s), y) == pytest.approx(nll(GmmParams(w[perm], mu[perm], s[perm]), y), abs=1e-12)


def test_nll_far_point_is_finite():
    assert math.isfinite(nll(GmmParams([0.5, 0.5], [[0, 0, 0], [1, 1, 1]], [1e-3, 1e-3]), np.array([50.0, 50, 50])))


def test_loss_matches_nll(rng):
    net = mdn_init(3, (6,), 3, seed=1)
    X, Y = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    loss, _ = loss_and_grads(net, X, Y)
    expected = np.mean([nll(mdn_forward(net, x), y) for x, y in zip(X, Y)])
    assert loss == pytest.approx(expected, rel=1e-12)


def test_gradient_check_small_nets(rng):
    for seed in range(3):
        net = mdn_init(4, (8,), 3, seed=seed)
        assert gradient_check(net, rng.normal(size=4), rng.normal(size=3), 1e-5) < 1e-4


def test_gradient_check_two_hidden_layers(rng):
    net = mdn_init(3, (5, 4), 2, seed=4)
    assert gradient_check(net, rng.normal(size=3), rng.normal(size=3), 1e-5) < 1e-4


def test_gradient_check_deterministic(rng):
    net = mdn_init(4, (8,), 3, seed=0)
    x, y = rng.normal(size=4), rng.normal(size=3)
    assert gradient_check(net, x, y) == gradient_check(net, x, y)


def test_gradient_check_detects_wrong_gradient(rng, monkeypatch):
    import interactee.mdn as mdn

    real = mdn.loss_and_grads

    def skewed(*args, **kwargs):
        loss, grads = real(*args, **kwargs)
        return loss, [g * 1.01 for g in grads]

    net = mdn_init(4, (8,), 3, seed=1)
    x, y = rng.normal(size=4), rng.normal(size=3)
    monkeypatch.setattr(mdn, "loss_and_grads", skewed)
    assert gradient_check(net, x, y) > 5e-3


def test_unused_weight_has_zero_gradient():
    net = mdn_init(2, (3,), 2, seed=0)
    x = np.array([0.0, 1.0])  # first input is zero, so its outgoing weights get no gradient
    _, grads = loss_and_grads(net, x, np.zeros(3))
    np.testing.assert_array_equal(grads[0][0], 0.0)


def test_zero_iterations_is_noop(rng):
    net = mdn_init(3, (4,), 2, seed=0)
    out, hist = train(net, rng.normal(size=(10, 3)), rng.normal(size=(10, 3)), TrainConfig(iterations=0))
    assert len(hist) == 0
    for p, q in zip(net.parameters(), out.parameters()):
        np.testing.assert_array_equal(p, q)


def test_train_does_not_mutate_input(rng):
    net = mdn_init(3, (4,), 2, seed=0)
    before = [p.copy() for p in net.parameters()]
    train(net, rng.normal(size=(10, 3)), rng.normal(size=(10, 3)), TrainConfig(iterations=5))
    for p, q in zip(before, net.parameters()):
        np.testing.assert_array_equal(p, q)


def test_train_deterministic(rng):
    X, Y = rng.normal(size=(40, 3)), rng.normal(size=(40, 3))
    cfg = TrainConfig(iterations=50, seed=5)
    _, h1 = train(mdn_init(3, (4,), 2, seed=0), X, Y, cfg)
    _, h2 = train(mdn_init(3, (4,), 2, seed=0), X, Y, cfg)
    np.testing.assert_array_equal(h1, h2)


def test_non_finite_loss_reports_batch():
    net = mdn_init(2, (3,), 1, seed=0)
    X = np.array([[0.0, 0.0], [np.nan, 1.0]])
    with pytest.raises(NonFiniteLoss) as info:
        train(net, X, np.zeros((2, 3)), TrainConfig(iterations=3, batch_size=2))
    assert info.value.iteration == 0
    assert sorted(info.value.batch_indices) == [0, 1]


def test_predict_argmax_and_tie():
    means = [[0.75, 0.25, 0.25], [0.0, 0.0, 1.0]]
    person = PersonInstance("p", BoundingBox(0, 0, 100, 100), 300, 300)
    net = net_with_head([math.log(0.9), math.log(0.1)], means, [0.0, 0.0])
    params, box = mdn_predict(net, np.zeros(2), person)
    assert (params.dx, params.dy, params.a) == pytest.approx((0.75, 0.25, 0.25))
    assert box.center() == pytest.approx((125, 75)) and box.width == pytest.approx(50)
    tie = net_with_head([0.0, 0.0], means[::-1], [0.0, 0.0])
    params, _ = mdn_predict(tie, np.zeros(2), person)
    assert (params.dx, params.dy, params.a) == (0.0, 0.0, 1.0)


def test_predict_shift_invariant_logits():
    means = [[0.1, 0, 1], [0.2, 0, 1], [0.3, 0, 1]]
    person = PersonInstance("p", BoundingBox(0, 0, 10, 10), 100, 100)
    a, _ = mdn_predict(net_with_head([0.1, 2.0, 0.5], means, [0, 0, 0]), np.zeros(2), person)
    b, _ = mdn_predict(net_with_head([50.1, 52.0, 50.5], means, [0, 0, 0]), np.zeros(2), person)
    assert a == b


def test_predict_clamps_area():
    net = net_with_head([0.0], [[0.0, 0.0, -2.0]], [0.0])
    params, box = mdn_predict(net, np.zeros(2), PersonInstance("p", BoundingBox(0, 0, 10, 10), 100, 100))
    assert params.a == 1e-4
    assert box.width == pytest.approx(0.1)


def test_sample_degenerate_spread():
    gmm = GmmParams([1.0], [[0.5, 0.5, 0.5]], [1e-3])
    s = mdn_sample(gmm, 3, seed=0)
    assert np.abs(s - 0.5).max() < 1e-2


def test_sample_only_active_component():
    gmm = GmmParams([1.0, 0.0], [[0, 0, 0], [100, 100, 100]], [0.1, 0.1])
    assert np.abs(mdn_sample(gmm, 500, seed=1)).max() < 1.0


def test_sample_component_fraction():
    gmm = GmmParams([0.5, 0.5], [[0, 0, 0], [10, 10, 10]], [0.1, 0.1])
    s = mdn_sample(gmm, 10_000, seed=42)
    frac = np.mean(s[:, 0] < 5)
    assert abs(frac - 0.5) < 3 * math.sqrt(0.25 / 10_000)
    np.testing.assert_array_equal(s, mdn_sample(gmm, 10_000, seed=42))


def test_network_serialization_bit_exact(tmp_path, rng):
    X = rng.normal(size=(50, 3))
    Y = np.column_stack([X[:, :2], np.abs(X[:, 2]) + 0.1])
    est = MixtureDensityRegressor(hidden_dims=(6,), n_components=2, iterations=30).fit(X, Y)
    est.save(tmp_path / "mdn.json")
    back = MixtureDensityRegressor.load(tmp_path / "mdn.json")
    for p, q in zip(est.network_.parameters(), back.network_.parameters()):
        np.testing.assert_array_equal(p, q)
    np.testing.assert_array_equal(est.predict(X), back.predict(X))
    assert MdnNetwork.from_dict(est.network_.to_dict()).m == 2


def test_estimator_api(rng):
    est = MixtureDensityRegressor(hidden_dims=(4,), n_components=2, iterations=10)
    assert clone(est).get_params() == est.get_params()
    X = rng.normal(size=(20, 3))
    est.fit(X, rng.uniform(0.1, 1, (20, 3)))
    assert est.predict(X).shape == (20, 3)
    assert np.all(est.predict(X)[:, 2] > 0)
    with pytest.raises(DimensionMismatch):
        MixtureDensityRegressor(iterations=1).fit(X, rng.normal(size=(20, 2)))
