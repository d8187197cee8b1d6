"""Mixture Density Network over interactee localization parameters.

A tanh MLP maps a descriptor to the parameters of an ``m``-component
spherical Gaussian mixture over ``(dx, dy, a)``. The output layer has
``5m`` units laid out as ``[m logits | 3m means | m log-sigmas]``.
Training minimizes the mean negative log-likelihood with plain minibatch
SGD and hand-derived gradients.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DimensionMismatch, NonFiniteLoss
from .geometry import LocalizationParams, PersonInstance, denormalize_to_box

OUT_DIM = 3
LOG_2PI = math.log(2.0 * math.pi)
MIN_AREA = 1e-4


@dataclass
class GmmParams:
    weights: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float).reshape(-1, OUT_DIM)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if abs(self.weights.sum() - 1.0) > 1e-9 or np.any(self.weights < 0):
            raise ValueError("mixture weights must lie on the simplex")
        if np.any(self.sigmas <= 0):
            raise ValueError("sigmas must be positive")

    @property
    def m(self) -> int:
        return len(self.weights)


@dataclass
class TrainConfig:
    iterations: int = 10_000
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    sigma_floor: float = 1e-3
    clip_norm: float | None = 10.0

    def __post_init__(self):
        if self.iterations < 0 or self.learning_rate <= 0 or self.batch_size < 1 or self.sigma_floor <= 0:
            raise ValueError(f"invalid training config {self}")


@dataclass
class MdnNetwork:
    input_dim: int
    hidden_dims: list[int]
    m: int
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    def copy(self) -> "MdnNetwork":
        return MdnNetwork(self.input_dim, list(self.hidden_dims), self.m,
                          [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def to_dict(self) -> dict:
        return {
            "format": "interactee-mdn",
            "version": 1,
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "m": self.m,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d) -> "MdnNetwork":
        dims = [d["input_dim"], *d["hidden_dims"], 5 * d["m"]]
        weights = [np.array(w, dtype=float).reshape(dims[i], dims[i + 1]) for i, w in enumerate(d["weights"])]
        biases = [np.array(b, dtype=float) for b in d["biases"]]
        return cls(d["input_dim"], list(d["hidden_dims"]), d["m"], weights, biases)


def mdn_init(input_dim: int, hidden_dims=(64,), m: int = 5, seed: int = 0) -> MdnNetwork:
    """Glorot-uniform weights, zero biases (uniform mixture, unit sigmas)."""
    if input_dim < 1 or m < 1 or any(h < 1 for h in hidden_dims):
        raise ValueError("all dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [input_dim, *hidden_dims, 5 * m]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MdnNetwork(input_dim, list(hidden_dims), m, weights, biases)


def _split_head(out, m):
    return out[:, :m], out[:, m:4 * m].reshape(-1, m, OUT_DIM), out[:, 4 * m:]


def _forward(net: MdnNetwork, X):
    acts = [X]
    h = X
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        h = np.tanh(h @ W + b)
        acts.append(h)
    out = h @ net.weights[-1] + net.biases[-1]
    return out, acts


def _check_dim(net, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.input_dim:
        raise DimensionMismatch(f"input has {X.shape[1]} features, network expects {net.input_dim}")
    return X


def forward_batch(net: MdnNetwork, X, sigma_floor: float = 1e-3):
    """Batched forward pass: ``(alpha (n,m), mu (n,m,3), sigma (n,m))``."""
    X = _check_dim(net, X)
    out, _ = _forward(net, X)
    logits, mu, log_sigma = _split_head(out, net.m)
    return softmax(logits, axis=1), mu, np.maximum(np.exp(log_sigma), sigma_floor)


def mdn_forward(net: MdnNetwork, x, sigma_floor: float = 1e-3) -> GmmParams:
    alpha, mu, sigma = forward_batch(net, x, sigma_floor)
    if alpha.shape[0] != 1:
        raise DimensionMismatch("mdn_forward takes a single input vector")
    return GmmParams(alpha[0], mu[0], sigma[0])


def _component_log_density(mu, sigma, Y):
    """``log N(y; mu_i, sigma_i^2 I)`` for every row/component: (n, m)."""
    sq = ((Y[:, None, :] - mu) ** 2).sum(axis=2)
    return -0.5 * OUT_DIM * LOG_2PI - OUT_DIM * np.log(sigma) - sq / (2.0 * sigma ** 2), sq


def nll(gmm: GmmParams, y) -> float:
    y = y.as_array() if isinstance(y, LocalizationParams) else np.asarray(y, dtype=float)
    logn, _ = _component_log_density(gmm.means[None], gmm.sigmas[None], y[None, :])
    with np.errstate(divide="ignore"):
        log_alpha = np.log(gmm.weights)
    return float(-logsumexp(log_alpha[None, :] + logn, axis=1)[0])


def loss_and_grads(net: MdnNetwork, X, Y, sigma_floor: float = 1e-3):
    """Mean NLL over the batch and its gradient for every parameter.

    Gradients are returned in :meth:`MdnNetwork.parameters` order.
    """
    X = _check_dim(net, X)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, m = X.shape[0], net.m
    out, acts = _forward(net, X)
    logits, mu, log_sigma = _split_head(out, m)
    raw_sigma = np.exp(log_sigma)
    clamped = raw_sigma < sigma_floor
    sigma = np.where(clamped, sigma_floor, raw_sigma)

    log_alpha = logits - logsumexp(logits, axis=1, keepdims=True)
    logn, sq = _component_log_density(mu, sigma, Y)
    joint = log_alpha + logn
    log_p = logsumexp(joint, axis=1, keepdims=True)
    loss = float(-log_p.mean())

    resp = np.exp(joint - log_p)  # posterior responsibility of each component
    alpha = np.exp(log_alpha)
    g_logits = alpha - resp
    g_mu = -resp[:, :, None] * (Y[:, None, :] - mu) / (sigma ** 2)[:, :, None]
    g_log_sigma = np.where(clamped, 0.0, resp * (OUT_DIM - sq / sigma ** 2))
    g_out = np.concatenate([g_logits, g_mu.reshape(n, 3 * m), g_log_sigma], axis=1) / n

    grads_w, grads_b = [], []
    delta = g_out
    for layer in range(len(net.weights) - 1, -1, -1):
        a_in = acts[layer]
        grads_w.append(a_in.T @ delta)
        grads_b.append(delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * (1.0 - a_in ** 2)
    grads_w.reverse()
    grads_b.reverse()
    return loss, [g for pair in zip(grads_w, grads_b) for g in pair]


def _mean_loss(net, X, Y, sigma_floor):
    alpha, mu, sigma = forward_batch(net, X, sigma_floor)
    logn, _ = _component_log_density(mu, sigma, np.atleast_2d(Y))
    with np.errstate(divide="ignore"):
        return float(-logsumexp(np.log(alpha) + logn, axis=1).mean())


def train(net: MdnNetwork, X, Y, cfg: TrainConfig | None = None):
    """Minibatch SGD on the mean NLL.

    Returns a trained copy of ``net`` and the per-iteration mean batch
    loss. The batch order is a fresh seeded permutation every epoch.
    """
    cfg = cfg or TrainConfig()
    X = _check_dim(net, X)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if len(X) < 1 or len(X) != len(Y):
        raise DimensionMismatch(f"{len(X)} inputs vs {len(Y)} targets")
    net = net.copy()
    params = net.parameters()
    rng = np.random.default_rng(cfg.seed)
    n = len(X)
    bs = min(cfg.batch_size, n)
    history = np.empty(cfg.iterations)
    order, pos = rng.permutation(n), 0
    for it in range(cfg.iterations):
        if pos + bs > n:
            order, pos = rng.permutation(n), 0
        idx = order[pos:pos + bs]
        pos += bs
        loss, grads = loss_and_grads(net, X[idx], Y[idx], cfg.sigma_floor)
        if not math.isfinite(loss):
            raise NonFiniteLoss(it, idx)
        if cfg.clip_norm is not None:
            norm = math.sqrt(sum(float((g ** 2).sum()) for g in grads))
            if norm > cfg.clip_norm:
                grads = [g * (cfg.clip_norm / norm) for g in grads]
        for p, g in zip(params, grads):
            p -= cfg.learning_rate * g
        history[it] = loss
    if not all(np.all(np.isfinite(p)) for p in params):
        raise NonFiniteLoss(cfg.iterations, [])
    return net, history


def gradient_check(net: MdnNetwork, x, y, epsilon: float = 1e-5, sigma_floor: float = 1e-3,
                   abs_floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    The error for each parameter is ``|g_a - g_n| / max(|g_a|, |g_n|, abs_floor)``.
    Central differences carry rounding noise of roughly ``eps_machine * |loss| / epsilon``
    (about 1e-10 here), so gradients far below ``abs_floor`` are compared in
    absolute terms instead of being reported as large relative errors.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(y.as_array() if isinstance(y, LocalizationParams) else np.asarray(y, dtype=float))
    probe = net.copy()
    _, analytic = loss_and_grads(probe, x, y, sigma_floor)
    worst = 0.0
    for p, g_a in zip(probe.parameters(), analytic):
        flat, g_flat = p.reshape(-1), g_a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = _mean_loss(probe, x, y, sigma_floor)
            flat[i] = orig - epsilon
            down = _mean_loss(probe, x, y, sigma_floor)
            flat[i] = orig
            g_n = (up - down) / (2.0 * epsilon)
            rel = abs(g_flat[i] - g_n) / max(abs(g_flat[i]), abs(g_n), abs_floor)
            worst = max(worst, rel)
    return worst


def best_component(gmm: GmmParams) -> int:
    return int(np.argmax(gmm.weights))


def mdn_predict(net: MdnNetwork, x, person: PersonInstance, sigma_floor: float = 1e-3):
    """Mean of the highest-prior component and its square box on ``person``."""
    gmm = mdn_forward(net, x, sigma_floor)
    dx, dy, a = gmm.means[best_component(gmm)]
    params = LocalizationParams(float(dx), float(dy), float(a) if a > 0 else MIN_AREA)
    return params, denormalize_to_box(params, person.person_box)


def mdn_sample(gmm: GmmParams, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` rows of ``(dx, dy, a)`` from the mixture.

    Samples are raw mixture draws, so ``a`` may come out non-positive.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    comp = rng.choice(gmm.m, size=n, p=gmm.weights)
    noise = rng.standard_normal((n, OUT_DIM))
    return gmm.means[comp] + gmm.sigmas[comp][:, None] * noise


class MixtureDensityRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`train` with input standardization.

    ``predict`` returns the highest-prior component mean per row.
    """

    def __init__(self, hidden_dims=(64,), n_components=5, iterations=10_000, learning_rate=1e-3,
                 batch_size=32, sigma_floor=1e-3, clip_norm=10.0, standardize=True, random_state=0):
        self.hidden_dims = hidden_dims
        self.n_components = n_components
        self.iterations = iterations
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.sigma_floor = sigma_floor
        self.clip_norm = clip_norm
        self.standardize = standardize
        self.random_state = random_state

    def fit(self, X, Y):
        X, Y = check_X_y(X, Y, dtype=float, multi_output=True)
        Y = Y.reshape(len(Y), -1)
        if Y.shape[1] != OUT_DIM:
            raise DimensionMismatch(f"targets must have {OUT_DIM} columns")
        if self.standardize:
            self.x_mean_ = X.mean(axis=0)
            scale = X.std(axis=0)
            self.x_scale_ = np.where(scale < 1e-12, 1.0, scale)
        else:
            self.x_mean_ = np.zeros(X.shape[1])
            self.x_scale_ = np.ones(X.shape[1])
        init_seed, train_seed = np.random.SeedSequence(self.random_state).generate_state(2)
        net = mdn_init(X.shape[1], tuple(self.hidden_dims), self.n_components, int(init_seed))
        cfg = TrainConfig(self.iterations, self.learning_rate, self.batch_size, int(train_seed),
                          self.sigma_floor, self.clip_norm)
        self.network_, self.loss_history_ = train(net, self._scale(X), Y, cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def _scale(self, X):
        return (X - self.x_mean_) / self.x_scale_

    def predict_gmm(self, X):
        check_is_fitted(self, "network_")
        X = check_array(np.atleast_2d(X), dtype=float)
        return forward_batch(self.network_, self._scale(X), self.sigma_floor)

    def predict(self, X):
        alpha, mu, _ = self.predict_gmm(X)
        best = alpha.argmax(axis=1)
        out = mu[np.arange(len(mu)), best].copy()
        out[:, 2] = np.where(out[:, 2] > 0, out[:, 2], MIN_AREA)
        return out

    def gmm(self, x) -> GmmParams:
        alpha, mu, sigma = self.predict_gmm(x)
        return GmmParams(alpha[0], mu[0], sigma[0])

    def to_dict(self) -> dict:
        check_is_fitted(self, "network_")
        return {
            "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.get_params().items()},
            "x_mean": self.x_mean_.tolist(),
            "x_scale": self.x_scale_.tolist(),
            "network": self.network_.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "MixtureDensityRegressor":
        params = dict(d["params"])
        params["hidden_dims"] = tuple(params["hidden_dims"])
        est = cls(**params)
        est.x_mean_ = np.array(d["x_mean"], dtype=float)
        est.x_scale_ = np.array(d["x_scale"], dtype=float)
        est.network_ = MdnNetwork.from_dict(d["network"])
        est.n_features_in_ = est.network_.input_dim
        est.loss_history_ = np.empty(0)
        return est

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
