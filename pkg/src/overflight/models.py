"""Baseline classifiers on a small self-contained layer engine.

Three models: L2 logistic regression on flattened MFCCs, an MLP
(128/32 ReLU hidden layers) and a three-block CNN, all trained with
Adam on class-weighted binary cross-entropy. Everything is numpy,
double precision and bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize
import scipy.special

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PROB_EPS = 1e-12

CHECKPOINT_MAGIC = b"OFMC"


class ModelError(Exception):
    pass


class SingleClass(ModelError):
    """Training data contains only one class."""


class NonFinite(ModelError):
    pass


class NonFiniteLoss(ModelError):
    """Training diverged."""


class ShapeMismatch(ModelError):
    pass


# ---------------------------------------------------------------- layers

class Layer:
    params: List[np.ndarray]
    grads: List[np.ndarray]
    l2: List[float]

    def __init__(self):
        self.params, self.grads, self.l2 = [], [], []

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


class Flatten(Layer):
    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Dense(Layer):
    def __init__(self, n_in, n_out, rng, l2=0.0):
        super().__init__()
        limit = np.sqrt(6.0 / (n_in + n_out))  # Glorot uniform
        self.w = rng.uniform(-limit, limit, size=(n_in, n_out))
        self.b = np.zeros(n_out)
        self.params = [self.w, self.b]
        self.grads = [np.zeros_like(self.w), np.zeros_like(self.b)]
        self.l2 = [l2, 0.0]  # biases are never regularized

    def forward(self, x, train=False):
        if x.shape[1] != self.w.shape[0]:
            raise ShapeMismatch("dense expected %d inputs, got %d"
                                % (self.w.shape[0], x.shape[1]))
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad):
        self.grads[0][...] = self._x.T @ grad
        self.grads[1][...] = grad.sum(axis=0)
        return grad @ self.w.T


class ReLU(Layer):
    def forward(self, x, train=False):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class Sigmoid(Layer):
    def forward(self, x, train=False):
        self._out = 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))
        return self._out

    def backward(self, grad):
        return grad * self._out * (1.0 - self._out)


class Dropout(Layer):
    """Inverted dropout: active only in training, scaled by 1/(1-p)."""

    def __init__(self, p, rng):
        super().__init__()
        self.p = p
        self._rng = rng

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        self._mask = (self._rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask


class Conv2D(Layer):
    """Valid (no padding) convolution, NHWC layout, stride 1."""

    def __init__(self, in_ch, out_ch, kh, kw, rng, l2=0.0):
        super().__init__()
        fan_in = kh * kw * in_ch
        fan_out = kh * kw * out_ch
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        self.w = rng.uniform(-limit, limit, size=(kh, kw, in_ch, out_ch))
        self.b = np.zeros(out_ch)
        self.kh, self.kw = kh, kw
        self.params = [self.w, self.b]
        self.grads = [np.zeros_like(self.w), np.zeros_like(self.b)]
        self.l2 = [l2, 0.0]

    def _patches(self, x):
        n, h, w, c = x.shape
        oh, ow = h - self.kh + 1, w - self.kw + 1
        s0, s1, s2, s3 = x.strides
        shape = (n, oh, ow, self.kh, self.kw, c)
        strides = (s0, s1, s2, s1, s2, s3)
        return np.lib.stride_tricks.as_strided(x, shape, strides), oh, ow

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[3] != self.w.shape[2]:
            raise ShapeMismatch("conv expected NHWC with %d channels"
                                % self.w.shape[2])
        if x.shape[1] < self.kh or x.shape[2] < self.kw:
            raise ShapeMismatch("input smaller than kernel")
        self._x = np.ascontiguousarray(x)
        patches, oh, ow = self._patches(self._x)
        cols = patches.reshape(x.shape[0] * oh * ow, -1)
        self._cols, self._oh, self._ow = cols, oh, ow
        out = cols @ self.w.reshape(-1, self.w.shape[3]) + self.b
        return out.reshape(x.shape[0], oh, ow, self.w.shape[3])

    def backward(self, grad):
        n, oh, ow, f = grad.shape
        gcols = grad.reshape(n * oh * ow, f)
        self.grads[0][...] = (self._cols.T @ gcols).reshape(self.w.shape)
        self.grads[1][...] = gcols.sum(axis=0)
        gx = np.zeros_like(self._x)
        wflat = self.w.reshape(-1, f)
        gpatch = (gcols @ wflat.T).reshape(n, oh, ow, self.kh, self.kw, -1)
        for i in range(self.kh):
            for j in range(self.kw):
                gx[:, i:i + oh, j:j + ow, :] += gpatch[:, :, :, i, j, :]
        return gx


class MaxPool2D:
    """Max pooling with "same" padding (TensorFlow convention)."""

    def __init__(self, pool, stride):
        self.params, self.grads, self.l2 = [], [], []
        self.pool = pool
        self.stride = stride

    @staticmethod
    def _pad_amount(size, pool, stride):
        out = -(-size // stride)  # ceil
        total = max((out - 1) * stride + pool - size, 0)
        return out, total // 2, total - total // 2

    def forward(self, x, train=False):
        n, h, w, c = x.shape
        oh, pt, pb = self._pad_amount(h, self.pool, self.stride)
        ow, pl, pr = self._pad_amount(w, self.pool, self.stride)
        padded = np.full((n, h + pt + pb, w + pl + pr, c), -np.inf)
        padded[:, pt:pt + h, pl:pl + w, :] = x
        out = np.full((n, oh, ow, c), -np.inf)
        argmax = np.zeros((n, oh, ow, c, 2), dtype=np.int64)
        for i in range(self.pool):
            for j in range(self.pool):
                cand = padded[:, i:i + oh * self.stride:self.stride,
                              j:j + ow * self.stride:self.stride, :]
                better = cand > out
                out = np.where(better, cand, out)
                argmax[..., 0] = np.where(better, i, argmax[..., 0])
                argmax[..., 1] = np.where(better, j, argmax[..., 1])
        self._ctx = (x.shape, (pt, pl), argmax)
        return out

    def backward(self, grad):
        (n, h, w, c), (pt, pl), argmax = self._ctx
        gx = np.zeros((n, h, w, c))
        oh, ow = grad.shape[1], grad.shape[2]
        ni, oi, oj, ci = np.meshgrid(np.arange(n), np.arange(oh),
                                     np.arange(ow), np.arange(c),
                                     indexing="ij")
        ri = oi * self.stride + argmax[..., 0] - pt
        rj = oj * self.stride + argmax[..., 1] - pl
        valid = (ri >= 0) & (ri < h) & (rj >= 0) & (rj < w)
        np.add.at(gx, (ni[valid], ri[valid], rj[valid], ci[valid]),
                  grad[valid])
        return gx


class Sequential:
    def __init__(self, layers: Sequence):
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self):
        out = []
        for layer in self.layers:
            for p, g, l2 in zip(layer.params, layer.grads, layer.l2):
                out.append((p, g, l2))
        return out


# ---------------------------------------------------------------- specs

@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "logreg", "mlp" or "cnn"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("logreg", "mlp", "cnn"):
            raise ModelError("unknown model kind %r" % self.kind)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 216
    learning_rate: float = 0.001
    shuffle_seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size) <= 0 or self.learning_rate <= 0:
            raise ModelError("training config values must be positive")


@dataclass
class TrainedModel:
    spec: ModelSpec
    net: Optional[Sequential]
    history: List[float] = field(default_factory=list)
    logreg_w: Optional[np.ndarray] = None
    logreg_b: float = 0.0

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = prepare_input(self.spec.kind, x)
        if self.spec.kind == "logreg":
            z = x @ self.logreg_w + self.logreg_b
            return 1.0 / (1.0 + np.exp(-z))
        return self.net.forward(x, train=False).ravel()


def prepare_input(kind: str, x: np.ndarray) -> np.ndarray:
    """Adapt (N, 13, 216) feature stacks to the shape each model wants."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "cnn":
        if x.ndim == 3:
            x = x[..., None]
        return x
    if x.ndim > 2:
        x = x.reshape(x.shape[0], -1)
    return x


def build_network(spec: ModelSpec,
                  input_shape: Tuple[int, ...] = (13, 216)) -> Sequential:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    flat = int(np.prod(input_shape))
    if spec.kind == "mlp":
        return Sequential([
            Flatten(),
            Dense(flat, 128, rng, l2=1e-3), ReLU(), Dropout(0.4, rng),
            Dense(128, 32, rng, l2=1e-3), ReLU(), Dropout(0.4, rng),
            Dense(32, 1, rng), Sigmoid(),
        ])
    if spec.kind == "cnn":
        h, w = input_shape
        net = [
            Conv2D(1, 32, 3, 3, rng), ReLU(), MaxPool2D(3, 2), Dropout(0.4, rng),
            Conv2D(32, 32, 3, 3, rng), ReLU(), MaxPool2D(3, 2), Dropout(0.4, rng),
            Conv2D(32, 32, 2, 2, rng), ReLU(), MaxPool2D(2, 2), Dropout(0.4, rng),
            Flatten(),
        ]
        # trace shapes to size the dense head
        probe = np.zeros((1, h, w, 1))
        seq = Sequential(net)
        n_flat = seq.forward(probe).shape[1]
        net += [Dense(n_flat, 32, rng), ReLU(), Dropout(0.4, rng),
                Dense(32, 1, rng), Sigmoid()]
        return Sequential(net)
    raise ModelError("no network for kind %r" % spec.kind)


# ---------------------------------------------------------------- loss

def balanced_class_weights(y: np.ndarray) -> Tuple[float, float]:
    """sklearn-style "balanced": weight_c = n / (k * n_c) with k = 2."""
    n = len(y)
    n_pos = int(np.sum(y))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("both classes must be present")
    return n / (2.0 * n_neg), n / (2.0 * n_pos)


def weighted_bce(probs: np.ndarray, y: np.ndarray,
                 weights: Tuple[float, float] = (1.0, 1.0)) -> float:
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    w = np.where(y == 1, weights[1], weights[0])
    return float(-np.mean(w * (y * np.log(p) + (1 - y) * np.log(1 - p))))


def weighted_bce_grad(probs: np.ndarray, y: np.ndarray,
                      weights: Tuple[float, float] = (1.0, 1.0)) -> np.ndarray:
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    w = np.where(y == 1, weights[1], weights[0])
    return w * (-y / p + (1 - y) / (1 - p)) / len(y)


def regularization_loss(net: Sequential) -> float:
    return float(sum(l2 * np.sum(p * p)
                     for p, _, l2 in net.parameters() if l2))


# ---------------------------------------------------------------- training

class Adam:
    def __init__(self, params, lr):
        self.lr = lr
        self.params = params
        self.m = [np.zeros_like(p) for p, _, _ in params]
        self.v = [np.zeros_like(p) for p, _, _ in params]
        self.t = 0

    def step(self):
        self.t += 1
        for i, (p, g, l2) in enumerate(self.params):
            grad = g + 2.0 * l2 * p if l2 else g
            self.m[i] = ADAM_BETA1 * self.m[i] + (1 - ADAM_BETA1) * grad
            self.v[i] = ADAM_BETA2 * self.v[i] + (1 - ADAM_BETA2) * grad * grad
            mhat = self.m[i] / (1 - ADAM_BETA1 ** self.t)
            vhat = self.v[i] / (1 - ADAM_BETA2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + ADAM_EPS)


def train(spec: ModelSpec, x: np.ndarray, y: np.ndarray,
          cfg: TrainConfig = TrainConfig(),
          input_shape: Tuple[int, ...] = (13, 216)) -> TrainedModel:
    """Mini-batch Adam on class-weighted BCE for the MLP/CNN baselines."""
    if spec.kind == "logreg":
        return fit_logreg(x, y, spec=spec)
    y = np.asarray(y, dtype=np.float64).ravel()
    weights = balanced_class_weights(y)
    x = prepare_input(spec.kind, x)
    net = build_network(spec, input_shape=input_shape)
    opt = Adam(net.parameters(), cfg.learning_rate)
    rng = np.random.Generator(np.random.PCG64(cfg.shuffle_seed))
    history = []
    n = len(y)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            probs = net.forward(x[idx], train=True).ravel()
            loss = weighted_bce(probs, y[idx], weights)
            epoch_loss += loss * len(idx)
            grad = weighted_bce_grad(probs, y[idx], weights)
            net.backward(grad[:, None])
            opt.step()
        epoch_loss /= n
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss("loss diverged")
        history.append(epoch_loss)
    return TrainedModel(spec=spec, net=net, history=history)


def fit_logreg(x: np.ndarray, y: np.ndarray, l2: float = 1.0,
               class_weight: Optional[str] = None,
               spec: Optional[ModelSpec] = None) -> TrainedModel:
    """L2-regularized logistic regression, solved to gradient norm < 1e-6.

    Loss is sum of per-sample log losses plus 0.5 * l2 * ||w||^2 (bias
    unpenalized), minimized by L-BFGS with a Newton polish.
    """
    x = prepare_input("logreg", x)
    y = np.asarray(y, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise NonFinite("non-finite features")
    if len(np.unique(y)) < 2:
        raise SingleClass("both classes must be present")
    sw = np.ones_like(y)
    if class_weight == "balanced":
        w0, w1 = balanced_class_weights(y)
        sw = np.where(y == 1, w1, w0)
    n, d = x.shape
    sign = 2 * y - 1  # +-1

    def loss_grad(theta):
        w, b = theta[:d], theta[d]
        z = sign * (x @ w + b)
        loss = np.sum(sw * np.logaddexp(0.0, -z)) + 0.5 * l2 * w @ w
        s = sw * sign * scipy.special.expit(-z)
        gw = -(x.T @ s) + l2 * w
        gb = -np.sum(s)
        return loss, np.concatenate([gw, [gb]])

    theta0 = np.zeros(d + 1)
    res = scipy.optimize.minimize(loss_grad, theta0, jac=True,
                                  method="L-BFGS-B",
                                  options={"maxiter": 5000, "gtol": 1e-9,
                                           "ftol": 1e-15})
    theta = res.x
    for _ in range(50):  # Newton polish to meet the gradient-norm contract
        _, grad = loss_grad(theta)
        if np.linalg.norm(grad, np.inf) < 1e-6:
            break
        w, b = theta[:d], theta[d]
        p = 1.0 / (1.0 + np.exp(-(x @ w + b)))
        r = sw * p * (1 - p)
        xa = np.hstack([x, np.ones((n, 1))])
        hess = xa.T @ (xa * r[:, None])
        hess[:d, :d] += l2 * np.eye(d)
        hess += 1e-12 * np.eye(d + 1)
        theta = theta - np.linalg.solve(hess, grad)
    model = TrainedModel(spec=spec or ModelSpec(kind="logreg"), net=None)
    model.logreg_w = theta[:d]
    model.logreg_b = float(theta[d])
    model.history = [float(loss_grad(theta)[0])]
    return model


# ---------------------------------------------------------------- checking

def grad_check(net: Sequential, x: np.ndarray, y: np.ndarray,
               weights: Tuple[float, float] = (1.0, 1.0),
               h: float = 1e-5, n_points: int = 100,
               seed: int = 0) -> float:
    """Max relative error between analytic and central-difference
    gradients at randomly sampled parameter entries."""
    rng = np.random.Generator(np.random.PCG64(seed))
    y = np.asarray(y, dtype=np.float64).ravel()

    def full_loss():
        probs = net.forward(x, train=False).ravel()
        return weighted_bce(probs, y, weights) + regularization_loss(net)

    probs = net.forward(x, train=False).ravel()
    net.backward(weighted_bce_grad(probs, y, weights)[:, None])

    params = net.parameters()
    entries = []
    for pi, (p, g, l2) in enumerate(params):
        for flat in range(p.size):
            entries.append((pi, flat))
    if len(entries) > n_points:
        pick = rng.choice(len(entries), size=n_points, replace=False)
        entries = [entries[i] for i in pick]

    max_rel = 0.0
    for pi, flat in entries:
        p, g, l2 = params[pi]
        analytic = g.flat[flat] + 2.0 * l2 * p.flat[flat]
        orig = p.flat[flat]
        p.flat[flat] = orig + h
        lp = full_loss()
        p.flat[flat] = orig - h
        lm = full_loss()
        p.flat[flat] = orig
        numeric = (lp - lm) / (2 * h)
        denom = max(abs(analytic), abs(numeric), 1e-8)
        max_rel = max(max_rel, abs(analytic - numeric) / denom)
    return max_rel


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(path, model: TrainedModel) -> None:
    """Binary layout: magic, length-prefixed JSON descriptor, then each
    parameter tensor (ndim, dims, float64 LE) in declaration order."""
    if model.spec.kind == "logreg":
        tensors = [model.logreg_w, np.array([model.logreg_b])]
    else:
        tensors = [p for p, _, _ in model.net.parameters()]
    desc = json.dumps({"kind": model.spec.kind, "seed": model.spec.seed,
                       "history": model.history}).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(desc)))
        fh.write(desc)
        fh.write(struct.pack("<I", len(tensors)))
        for t in tensors:
            fh.write(struct.pack("<I", t.ndim))
            fh.write(struct.pack("<%dI" % t.ndim, *t.shape))
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_checkpoint(path, input_shape: Tuple[int, ...] = (13, 216)
                    ) -> TrainedModel:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ModelError("bad checkpoint magic")
        (desc_len,) = struct.unpack("<I", fh.read(4))
        desc = json.loads(fh.read(desc_len))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = []
        for _ in range(count):
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack("<%dI" % ndim, fh.read(4 * ndim))
            size = int(np.prod(shape))
            data = np.frombuffer(fh.read(size * 8), dtype="<f8")
            tensors.append(data.reshape(shape).copy())
    spec = ModelSpec(kind=desc["kind"], seed=desc["seed"])
    model = TrainedModel(spec=spec, net=None, history=desc["history"])
    if spec.kind == "logreg":
        model.logreg_w = tensors[0]
        model.logreg_b = float(tensors[1][0])
        return model
    net = build_network(spec, input_shape=input_shape)
    params = net.parameters()
    if len(params) != len(tensors):
        raise ModelError("checkpoint/architecture mismatch")
    for (p, _, _), t in zip(params, tensors):
        p[...] = t
    model.net = net
    return model
