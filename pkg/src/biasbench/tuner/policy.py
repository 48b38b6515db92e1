"""Behavior-cloned threshold policy.

A small MLP regresses the expert's relative threshold change from the tiled
feature vector.  The loss is the mean Euclidean distance between predicted
and expert actions (both normalized by the action scale), minimized with
Adam.  The network and optimizer are implemented directly on numpy arrays:
training stays deterministic for a fixed seed, and the analytic gradients
can be checked against finite differences.

Action vectors are ordered (d_off, d_on), matching the action tuple layout.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from ..env import BiasAction
from .expert import Demonstration
from .features import FeatureVector

_LOSS_EPS = 1e-12

MODEL_MAGIC = b"BBM1"
MODEL_VERSION = 1


def _init_layers(dims: list[int], rng: np.random.Generator):
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        scale = math.sqrt(2.0 / d_in) if i < len(dims) - 2 else math.sqrt(1.0 / d_in)
        w = rng.normal(0.0, scale, size=(d_out, d_in))
        b = np.zeros(d_out)
        layers.append([w, b])
    return layers


def _forward(layers, x: np.ndarray):
    """Returns (output in (-1, 1), cache for backprop)."""
    acts = [x]
    zs = []
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w.T + b
        zs.append(z)
        h = np.tanh(z) if i == len(layers) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return h, (acts, zs)


def _loss_and_grad(layers, x: np.ndarray, y: np.ndarray):
    """Mean Euclidean distance between prediction and target plus gradients.

    Targets are expected pre-normalized to [-1, 1].
    """
    out, (acts, zs) = _forward(layers, x)
    diff = out - y
    dist = np.sqrt((diff**2).sum(axis=1) + _LOSS_EPS)
    loss = float(dist.mean())
    d_out = diff / (dist[:, None] * len(x))
    grads = [None] * len(layers)
    delta = d_out * (1.0 - acts[-1] ** 2)  # tanh'
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads[i] = [delta.T @ acts[i], delta.sum(axis=0)]
        if i > 0:
            delta = (delta @ w) * (zs[i - 1] > 0.0)  # relu'
    return loss, grads


def _batch_loss(layers, x: np.ndarray, y: np.ndarray) -> float:
    out, _ = _forward(layers, x)
    return float(np.sqrt(((out - y) ** 2).sum(axis=1) + _LOSS_EPS).mean())


class _Adam:
    def __init__(self, layers, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [[np.zeros_like(p) for p in layer] for layer in layers]
        self.v = [[np.zeros_like(p) for p in layer] for layer in layers]

    def step(self, layers, grads):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for li, layer in enumerate(layers):
            for pi, p in enumerate(layer):
                g = grads[li][pi]
                m = self.m[li][pi]
                v = self.v[li][pi]
                m += (1.0 - self.beta1) * (g - m)
                v += (1.0 - self.beta2) * (g * g - v)
                p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class BCPolicy:
    """MLP regressor with a saturating output: predictions never leave
    [-action_scale, action_scale].  Follows the fit/predict convention."""

    def __init__(
        self,
        hidden: tuple[int, ...] = (256, 256),
        action_scale: float = 125.0,
        lr: float = 3e-4,
        lr_decay: float = 1.0,
        batch_size: int = 256,
        epochs: int = 200,
        seed: int = 0,
        val_frac: float = 0.1,
    ):
        self.hidden = tuple(hidden)
        self.action_scale = float(action_scale)
        self.lr = float(lr)
        self.lr_decay = float(lr_decay)  # per-epoch multiplier; 1.0 = constant
        self.batch_size = int(batch_size)
        self.epochs = int(epochs)
        self.seed = int(seed)
        self.val_frac = float(val_frac)
        self.layers_ = None
        self.history_: list[dict] = []

    # -- sklearn-style parameter plumbing ---------------------------------
    def get_params(self, deep: bool = True) -> dict:
        return {
            "hidden": self.hidden,
            "action_scale": self.action_scale,
            "lr": self.lr,
            "lr_decay": self.lr_decay,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "val_frac": self.val_frac,
        }

    def set_params(self, **params) -> "BCPolicy":
        for k, v in params.items():
            if k not in self.get_params():
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        self.hidden = tuple(self.hidden)
        return self

    @property
    def input_dim(self) -> int:
        if self.layers_ is None:
            raise RuntimeError("policy is not trained")
        return self.layers_[0][0].shape[1]

    def _ensure_2d(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if self.layers_ is not None and x.shape[1] != self.input_dim:
            raise ValueError(f"feature dimension {x.shape[1]} != model input {self.input_dim}")
        return x

    def fit(self, features: np.ndarray, actions: np.ndarray) -> "BCPolicy":
        """Train on raw-scale actions of shape (n, 2), order (d_off, d_on)."""
        x = np.asarray(features, dtype=np.float64)
        y_raw = np.asarray(actions, dtype=np.float64)
        if len(x) == 0:
            raise ValueError("training set is empty")
        if x.ndim != 2 or y_raw.shape != (len(x), 2):
            raise ValueError("expected features (n, d) and actions (n, 2)")
        y = np.clip(y_raw / self.action_scale, -1.0, 1.0)
        rng = np.random.default_rng(self.seed)
        dims = [x.shape[1], *self.hidden, 2]
        self.layers_ = _init_layers(dims, rng)
        opt = _Adam(self.layers_, self.lr)

        self.opt_state_ = opt  # moments and step count, for inspection/resume
        n_val = int(round(self.val_frac * len(x)))
        perm = rng.permutation(len(x))
        val_idx, tr_idx = perm[:n_val], perm[n_val:]
        if len(tr_idx) == 0:  # tiny datasets train on everything
            tr_idx = perm
        xt, yt = x[tr_idx], y[tr_idx]
        xv, yv = x[val_idx], y[val_idx]

        self.history_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(xt))
            total = 0.0
            for s in range(0, len(order), self.batch_size):
                idx = order[s : s + self.batch_size]
                loss, grads = _loss_and_grad(self.layers_, xt[idx], yt[idx])
                if not math.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite training loss at epoch {epoch}: {loss!r}; "
                        f"lr={self.lr}, batch={len(idx)}"
                    )
                opt.step(self.layers_, grads)
                total += loss * len(idx)
            opt.lr *= self.lr_decay
            train_loss = total / len(xt)
            val_loss = _batch_loss(self.layers_, xv, yv) if len(xv) else train_loss
            self.history_.append({"epoch": epoch, "train": train_loss, "val": val_loss})
        return self

    def predict(self, features) -> np.ndarray:
        """Raw-scale continuous actions, shape (n, 2)."""
        if self.layers_ is None:
            raise RuntimeError("policy is not trained")
        x = self._ensure_2d(features)
        out, _ = _forward(self.layers_, x)
        return out * self.action_scale

    def normalized_loss(self, features, actions) -> float:
        x = self._ensure_2d(features)
        y = np.clip(np.asarray(actions, dtype=np.float64) / self.action_scale, -1.0, 1.0)
        return _batch_loss(self.layers_, x, y)


def policy_act(policy: BCPolicy, features: FeatureVector | np.ndarray) -> BiasAction:
    """One forward pass, de-normalized and rounded to an integer action."""
    vals = features.values if isinstance(features, FeatureVector) else features
    pred = policy.predict(vals)[0]
    return BiasAction(d_off=int(round(pred[0])), d_on=int(round(pred[1])))


def demos_to_arrays(demos: list[Demonstration]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([d.features.values for d in demos])
    y = np.array([[d.action.d_off, d.action.d_on] for d in demos], dtype=np.float64)
    return x, y


def train_bc(
    demos: list[Demonstration],
    lr: float = 3e-4,
    lr_decay: float = 1.0,
    batch_size: int = 256,
    epochs: int = 200,
    seed: int = 0,
    hidden: tuple[int, ...] = (256, 256),
    action_scale: float = 125.0,
    val_frac: float = 0.1,
) -> tuple[BCPolicy, list[dict]]:
    """Train a policy on demonstrations; returns (policy, loss history)."""
    if not demos:
        raise ValueError("demonstration dataset is empty")
    x, y = demos_to_arrays(demos)
    policy = BCPolicy(
        hidden=hidden,
        action_scale=action_scale,
        lr=lr,
        lr_decay=lr_decay,
        batch_size=batch_size,
        epochs=epochs,
        seed=seed,
        val_frac=val_frac,
    )
    policy.fit(x, y)
    return policy, policy.history_


def gradient_check(policy: BCPolicy, features: np.ndarray, actions: np.ndarray, h: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients
    over every parameter, on the given batch."""
    if policy.layers_ is None:
        raise RuntimeError("policy is not trained")
    x = np.asarray(features, dtype=np.float64)
    y = np.clip(np.asarray(actions, dtype=np.float64) / policy.action_scale, -1.0, 1.0)
    _, grads = _loss_and_grad(policy.layers_, x, y)
    worst = 0.0
    for li, layer in enumerate(policy.layers_):
        for pi, p in enumerate(layer):
            flat = p.ravel()
            gflat = grads[li][pi].ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                up = _batch_loss(policy.layers_, x, y)
                flat[j] = orig - h
                dn = _batch_loss(policy.layers_, x, y)
                flat[j] = orig
                num = (up - dn) / (2.0 * h)
                rel = abs(gflat[j] - num) / max(abs(gflat[j]) + abs(num), 1e-8)
                worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# Model file format: magic, version, layer dims, action scale, f64 weights.


def save_policy(policy: BCPolicy, path: str | Path) -> None:
    if policy.layers_ is None:
        raise RuntimeError("policy is not trained")
    dims = [policy.layers_[0][0].shape[1]] + [w.shape[0] for w, _ in policy.layers_]
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<HH", MODEL_VERSION, len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(struct.pack("<d", policy.action_scale))
        for w, b in policy.layers_:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_policy(path: str | Path) -> BCPolicy:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise ValueError(f"bad model magic {raw[:4]!r}")
    version, n_dims = struct.unpack_from("<HH", raw, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    off = 8
    dims = list(struct.unpack_from(f"<{n_dims}I", raw, off))
    off += 4 * n_dims
    (action_scale,) = struct.unpack_from("<d", raw, off)
    off += 8
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(raw, dtype="<f8", count=d_in * d_out, offset=off).reshape(d_out, d_in).copy()
        off += 8 * d_in * d_out
        b = np.frombuffer(raw, dtype="<f8", count=d_out, offset=off).copy()
        off += 8 * d_out
        layers.append([w, b])
    if off != len(raw):
        raise ValueError("trailing bytes in model file")
    policy = BCPolicy(hidden=tuple(dims[1:-1]), action_scale=action_scale)
    policy.layers_ = layers
    return policy
