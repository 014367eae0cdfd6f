"""Cluster-assignment network: features, manual backprop, Adam, checkpoints.

A small feedforward net maps a subject's feature vector to a softmax over
clusters.  Everything is plain numpy with hand-written reverse mode; the
model also owns the unconstrained log-rate parameter of the learnable
termination model so one optimizer step updates all trainables together.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, SubjectRecord
from .errors import DataFormatError

CHECKPOINT_MAGIC = "DEEPCLIFE1"

FEATURE_STAT_NAMES = ["event_count", "gap_mean", "gap_var", "gap_min", "gap_max",
                      "last_event_time"]


def extract_features(subject: SubjectRecord, tau: int) -> np.ndarray:
    """Covariates plus summary statistics of the events in [join, join + tau].

    The statistics block is: event count, mean / variance / min / max of the
    inter-event times inside the window, and the (relative) time of the last
    in-window event.  An empty window contributes zeros with a count of 0.
    """
    if tau <= 0:
        raise ValueError("tau must be a positive integer")
    gaps = subject.inter_event_times
    event_times = np.cumsum(gaps)
    inside = event_times <= tau
    window = gaps[inside]
    if len(window) == 0:
        stats = np.zeros(6)
    else:
        wf = window.astype(float)
        stats = np.array([len(wf), wf.mean(), wf.var(), wf.min(), wf.max(),
                          float(event_times[inside][-1])])
    return np.concatenate([subject.covariates, stats])


def feature_matrix(data: Dataset, tau: int) -> np.ndarray:
    if not data.subjects:
        raise ValueError("no subjects")
    return np.stack([extract_features(s, tau) for s in data.subjects])


@dataclass
class BatchNormLayer:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5


@dataclass
class ModelParams:
    """All trainable state plus what inference needs to be self-contained."""

    layers: list[list[np.ndarray]]          # [W, b] per layer, output last
    log_rate: float = 0.0
    activation: str = "relu"
    batch_norm: list[BatchNormLayer] | None = None
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None
    event_features: bool = True

    @property
    def n_clusters(self) -> int:
        return self.layers[-1][0].shape[1]

    @property
    def feature_width(self) -> int:
        return self.layers[0][0].shape[0]

    def copy(self) -> "ModelParams":
        bn = None
        if self.batch_norm is not None:
            bn = [BatchNormLayer(l.gamma.copy(), l.beta.copy(),
                                 l.running_mean.copy(), l.running_var.copy(),
                                 l.momentum, l.eps)
                  for l in self.batch_norm]
        return ModelParams(
            layers=[[w.copy(), b.copy()] for w, b in self.layers],
            log_rate=self.log_rate, activation=self.activation, batch_norm=bn,
            feature_mean=None if self.feature_mean is None else self.feature_mean.copy(),
            feature_std=None if self.feature_std is None else self.feature_std.copy(),
            event_features=self.event_features)


def init_model(feature_width: int, n_clusters: int, hidden_layers: int,
               hidden_units: int, activation: str, batch_norm: bool,
               rng: np.random.Generator, log_rate: float = 0.0) -> ModelParams:
    """Symmetric uniform fan-in init for weights, zero biases."""
    widths = [feature_width] + [hidden_units] * hidden_layers + [n_clusters]
    layers = []
    for i in range(len(widths) - 1):
        scale = 1.0 / np.sqrt(widths[i])
        w = rng.uniform(-scale, scale, size=(widths[i], widths[i + 1]))
        layers.append([w, np.zeros(widths[i + 1])])
    bn = None
    if batch_norm:
        bn = [BatchNormLayer(gamma=np.ones(hidden_units), beta=np.zeros(hidden_units),
                             running_mean=np.zeros(hidden_units),
                             running_var=np.ones(hidden_units))
              for _ in range(hidden_layers)]
    return ModelParams(layers=layers, log_rate=log_rate, activation=activation,
                       batch_norm=bn)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {kind!r}")


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(float)
    return 1.0 - np.tanh(z) ** 2


def forward(params: ModelParams, features: np.ndarray,
            training: bool = False) -> tuple[np.ndarray, list]:
    """Softmax cluster probabilities for a batch; caches kept for backward.

    With batch norm enabled, training mode normalizes by batch statistics
    and updates the running buffers; inference mode uses the running stats.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != params.feature_width:
        raise ValueError(f"feature width {x.shape[1]} != model width {params.feature_width}")
    caches = []
    h = x
    n_layers = len(params.layers)
    for li, (w, b) in enumerate(params.layers):
        z = h @ w + b
        bn_cache = None
        if li < n_layers - 1:
            if params.batch_norm is not None:
                bn = params.batch_norm[li]
                if training:
                    mu = z.mean(axis=0)
                    var = z.var(axis=0)
                    bn.running_mean = (1 - bn.momentum) * bn.running_mean + bn.momentum * mu
                    bn.running_var = (1 - bn.momentum) * bn.running_var + bn.momentum * var
                else:
                    mu, var = bn.running_mean, bn.running_var
                inv_std = 1.0 / np.sqrt(var + bn.eps)
                z_hat = (z - mu) * inv_std
                bn_cache = (z_hat, inv_std)
                z = bn.gamma * z_hat + bn.beta
            a = _activate(z, params.activation)
        else:
            shifted = z - z.max(axis=1, keepdims=True)
            ez = np.exp(shifted)
            a = ez / ez.sum(axis=1, keepdims=True)
        caches.append((h, z, a, bn_cache))
        h = a
    return h, caches


@dataclass
class Gradients:
    layers: list[list[np.ndarray]]
    bn: list[list[np.ndarray]] | None = None   # [dgamma, dbeta] per hidden layer
    log_rate: float = 0.0


def backward(params: ModelParams, caches: list, grad_alpha: np.ndarray,
             training: bool = True) -> Gradients:
    """Push d(loss)/d(alpha) back to all weight gradients."""
    n_layers = len(params.layers)
    alpha = caches[-1][2]
    # softmax jacobian-vector product
    gz = alpha * (grad_alpha - np.sum(grad_alpha * alpha, axis=1, keepdims=True))
    layer_grads: list[list[np.ndarray]] = [None] * n_layers
    bn_grads = None if params.batch_norm is None else [None] * (n_layers - 1)
    for li in range(n_layers - 1, -1, -1):
        h_in, _, _, _ = caches[li]
        layer_grads[li] = [h_in.T @ gz, gz.sum(axis=0)]
        if li == 0:
            break
        w = params.layers[li][0]
        gh = gz @ w.T
        _, z_prev, _, bn_cache = caches[li - 1]
        ga = gh * _activate_grad(z_prev, params.activation)
        if params.batch_norm is not None:
            bn = params.batch_norm[li - 1]
            z_hat, inv_std = bn_cache
            bn_grads[li - 1] = [np.sum(ga * z_hat, axis=0), ga.sum(axis=0)]
            g_hat = ga * bn.gamma
            if training:
                m = z_hat.shape[0]
                gz = (inv_std / m) * (m * g_hat - g_hat.sum(axis=0)
                                      - z_hat * np.sum(g_hat * z_hat, axis=0))
            else:
                gz = g_hat * inv_std
        else:
            gz = ga
    return Gradients(layers=layer_grads, bn=bn_grads)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

class Adam:
    """Standard Adam over the model's trainable arrays plus log_rate."""

    def __init__(self, params: ModelParams, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m_layers = [[np.zeros_like(w), np.zeros_like(b)] for w, b in params.layers]
        self.v_layers = [[np.zeros_like(w), np.zeros_like(b)] for w, b in params.layers]
        self.m_bn = self.v_bn = None
        if params.batch_norm is not None:
            self.m_bn = [[np.zeros_like(l.gamma), np.zeros_like(l.beta)]
                         for l in params.batch_norm]
            self.v_bn = [[np.zeros_like(l.gamma), np.zeros_like(l.beta)]
                         for l in params.batch_norm]
        self.m_rate = 0.0
        self.v_rate = 0.0

    def _update(self, value, grad, m, v):
        m *= self.beta1
        m += (1 - self.beta1) * grad
        v *= self.beta2
        v += (1 - self.beta2) * grad * grad
        m_hat = m / (1 - self.beta1 ** self.step_count)
        v_hat = v / (1 - self.beta2 ** self.step_count)
        value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def step(self, params: ModelParams, grads: Gradients,
             update_log_rate: bool = True) -> None:
        self.step_count += 1
        for li, (w, b) in enumerate(params.layers):
            self._update(w, grads.layers[li][0], self.m_layers[li][0], self.v_layers[li][0])
            self._update(b, grads.layers[li][1], self.m_layers[li][1], self.v_layers[li][1])
        if params.batch_norm is not None and grads.bn is not None:
            for li, bn in enumerate(params.batch_norm):
                if grads.bn[li] is None:
                    continue
                self._update(bn.gamma, grads.bn[li][0], self.m_bn[li][0], self.v_bn[li][0])
                self._update(bn.beta, grads.bn[li][1], self.m_bn[li][1], self.v_bn[li][1])
        if update_log_rate:
            g = grads.log_rate
            self.m_rate = self.beta1 * self.m_rate + (1 - self.beta1) * g
            self.v_rate = self.beta2 * self.v_rate + (1 - self.beta2) * g * g
            m_hat = self.m_rate / (1 - self.beta1 ** self.step_count)
            v_hat = self.v_rate / (1 - self.beta2 ** self.step_count)
            params.log_rate -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# ---------------------------------------------------------------------------
# checkpoint serialization (text, exact)
# ---------------------------------------------------------------------------

def _encode_array(name: str, arr: np.ndarray) -> list[str]:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    shape = ",".join(str(d) for d in arr.shape)
    payload = base64.b64encode(arr.tobytes()).decode("ascii")
    return [f"array {name} {shape}", payload]


def save_checkpoint(params: ModelParams, path: str | Path,
                    config_echo: dict | None = None, seed: int | None = None) -> None:
    """Self-describing text checkpoint; arrays are exact (base64 of float64)."""
    lines = [CHECKPOINT_MAGIC]
    lines.append(f"activation={params.activation}")
    lines.append(f"n_layers={len(params.layers)}")
    lines.append(f"batch_norm={int(params.batch_norm is not None)}")
    lines.append(f"event_features={int(params.event_features)}")
    lines.append(f"log_rate={params.log_rate!r}")
    if seed is not None:
        lines.append(f"seed={seed}")
    for key, value in (config_echo or {}).items():
        lines.append(f"config.{key}={value}")
    for li, (w, b) in enumerate(params.layers):
        lines += _encode_array(f"layer{li}.W", w)
        lines += _encode_array(f"layer{li}.b", b)
    if params.batch_norm is not None:
        for li, bn in enumerate(params.batch_norm):
            lines += _encode_array(f"bn{li}.gamma", bn.gamma)
            lines += _encode_array(f"bn{li}.beta", bn.beta)
            lines += _encode_array(f"bn{li}.running_mean", bn.running_mean)
            lines += _encode_array(f"bn{li}.running_var", bn.running_var)
    if params.feature_mean is not None:
        lines += _encode_array("feature_mean", params.feature_mean)
        lines += _encode_array("feature_std", params.feature_std)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> ModelParams:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: not a {CHECKPOINT_MAGIC} checkpoint")
    scalars: dict[str, str] = {}
    arrays: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.startswith("array "):
            _, name, shape = line.split(" ")
            dims = tuple(int(d) for d in shape.split(",")) if shape else ()
            raw = base64.b64decode(lines[i + 1])
            arrays[name] = np.frombuffer(raw, dtype=np.float64).reshape(dims).copy()
            i += 2
        else:
            key, _, value = line.partition("=")
            scalars[key] = value
            i += 1
    n_layers = int(scalars["n_layers"])
    layers = [[arrays[f"layer{li}.W"], arrays[f"layer{li}.b"]]
              for li in range(n_layers)]
    bn = None
    if int(scalars.get("batch_norm", "0")):
        bn = [BatchNormLayer(gamma=arrays[f"bn{li}.gamma"], beta=arrays[f"bn{li}.beta"],
                             running_mean=arrays[f"bn{li}.running_mean"],
                             running_var=arrays[f"bn{li}.running_var"])
              for li in range(n_layers - 1)]
    return ModelParams(layers=layers, log_rate=float(scalars["log_rate"]),
                       activation=scalars.get("activation", "relu"), batch_norm=bn,
                       feature_mean=arrays.get("feature_mean"),
                       feature_std=arrays.get("feature_std"),
                       event_features=bool(int(scalars.get("event_features", "1"))))
