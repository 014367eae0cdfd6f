"""Training loop for the divergence-maximization objective.

Each iteration draws a minibatch, builds the per-cluster weighted KM curves
from the batch's soft assignments, takes the minimum divergence over cluster
pairs and ascends it (implemented as Adam descent on the negated objective,
plus an L2 penalty on the weight matrices).  A 20% holdout drives early
stopping on the validation objective; everything is deterministic for a
fixed seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .divergence import (DivergenceSpec, MinPairResult, default_pair_sampling,
                         min_pair_objective)
from .errors import DegenerateClusterError
from .network import (Adam, Gradients, ModelParams, backward, feature_matrix,
                      forward, init_model)
from .survival import KMTape, rate_for_median_inactivity

_TABLE_RANGES = {
    "hidden_layers": (1, 2, 3),
    "hidden_units": (128, 256),
    "batch_size": (128, 256, 1024),
    "learning_rate": (1e-3, 1e-2),
    "activation": ("tanh", "relu"),
    "l2": (1e-2, 0.0),
}

TERMINATION_MODES = ("observed", "learnable", "fixed")

# a pair is unusable on a batch when either soft cluster holds less than one
# expected subject
MIN_EFFECTIVE_N = 1.0


@dataclass(frozen=True)
class TrainConfig:
    n_clusters: int = 2
    hidden_layers: int = 1
    hidden_units: int = 128
    batch_size: int = 1024
    learning_rate: float = 1e-2
    activation: str = "relu"
    batch_norm: bool = False
    l2: float = 1e-2
    epochs: int = 100
    early_stop_patience: int = 15
    seed: int = 0
    tau: int = 1
    divergence: DivergenceSpec = field(default_factory=DivergenceSpec)
    termination_mode: str = "observed"
    fixed_window: int = 10
    event_features: bool = True

    def validate(self) -> None:
        if self.n_clusters < 2:
            raise ValueError("need at least two clusters")
        if self.termination_mode not in TERMINATION_MODES:
            raise ValueError(f"termination_mode must be one of {TERMINATION_MODES}")
        for name, allowed in _TABLE_RANGES.items():
            if getattr(self, name) not in allowed:
                warnings.warn(
                    f"{name}={getattr(self, name)!r} is outside the usual "
                    f"range {allowed}", stacklevel=2)


@dataclass
class TrainResult:
    params: ModelParams
    log: list[dict]
    best_val_objective: float


def _beta_and_rate_grad_factor(chi: np.ndarray, flags: np.ndarray | None,
                               mode: str, log_rate: float,
                               fixed_window: int) -> tuple[np.ndarray, np.ndarray | None]:
    """beta per subject and d(beta)/d(log_rate) (None when not learnable)."""
    if mode == "observed":
        if flags is None:
            raise ValueError("observed termination requested but flags missing")
        return flags.astype(float), None
    if mode == "fixed":
        return (chi > fixed_window).astype(float), None
    rate = np.exp(log_rate)
    decay = np.exp(-rate * chi)
    beta = 1.0 - decay
    return beta, chi * decay * rate


def training_loss(params: ModelParams, features: np.ndarray, lifetimes: np.ndarray,
                  chi: np.ndarray, flags: np.ndarray | None, t_max: int,
                  config: TrainConfig, *,
                  rng: np.random.Generator | None = None,
                  training_mode: bool = True
                  ) -> tuple[float, MinPairResult | None, Gradients | None]:
    """Full minibatch loss and its gradients w.r.t. every parameter.

    Returns (loss, min-pair info, gradients); the latter two are None when
    every cluster pair was degenerate on this batch.
    """
    alpha, caches = forward(params, features, training=training_mode)
    beta, dbeta_dlograte = _beta_and_rate_grad_factor(
        chi, flags, config.termination_mode, params.log_rate, config.fixed_window)
    tape = KMTape(lifetimes, alpha, beta, t_max)
    try:
        result = min_pair_objective(config.divergence, tape.curves, rng=rng,
                                    min_effective_n=MIN_EFFECTIVE_N, unclamped=True)
    except DegenerateClusterError:
        return 0.0, None, None
    penalty = 0.5 * config.l2 * sum(float(np.sum(w * w)) for w, _ in params.layers)
    loss = -result.value + penalty
    # route gradients through the argmin pair only
    i, j = result.pair
    grad_values: list[np.ndarray | None] = [None] * params.n_clusters
    grad_n = [0.0] * params.n_clusters
    grad_values[i] = -result.delta_result.grad_a
    grad_values[j] = -result.delta_result.grad_b
    if config.divergence.grad_through_n:
        grad_n[i] = -result.delta_result.grad_n_a
        grad_n[j] = -result.delta_result.grad_n_b
    galpha, gbeta = tape.backward(grad_values, grad_n)
    grads = backward(params, caches, galpha, training=training_mode)
    if config.l2:
        for li, (w, _) in enumerate(params.layers):
            grads.layers[li][0] += config.l2 * w
    if dbeta_dlograte is not None:
        grads.log_rate = float(np.dot(gbeta, dbeta_dlograte))
    return loss, result, grads


def _validation_objective(params: ModelParams, features: np.ndarray,
                          lifetimes: np.ndarray, chi: np.ndarray,
                          flags: np.ndarray | None, t_max: int,
                          config: TrainConfig) -> float:
    alpha, _ = forward(params, features, training=False)
    beta, _ = _beta_and_rate_grad_factor(
        chi, flags, config.termination_mode, params.log_rate, config.fixed_window)
    tape = KMTape(lifetimes, alpha, beta, t_max)
    spec = replace(config.divergence, pair_sampling=default_pair_sampling(params.n_clusters))
    try:
        result = min_pair_objective(spec, tape.curves,
                                    min_effective_n=MIN_EFFECTIVE_N, unclamped=True)
    except DegenerateClusterError:
        return -np.inf
    return result.value


def train(data: Dataset, config: TrainConfig) -> TrainResult:
    """Fit the cluster-assignment network on a dataset."""
    config.validate()
    if len(data) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(config.seed)
    features = (feature_matrix(data, config.tau) if config.event_features
                else data.covariate_matrix())
    lifetimes = data.observed_lifetimes()
    chi = data.inactive_periods().astype(float)
    flags = None
    if config.termination_mode == "observed":
        if not data.has_termination_signals():
            raise ValueError("observed termination requested but flags missing")
        flags = np.array([float(s.terminated) for s in data.subjects])

    # standardize features on the training split statistics
    n = len(data)
    perm = rng.permutation(n)
    n_val = int(round(0.2 * n))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        raise ValueError("dataset too small to split")
    mean = features[train_idx].mean(axis=0)
    std = features[train_idx].std(axis=0)
    std[std == 0] = 1.0
    scaled = (features - mean) / std

    log_rate0 = 0.0
    if config.termination_mode == "learnable":
        log_rate0 = float(np.log(rate_for_median_inactivity(chi[train_idx])))
    params = init_model(features.shape[1], config.n_clusters, config.hidden_layers,
                        config.hidden_units, config.activation, config.batch_norm,
                        rng, log_rate=log_rate0)
    params.feature_mean = mean
    params.feature_std = std
    params.event_features = config.event_features
    optimizer = Adam(params, config.learning_rate)

    log: list[dict] = []
    best_val = -np.inf
    best_params = params.copy()
    patience = 0
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_idx))
        for start in range(0, len(order), config.batch_size):
            batch = train_idx[order[start:start + config.batch_size]]
            if len(batch) < 2:
                continue
            loss, result, grads = training_loss(
                params, scaled[batch], lifetimes[batch], chi[batch],
                None if flags is None else flags[batch], data.t_max, config,
                rng=rng)
            step += 1
            if result is None:
                log.append({"kind": "iteration", "epoch": epoch, "step": step,
                            "objective": None, "skipped_pairs": -1,
                            "note": "all pairs degenerate, no update"})
                continue
            optimizer.step(params, grads,
                           update_log_rate=config.termination_mode == "learnable")
            log.append({"kind": "iteration", "epoch": epoch, "step": step,
                        "objective": result.value,
                        "skipped_pairs": len(result.pairs_skipped), "note": ""})
        if len(val_idx) > 0:
            val_obj = _validation_objective(
                params, scaled[val_idx], lifetimes[val_idx], chi[val_idx],
                None if flags is None else flags[val_idx], data.t_max, config)
        else:
            val_obj = -np.inf
        improved = val_obj > best_val
        if improved:
            best_val = val_obj
            best_params = params.copy()
            patience = 0
        else:
            patience += 1
        log.append({"kind": "epoch", "epoch": epoch, "step": step,
                    "objective": val_obj, "skipped_pairs": 0,
                    "note": "best" if improved else ""})
        if patience >= config.early_stop_patience:
            break
    if best_val == -np.inf:
        best_params = params
    return TrainResult(params=best_params, log=log, best_val_objective=best_val)


def assign(params: ModelParams, data: Dataset, tau: int) -> tuple[np.ndarray, np.ndarray]:
    """Hard labels (argmax, ties to the lowest index) plus the soft matrix."""
    features = (feature_matrix(data, tau) if params.event_features
                else data.covariate_matrix())
    if params.feature_mean is not None:
        features = (features - params.feature_mean) / params.feature_std
    alpha, _ = forward(params, features, training=False)
    return alpha.argmax(axis=1), alpha
