"""Three-cluster synthetic benchmark with known lifetime laws.

Clusters C2 and C3 share a Weibull-type law with the hazard of C3 scaled
by exactly 2 (proportional hazards by construction).  C1 is a two-component
mixture (a fast-failing exponential plus a long Weibull tail) tuned so its
survival curve crosses both of the others well before the censoring horizon,
which breaks proportional hazards.

Each subject carries 20 covariates drawn from per-cluster mixtures of three
Gaussians: means uniform on [0, 30], variance 1 for the first ten features
and 10 for the rest.  Lifetimes are floored to integers; observation stops
at t_m, which right-censors the tail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, SubjectRecord

CLUSTER_NAMES = ("C1", "C2", "C3")

_WEIBULL_SHAPE = 1.5
_WEIBULL_SCALE = 80.0
_C3_HAZARD_FACTOR = 2.0
_C1_FAST_WEIGHT = 0.25
_C1_FAST_MEAN = 5.0
_C1_TAIL_SCALE = 400.0

_N_FEATURES = 20
_LOW_VAR_BLOCK = 10
_N_MODES = 3
_MODE_RANGE = 30.0


@dataclass(frozen=True)
class SynthSpec:
    clusters: tuple[str, ...] = CLUSTER_NAMES
    n_per_cluster: int = 10_000
    t_m: int = 150
    n_features: int = _N_FEATURES
    seed: int = 0

    def __post_init__(self):
        names = tuple(sorted(set(self.clusters)))
        if not names or any(c not in CLUSTER_NAMES for c in names):
            raise ValueError(f"clusters must be a nonempty subset of {CLUSTER_NAMES}")
        object.__setattr__(self, "clusters", names)
        if self.n_per_cluster < 0:
            raise ValueError("n_per_cluster must be nonnegative")
        if self.n_features != _N_FEATURES:
            raise ValueError("the benchmark is defined for exactly 20 features")
        if self.t_m <= 0:
            raise ValueError("t_m must be positive")


def sample_lifetimes(cluster: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Integer lifetimes from the cluster's generating law."""
    e = rng.exponential(size=n)
    if cluster == "C2":
        w = _WEIBULL_SCALE * e ** (1.0 / _WEIBULL_SHAPE)
    elif cluster == "C3":
        w = _WEIBULL_SCALE * (e / _C3_HAZARD_FACTOR) ** (1.0 / _WEIBULL_SHAPE)
    elif cluster == "C1":
        fast = rng.random(size=n) < _C1_FAST_WEIGHT
        w = np.where(fast, _C1_FAST_MEAN * e,
                     _C1_TAIL_SCALE * e ** (1.0 / _WEIBULL_SHAPE))
    else:
        raise ValueError(f"unknown cluster {cluster!r}")
    return np.floor(w).astype(np.int64)


def true_ccdf(cluster: str, t) -> np.ndarray:
    """P(T > t) of the generating law for floored lifetimes."""
    t1 = np.asarray(t, dtype=float) + 1.0
    if cluster == "C2":
        return np.exp(-((t1 / _WEIBULL_SCALE) ** _WEIBULL_SHAPE))
    if cluster == "C3":
        return np.exp(-_C3_HAZARD_FACTOR * (t1 / _WEIBULL_SCALE) ** _WEIBULL_SHAPE)
    if cluster == "C1":
        return (_C1_FAST_WEIGHT * np.exp(-t1 / _C1_FAST_MEAN)
                + (1.0 - _C1_FAST_WEIGHT)
                * np.exp(-((t1 / _C1_TAIL_SCALE) ** _WEIBULL_SHAPE)))
    raise ValueError(f"unknown cluster {cluster!r}")


def _sample_features(n: int, means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    sigma = np.where(np.arange(_N_FEATURES) < _LOW_VAR_BLOCK, 1.0, np.sqrt(10.0))
    modes = rng.integers(0, _N_MODES, size=(n, _N_FEATURES))
    centers = means[modes, np.arange(_N_FEATURES)]
    return centers + rng.normal(size=(n, _N_FEATURES)) * sigma


def generate(spec: SynthSpec) -> tuple[Dataset, np.ndarray]:
    """Dataset plus ground-truth labels (cluster index in sorted name order).

    All subjects join at time zero; a subject's single event interval is its
    observed lifetime, and the termination flag marks whether the true
    lifetime fell inside the observation window.
    """
    children = np.random.SeedSequence(spec.seed).spawn(len(spec.clusters))
    subjects: list[SubjectRecord] = []
    labels: list[int] = []
    for ci, (cname, child) in enumerate(zip(spec.clusters, children)):
        rng = np.random.default_rng(child)
        means = rng.uniform(0.0, _MODE_RANGE, size=(_N_MODES, _N_FEATURES))
        lifetimes = sample_lifetimes(cname, spec.n_per_cluster, rng)
        covs = _sample_features(spec.n_per_cluster, means, rng)
        for i in range(spec.n_per_cluster):
            t_true = int(lifetimes[i])
            observed = min(t_true, spec.t_m)
            terminal = t_true <= spec.t_m
            flags = np.zeros(1, dtype=np.int64)
            if terminal:
                flags[0] = 1
            subjects.append(SubjectRecord(
                id=f"{cname}-{i}", covariates=covs[i],
                inter_event_times=np.array([observed], dtype=np.int64),
                joining_time=0, termination_flags=flags, true_lifetime=t_true))
            labels.append(ci)
    return Dataset(subjects=subjects, t_m=spec.t_m), np.array(labels, dtype=np.int64)
