"""Divergence measures between cluster lifetime curves and the min-pair objective.

Two variants: the Kuiper p-value upper bound (sample-size aware) and a
Gaussian-kernel squared MMD over the implied lifetime PMFs (sample-size
blind, kept as the comparison baseline).  Both come with the gradients a
trainer needs: with respect to the two curve vectors and the two effective
sample sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DegenerateClusterError
from .kuiper import kuiper_statistic, lambda_of, log_kd_upper_grad, log_kd_upper_unclamped
from .survival import EmpiricalLifetimeDistribution


@dataclass(frozen=True)
class KuiperUB:
    """delta = -log of the Kuiper p-value upper bound."""


@dataclass(frozen=True)
class MMD:
    """Squared MMD with a Gaussian kernel on the time axis.

    bandwidth None means the median pairwise gap of the support.
    """

    bandwidth: float | None = None

    def __post_init__(self):
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class AllPairs:
    pass


@dataclass(frozen=True)
class SampleWithoutReplacement:
    count: int

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("pair sample count must be positive")


DivergenceVariant = Union[KuiperUB, MMD]
PairSampling = Union[AllPairs, SampleWithoutReplacement]


@dataclass(frozen=True)
class DivergenceSpec:
    variant: DivergenceVariant = field(default_factory=KuiperUB)
    pair_sampling: PairSampling = field(default_factory=AllPairs)
    grad_through_n: bool = True


@dataclass
class DeltaResult:
    value: float
    grad_a: np.ndarray
    grad_b: np.ndarray
    grad_n_a: float
    grad_n_b: float


def median_pairwise_gap(length: int) -> float:
    """Median |t_i - t_j| over distinct pairs of grid points 0..length-1."""
    if length < 2:
        return 1.0
    total = length * (length - 1) // 2
    seen = 0
    for gap in range(1, length):
        seen += length - gap
        if 2 * seen >= total:
            return float(gap)
    return float(length - 1)


def _kernel_matrix(length: int, bandwidth: float | None) -> np.ndarray:
    bw = median_pairwise_gap(length) if bandwidth is None else bandwidth
    t = np.arange(length, dtype=float)
    sq = (t[:, None] - t[None, :]) ** 2
    return np.exp(-sq / (2.0 * bw * bw))


def _pmf_from_ccdf(values: np.ndarray) -> np.ndarray:
    # P(T = t) = S[t-1] - S[t] with S[-1] := 1; censored tail mass is dropped.
    return -np.diff(np.concatenate([[1.0], values]))


def _kuiper_delta(s_a, s_b, grad_through_n: bool, unclamped: bool) -> DeltaResult:
    va, vb = s_a.values, s_b.values
    n_a, n_b = s_a.effective_n, s_b.effective_n
    grad_a = np.zeros_like(va)
    grad_b = np.zeros_like(vb)
    d_plus, d_minus, v_stat = kuiper_statistic(va, vb)
    if v_stat <= 0.0:
        return DeltaResult(0.0, grad_a, grad_b, 0.0, 0.0)
    m = n_a * n_b / (n_a + n_b)
    lam = lambda_of(v_stat, n_a, n_b)
    if unclamped:
        logv, dlog = log_kd_upper_unclamped(lam)
        value = -logv
    else:
        logv, _ = log_kd_upper_grad(lam)
        value = -logv
        # gradient of the raw branch, so the clamp plateau still points
        # toward larger separations (subgradient choice)
        _, dlog = log_kd_upper_unclamped(lam)
    dval_dlam = -dlog
    coef = np.sqrt(m) + 0.155 + 0.24 / np.sqrt(m)
    g_v = dval_dlam * coef
    diff = va - vb
    if d_plus > 0:
        i = int(np.argmax(diff))
        grad_a[i] += g_v
        grad_b[i] -= g_v
    if d_minus > 0:
        i = int(np.argmin(diff))
        grad_a[i] -= g_v
        grad_b[i] += g_v
    grad_n_a = grad_n_b = 0.0
    if grad_through_n:
        dcoef_dm = 0.5 / np.sqrt(m) - 0.12 * m ** -1.5
        g_m = dval_dlam * dcoef_dm * v_stat
        grad_n_a = float(g_m * (n_b / (n_a + n_b)) ** 2)
        grad_n_b = float(g_m * (n_a / (n_a + n_b)) ** 2)
    return DeltaResult(float(value), grad_a, grad_b, grad_n_a, grad_n_b)


def _mmd_delta(s_a, s_b, bandwidth: float | None) -> DeltaResult:
    va, vb = s_a.values, s_b.values
    if va.shape != vb.shape:
        raise ValueError("distributions must share the same support length")
    kmat = _kernel_matrix(len(va), bandwidth)
    r = _pmf_from_ccdf(va) - _pmf_from_ccdf(vb)
    kr = kmat @ r
    value = float(r @ kr)
    g = 2.0 * kr
    # pmf[t] = S[t-1] - S[t], so d(value)/dS[t] = g[t+1] - g[t] (last: -g[-1])
    grad_a = np.empty_like(va)
    grad_a[:-1] = g[1:] - g[:-1]
    grad_a[-1] = -g[-1]
    return DeltaResult(value, grad_a, -grad_a, 0.0, 0.0)


def delta(spec: DivergenceSpec, s_a: EmpiricalLifetimeDistribution,
          s_b: EmpiricalLifetimeDistribution, *, unclamped: bool = False) -> DeltaResult:
    """Divergence between two cluster curves plus its gradients.

    ``unclamped`` switches the Kuiper variant to the raw log bound used as
    the training objective; the default reports the honest p-value bound
    (so identical curves give exactly 0).
    """
    if s_a.effective_n <= 0 or s_b.effective_n <= 0:
        raise DegenerateClusterError("degenerate cluster")
    if isinstance(spec.variant, KuiperUB):
        return _kuiper_delta(s_a, s_b, spec.grad_through_n, unclamped)
    if isinstance(spec.variant, MMD):
        return _mmd_delta(s_a, s_b, spec.variant.bandwidth)
    raise TypeError(f"unknown divergence variant {spec.variant!r}")


@dataclass
class MinPairResult:
    value: float
    pair: tuple[int, int]
    delta_result: DeltaResult
    pairs_evaluated: list[tuple[int, int]]
    pairs_skipped: list[tuple[int, int]]


def select_pairs(sampling: PairSampling, n_clusters: int,
                 rng: np.random.Generator | None = None) -> list[tuple[int, int]]:
    """Cluster index pairs to evaluate, in deterministic lexicographic order."""
    all_pairs = [(i, j) for i in range(n_clusters) for j in range(i + 1, n_clusters)]
    if isinstance(sampling, AllPairs):
        return all_pairs
    if isinstance(sampling, SampleWithoutReplacement):
        if sampling.count > len(all_pairs):
            raise ValueError("cannot sample more pairs than exist")
        if rng is None:
            rng = np.random.default_rng()
        chosen = rng.choice(len(all_pairs), size=sampling.count, replace=False)
        return [all_pairs[i] for i in sorted(chosen)]
    raise TypeError(f"unknown pair sampling {sampling!r}")


def min_pair_objective(spec: DivergenceSpec,
                       distributions: list[EmpiricalLifetimeDistribution], *,
                       rng: np.random.Generator | None = None,
                       min_effective_n: float = 0.0,
                       unclamped: bool = False) -> MinPairResult:
    """Minimum divergence over the selected cluster pairs.

    The gradient is routed through the argmin pair only (hard min, ties
    broken by lowest pair index).  Pairs touching a cluster whose effective
    size falls below ``min_effective_n`` are skipped; if everything is
    skipped the iteration has no usable signal and an error is raised.
    """
    n_clusters = len(distributions)
    if n_clusters < 2:
        raise ValueError("need at least two clusters")
    pairs = select_pairs(spec.pair_sampling, n_clusters, rng)
    best, skipped, evaluated = None, [], []
    for i, j in pairs:
        if (distributions[i].effective_n < min_effective_n
                or distributions[j].effective_n < min_effective_n
                or distributions[i].effective_n <= 0
                or distributions[j].effective_n <= 0):
            skipped.append((i, j))
            continue
        res = delta(spec, distributions[i], distributions[j], unclamped=unclamped)
        evaluated.append((i, j))
        if best is None or res.value < best[0]:
            best = (res.value, (i, j), res)
    if best is None:
        raise DegenerateClusterError("all cluster pairs degenerate")
    return MinPairResult(value=best[0], pair=best[1], delta_result=best[2],
                         pairs_evaluated=evaluated, pairs_skipped=skipped)


def default_pair_sampling(n_clusters: int) -> PairSampling:
    """All pairs for small cluster counts, O(K) sampled pairs beyond that."""
    if n_clusters <= 8:
        return AllPairs()
    return SampleWithoutReplacement(n_clusters)
