"""Termination-probability models and the soft-weighted Kaplan-Meier estimator.

The product-limit estimator is generalized in two ways: each subject carries
a membership weight ``alpha`` in [0, 1] (soft cluster assignment) and a
termination probability ``beta`` in [0, 1] replacing the usual 0/1 event
indicator.  With hard memberships and observed events it reduces exactly to
the classical Kaplan-Meier estimate.

For a time grid ``j = 0..t_max``::

    s[j] = sum_u 1[H_u >= j] * alpha_u        (expected number at risk)
    d[j] = sum_u 1[H_u == j] * beta_u * alpha_u   (expected terminal events)
    S[t] = prod_{j<=t} (s[j] - d[j]) / s[j]

Factors with ``s[j] == 0`` contribute 1 (nobody at risk, nothing changes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .data import Dataset, SubjectRecord
from .errors import DataFormatError, NumericalError


# ---------------------------------------------------------------------------
# termination models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservedSignals:
    """Use the recorded termination flags; requires them to be present."""


@dataclass(frozen=True)
class LearnableExponential:
    """beta = 1 - exp(-rate * chi) with rate = exp(log_rate) > 0."""

    log_rate: float = 0.0

    @property
    def rate(self) -> float:
        return float(np.exp(self.log_rate))


@dataclass(frozen=True)
class FixedTimeout:
    """Hard timeout: beta = 1 iff the inactive period exceeds the window."""

    window: int

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("timeout window must be a positive integer")


TerminationModel = Union[ObservedSignals, LearnableExponential, FixedTimeout]


def termination_probability(subject: SubjectRecord, model: TerminationModel,
                            t_m: int) -> float:
    """Probability that the subject's last observed event was terminal.

    ``t_m`` is the measurement horizon of the enclosing dataset; it fixes the
    inactive period chi = t_m - joining_time - H.
    """
    chi = t_m - subject.joining_time - subject.observed_lifetime
    if chi < 0:
        raise DataFormatError(f"subject {subject.id}: negative inactive period")
    if isinstance(model, ObservedSignals):
        if subject.termination_flags is None:
            raise DataFormatError("termination signals unavailable")
        return float(subject.terminated)
    if isinstance(model, LearnableExponential):
        return float(1.0 - np.exp(-model.rate * chi))
    if isinstance(model, FixedTimeout):
        return float(chi > model.window)
    raise TypeError(f"unknown termination model {model!r}")


def termination_probabilities(data: Dataset, model: TerminationModel) -> np.ndarray:
    """Vector of beta over data.subjects."""
    return np.array([termination_probability(s, model, data.t_m)
                     for s in data.subjects])


def rate_for_median_inactivity(chi: np.ndarray) -> float:
    """Rate such that beta = 0.5 at the median inactive period (init heuristic)."""
    med = float(np.median(chi)) if len(chi) else 0.0
    if med <= 0:
        return 1.0
    return float(np.log(2.0) / med)


# ---------------------------------------------------------------------------
# weighted Kaplan-Meier
# ---------------------------------------------------------------------------

@dataclass
class EmpiricalLifetimeDistribution:
    """Discrete CCDF over t = 0..t_max plus the effective sample size."""

    values: np.ndarray
    effective_n: float
    degenerate: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)


def _risk_and_death_mass(h: np.ndarray, alpha: np.ndarray, beta: np.ndarray,
                         t_max: int) -> tuple[np.ndarray, np.ndarray]:
    a_mass = np.zeros(t_max + 1)
    d_mass = np.zeros(t_max + 1)
    np.add.at(a_mass, h, alpha)
    np.add.at(d_mass, h, alpha * beta)
    s = np.cumsum(a_mass[::-1])[::-1]
    return s, d_mass


def km_curve(h: np.ndarray, alpha: np.ndarray, beta: np.ndarray,
             t_max: int) -> EmpiricalLifetimeDistribution:
    """Weighted product-limit curve from raw arrays (h = observed lifetimes)."""
    h = np.asarray(h, dtype=np.int64)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if len(h) == 0:
        raise NumericalError("empty dataset")
    if h.max() > t_max:
        raise ValueError("observed lifetime exceeds t_max")
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("alpha entries must lie in [0, 1]")
    if np.any((beta < 0) | (beta > 1)):
        raise ValueError("beta entries must lie in [0, 1]")
    effective_n = float(alpha.sum())
    if effective_n == 0.0:
        return EmpiricalLifetimeDistribution(
            values=np.ones(t_max + 1), effective_n=0.0, degenerate=True)
    s, d = _risk_and_death_mass(h, alpha, beta, t_max)
    factors = np.ones(t_max + 1)
    pos = s > 0
    factors[pos] = (s[pos] - d[pos]) / s[pos]
    return EmpiricalLifetimeDistribution(values=np.cumprod(factors),
                                         effective_n=effective_n)


def weighted_kaplan_meier(data: Dataset, alpha_k: np.ndarray,
                          beta: np.ndarray) -> EmpiricalLifetimeDistribution:
    """Soft-membership Kaplan-Meier estimate for one cluster."""
    if len(data) == 0:
        raise NumericalError("empty dataset")
    if len(alpha_k) != len(data) or len(beta) != len(data):
        raise ValueError("alpha_k and beta must be indexed like data.subjects")
    return km_curve(data.observed_lifetimes(), alpha_k, beta, data.t_max)


class KMTape:
    """Reverse-mode tape for a batch of per-cluster weighted KM curves.

    Holds the forward state needed to push gradients of any scalar loss on
    the curve values (and on the effective sample sizes) back onto the
    per-subject alpha matrix and beta vector.
    """

    def __init__(self, h: np.ndarray, alpha: np.ndarray, beta: np.ndarray,
                 t_max: int):
        self.h = np.asarray(h, dtype=np.int64)
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        self.t_max = int(t_max)
        self.curves: list[EmpiricalLifetimeDistribution] = []
        self._state: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        for k in range(self.alpha.shape[1]):
            alpha_k = self.alpha[:, k]
            s, d = _risk_and_death_mass(self.h, alpha_k, self.beta, self.t_max)
            factors = np.ones(self.t_max + 1)
            pos = s > 0
            factors[pos] = (s[pos] - d[pos]) / s[pos]
            values = np.cumprod(factors)
            effective_n = float(alpha_k.sum())
            self.curves.append(EmpiricalLifetimeDistribution(
                values=values, effective_n=effective_n,
                degenerate=effective_n == 0.0))
            self._state.append((s, d, factors, values))

    def backward(self, grad_values: list[np.ndarray | None],
                 grad_effective_n: list[float] | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
        """Accumulate d(loss)/d(alpha) and d(loss)/d(beta).

        ``grad_values[k]`` is the upstream gradient on curve k (None for no
        contribution); ``grad_effective_n[k]`` likewise for the sizes.
        """
        n, n_clusters = self.alpha.shape
        galpha = np.zeros((n, n_clusters))
        gbeta = np.zeros(n)
        for k in range(n_clusters):
            gv = grad_values[k]
            gn = 0.0 if grad_effective_n is None else float(grad_effective_n[k])
            if gv is None and gn == 0.0:
                continue
            s, d, factors, values = self._state[k]
            if gv is None:
                gv = np.zeros(self.t_max + 1)
            # r[j] = gv[j] + f[j+1] r[j+1]; d(loss)/d(f[j]) = prod_{j'<j} f * r[j]
            r = np.empty(self.t_max + 1)
            r[self.t_max] = gv[self.t_max]
            for j in range(self.t_max - 1, -1, -1):
                r[j] = gv[j] + factors[j + 1] * r[j + 1]
            prefix = np.concatenate([[1.0], values[:-1]])
            gf = prefix * r
            gs = np.zeros(self.t_max + 1)
            gd = np.zeros(self.t_max + 1)
            pos = s > 0
            gs[pos] = gf[pos] * d[pos] / (s[pos] * s[pos])
            gd[pos] = -gf[pos] / s[pos]
            cums = np.cumsum(gs)
            galpha[:, k] = cums[self.h] + gd[self.h] * self.beta + gn
            gbeta += gd[self.h] * self.alpha[:, k]
        return galpha, gbeta


def differentiable_km(data: Dataset, alpha_matrix: np.ndarray,
                      beta: np.ndarray) -> tuple[list[EmpiricalLifetimeDistribution], KMTape]:
    """Per-cluster curves plus the gradient tape for them."""
    if len(data) == 0:
        raise NumericalError("empty dataset")
    alpha_matrix = np.asarray(alpha_matrix, dtype=float)
    if alpha_matrix.ndim != 2 or alpha_matrix.shape[0] != len(data):
        raise ValueError("alpha_matrix must be n_subjects x n_clusters")
    tape = KMTape(data.observed_lifetimes(), alpha_matrix, np.asarray(beta, float),
                  data.t_max)
    return tape.curves, tape
