"""Evaluation metrics for survival clusterings.

Concordance index, integrated Brier score, the K-group logrank chi-square
statistic, and the adjusted Rand index.  A convenience ``evaluate`` builds
the per-cluster curves from hard labels and produces one report.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import NumericalError
from .survival import EmpiricalLifetimeDistribution, km_curve


@dataclass
class EvalReport:
    c_index: float
    ibs: float
    logrank: float
    per_cluster_sizes: list[int]
    ari: float | None = None

    def as_mapping(self) -> dict[str, object]:
        out: dict[str, object] = {
            "c_index": self.c_index, "ibs": self.ibs, "logrank": self.logrank,
            "cluster_sizes": ";".join(str(s) for s in self.per_cluster_sizes)}
        if self.ari is not None:
            out["ari"] = self.ari
        return out


def c_index(lifetimes, censored, risk_scores) -> float:
    """Concordant fraction over comparable pairs; risk ties count 0.5.

    A pair (i, j) is comparable when i had a terminal event and lived
    strictly shorter than j's observation.
    """
    t = np.asarray(lifetimes)
    cens = np.asarray(censored, dtype=bool)
    r = np.asarray(risk_scores, dtype=float)
    if not (len(t) == len(cens) == len(r)):
        raise ValueError("inputs must be aligned")
    events = ~cens
    # comparable[i, j]: i terminal and t_i < t_j
    shorter = t[:, None] < t[None, :]
    comparable = events[:, None] & shorter
    n_comp = int(comparable.sum())
    if n_comp == 0:
        raise NumericalError("no comparable pairs")
    higher = r[:, None] > r[None, :]
    tied = r[:, None] == r[None, :]
    concordant = float(np.sum(comparable & higher)) + 0.5 * float(np.sum(comparable & tied))
    return concordant / n_comp


def brier_score(lifetime: int, censored: bool,
                curve: np.ndarray) -> tuple[float, int]:
    """One subject's summed squared error and the number of summed terms.

    Uncensored subjects contribute every t in 0..t_max; censored ones only
    t < their censoring time (the survival indicator is unknown beyond it).
    """
    t_max = len(curve) - 1
    t = np.arange(t_max + 1)
    if censored:
        upto = min(int(lifetime), t_max + 1)
        if upto == 0:
            return 0.0, 0
        terms = (1.0 - curve[:upto]) ** 2
        return float(terms.sum()), upto
    indicator = (lifetime > t).astype(float)
    return float(np.sum((indicator - curve) ** 2)), t_max + 1


def integrated_brier(lifetimes, censored, cluster_curves, labels) -> float:
    """Mean per-subject Brier score against the assigned cluster's curve.

    Every contributing subject's sum is normalized by the full grid length
    t_max + 1; censored subjects simply sum fewer terms.
    """
    t = np.asarray(lifetimes)
    cens = np.asarray(censored, dtype=bool)
    labs = np.asarray(labels)
    curves = [c.values if isinstance(c, EmpiricalLifetimeDistribution) else np.asarray(c)
              for c in cluster_curves]
    if not curves:
        raise ValueError("no cluster curves")
    t_max = len(curves[0]) - 1
    scores = []
    for i in range(len(t)):
        total, n_terms = brier_score(int(t[i]), bool(cens[i]), curves[labs[i]])
        if n_terms == 0:
            continue
        scores.append(total / (t_max + 1))
    if not scores:
        raise NumericalError("no subjects contribute to the Brier score")
    return float(np.mean(scores))


def logrank_statistic(lifetimes, event_flags, labels, n_groups: int | None = None) -> float:
    """K-group logrank chi-square statistic (higher = more distinct groups).

    Observed-minus-expected event counts per group, combined through the
    hypergeometric variance-covariance of the first K-1 groups.
    """
    t = np.asarray(lifetimes, dtype=np.int64)
    events = np.asarray(event_flags, dtype=bool)
    labs = np.asarray(labels, dtype=np.int64)
    k = int(labs.max()) + 1 if n_groups is None else n_groups
    if k < 2:
        raise ValueError("need at least two groups")
    counts = np.bincount(labs, minlength=k)
    if np.any(counts == 0):
        raise NumericalError("empty group")
    event_times = np.unique(t[events])
    z = np.zeros(k - 1)
    cov = np.zeros((k - 1, k - 1))
    for tt in event_times:
        at_risk = t >= tt
        n_tot = int(at_risk.sum())
        died = at_risk & events & (t == tt)
        o_tot = int(died.sum())
        if n_tot == 0 or o_tot == 0:
            continue
        n_g = np.array([int(np.sum(at_risk & (labs == g))) for g in range(k)], dtype=float)
        o_g = np.array([int(np.sum(died & (labs == g))) for g in range(k)], dtype=float)
        frac = n_g / n_tot
        z += o_g[: k - 1] - o_tot * frac[: k - 1]
        if n_tot > 1:
            scale = o_tot * (n_tot - o_tot) / (n_tot - 1)
            block = scale * (np.diag(frac[: k - 1])
                             - np.outer(frac[: k - 1], frac[: k - 1]))
            cov += block
    if not np.any(cov):
        return 0.0
    try:
        sol = np.linalg.solve(cov, z)
    except np.linalg.LinAlgError:
        sol = np.linalg.pinv(cov) @ z
    return float(z @ sol)


def adjusted_rand(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index from the contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if len(a) != len(b):
        raise ValueError("label vectors must be aligned")
    n = len(a)
    if n < 2:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    sum_cells = sum(comb(int(x), 2) for x in table.flat)
    sum_rows = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_cols = sum(comb(int(x), 2) for x in table.sum(axis=0))
    expected = sum_rows * sum_cols / comb(n, 2)
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def restricted_mean_survival(curve: np.ndarray) -> float:
    """Area under the CCDF up to t_max; the discrete restricted mean lifetime."""
    return float(np.sum(curve))


def cluster_curves_from_labels(lifetimes, event_probs, labels, t_max,
                               n_clusters: int) -> list[EmpiricalLifetimeDistribution]:
    labs = np.asarray(labels)
    out = []
    for k in range(n_clusters):
        out.append(km_curve(lifetimes, (labs == k).astype(float),
                            event_probs, t_max))
    return out


def evaluate(lifetimes, event_flags, labels, t_max, n_clusters: int | None = None,
             true_labels=None) -> tuple[EvalReport, list[EmpiricalLifetimeDistribution]]:
    """Full report for a hard clustering of one evaluation split.

    Risk scores are the negated restricted mean survival of each subject's
    assigned cluster curve, so lower curves mean higher risk.
    """
    t = np.asarray(lifetimes)
    events = np.asarray(event_flags, dtype=bool)
    labs = np.asarray(labels)
    k = int(labs.max()) + 1 if n_clusters is None else n_clusters
    curves = cluster_curves_from_labels(t, events.astype(float), labs, int(t_max), k)
    rms = np.array([restricted_mean_survival(c.values) for c in curves])
    risks = -rms[labs]
    report = EvalReport(
        c_index=c_index(t, ~events, risks),
        ibs=integrated_brier(t, ~events, curves, labs),
        logrank=logrank_statistic(t, events, labs, n_groups=k),
        per_cluster_sizes=[int(np.sum(labs == g)) for g in range(k)],
        ari=None if true_labels is None else adjusted_rand(true_labels, labs))
    return report, curves
