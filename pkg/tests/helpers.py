"""Shared test utilities: independent oracles and parameter flattening."""

from __future__ import annotations

from math import comb

import numpy as np

from lifeclust.data import Dataset, SubjectRecord
from lifeclust.network import ModelParams


# ---------------------------------------------------------------------------
# classical Kaplan-Meier oracle (event-table formulation)
# ---------------------------------------------------------------------------

def classical_km(times, events, t_max):
    """Textbook product-limit estimate on a 0..t_max grid.

    Built from a sorted event table, deliberately not sharing code with the
    weighted implementation.
    """
    times = np.asarray(times)
    events = np.asarray(events, dtype=bool)
    surv = np.ones(t_max + 1)
    current = 1.0
    for t in range(t_max + 1):
        at_risk = np.sum(times >= t)
        died = np.sum((times == t) & events)
        if at_risk > 0:
            current *= (at_risk - died) / at_risk
        surv[t] = current
    return surv


# ---------------------------------------------------------------------------
# brute-force metric oracles
# ---------------------------------------------------------------------------

def c_index_oracle(times, censored, risks):
    num = den = 0.0
    n = len(times)
    for i in range(n):
        for j in range(n):
            if censored[i] or not times[i] < times[j]:
                continue
            den += 1
            if risks[i] > risks[j]:
                num += 1
            elif risks[i] == risks[j]:
                num += 0.5
    return num / den


def brier_oracle(times, censored, curves, labels):
    t_max = len(curves[0]) - 1
    per_subject = []
    for i in range(len(times)):
        curve = curves[labels[i]]
        total = 0.0
        n_terms = 0
        for t in range(t_max + 1):
            if censored[i] and t >= times[i]:
                break
            indicator = 1.0 if times[i] > t else 0.0
            total += (indicator - curve[t]) ** 2
            n_terms += 1
        if n_terms:
            per_subject.append(total / (t_max + 1))
    return float(np.mean(per_subject))


def logrank_oracle(times, events, labels, k):
    """Explicit per-time O/E/V tables, solved on the first k-1 groups."""
    z = [0.0] * (k - 1)
    cov = [[0.0] * (k - 1) for _ in range(k - 1)]
    for t in sorted(set(int(times[i]) for i in range(len(times)) if events[i])):
        n_t = [0] * k
        o_t = [0] * k
        for i in range(len(times)):
            if times[i] >= t:
                n_t[labels[i]] += 1
                if events[i] and times[i] == t:
                    o_t[labels[i]] += 1
        n_tot = sum(n_t)
        o_tot = sum(o_t)
        if n_tot == 0 or o_tot == 0:
            continue
        for g in range(k - 1):
            z[g] += o_t[g] - o_tot * n_t[g] / n_tot
        if n_tot > 1:
            scale = o_tot * (n_tot - o_tot) / (n_tot - 1)
            for g in range(k - 1):
                for h in range(k - 1):
                    term = n_t[g] / n_tot * ((1 if g == h else 0) - n_t[h] / n_tot)
                    cov[g][h] += scale * term
    cov = np.array(cov)
    z = np.array(z)
    if not np.any(cov):
        return 0.0
    return float(z @ np.linalg.solve(cov, z))


def ari_oracle(a, b):
    """Pair-counting adjusted Rand index."""
    n = len(a)
    n11 = n10 = n01 = n00 = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_a = a[i] == a[j]
            same_b = b[i] == b[j]
            if same_a and same_b:
                n11 += 1
            elif same_a:
                n10 += 1
            elif same_b:
                n01 += 1
            else:
                n00 += 1
    total = comb(n, 2)
    sum_a = n11 + n10
    sum_b = n11 + n01
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return (n11 - expected) / (max_index - expected)


# ---------------------------------------------------------------------------
# dataset factories
# ---------------------------------------------------------------------------

def simple_dataset(lifetimes, t_m, flags=None, covariates=None, joins=None):
    """Subjects with a single event interval equal to their observed lifetime."""
    subjects = []
    for i, h in enumerate(lifetimes):
        f = None
        if flags is not None:
            f = np.array([int(flags[i])]) if h is not None else None
        cov = np.zeros(2) if covariates is None else covariates[i]
        subjects.append(SubjectRecord(
            id=f"s{i}", covariates=cov,
            inter_event_times=np.array([int(h)]),
            joining_time=0 if joins is None else joins[i],
            termination_flags=f))
    return Dataset(subjects=subjects, t_m=t_m)


def random_hard_dataset(rng, max_n=50, max_t=30):
    n = int(rng.integers(2, max_n + 1))
    times = rng.integers(0, max_t + 1, size=n)
    events = rng.integers(0, 2, size=n)
    return times, events


# ---------------------------------------------------------------------------
# parameter flattening for finite-difference checks
# ---------------------------------------------------------------------------

def param_arrays(params: ModelParams):
    """References to every trainable array plus names, in a fixed order."""
    out = []
    for li, (w, b) in enumerate(params.layers):
        out.append((f"layer{li}.W", w))
        out.append((f"layer{li}.b", b))
    if params.batch_norm is not None:
        for li, bn in enumerate(params.batch_norm):
            out.append((f"bn{li}.gamma", bn.gamma))
            out.append((f"bn{li}.beta", bn.beta))
    return out


def flatten_params(params: ModelParams) -> np.ndarray:
    pieces = [arr.ravel() for _, arr in param_arrays(params)]
    pieces.append(np.array([params.log_rate]))
    return np.concatenate(pieces)


def set_flat_params(params: ModelParams, flat: np.ndarray) -> None:
    offset = 0
    for _, arr in param_arrays(params):
        arr[...] = flat[offset:offset + arr.size].reshape(arr.shape)
        offset += arr.size
    params.log_rate = float(flat[offset])


def flatten_grads(params: ModelParams, grads) -> np.ndarray:
    pieces = []
    for li in range(len(params.layers)):
        pieces.append(grads.layers[li][0].ravel())
        pieces.append(grads.layers[li][1].ravel())
    if params.batch_norm is not None:
        for li in range(len(params.batch_norm)):
            pieces.append(grads.bn[li][0].ravel())
            pieces.append(grads.bn[li][1].ravel())
    pieces.append(np.array([grads.log_rate]))
    return np.concatenate(pieces)
