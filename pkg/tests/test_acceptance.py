"""Acceptance suite: one test per criterion, each prints its pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines alongside pytest's own verdicts.
"""

import time

import numpy as np
import pytest

from helpers import (ari_oracle, brier_oracle, c_index_oracle, classical_km,
                     flatten_grads, flatten_params, logrank_oracle,
                     set_flat_params, simple_dataset)
from lifeclust.divergence import DivergenceSpec, KuiperUB, MMD, delta
from lifeclust.errors import NumericalError
from lifeclust.kuiper import kd_lower_bound, kd_reference, kd_upper_bound
from lifeclust.metrics import (adjusted_rand, c_index, integrated_brier,
                               logrank_statistic)
from lifeclust.network import init_model
from lifeclust.survival import EmpiricalLifetimeDistribution, weighted_kaplan_meier
from lifeclust.synthetic import SynthSpec, generate
from lifeclust.training import TrainConfig, assign, train, training_loss
from lifeclust.experiment import (aggregate_reports, cross_validate,
                                  evaluate_fold, subset_dataset)
from lifeclust.cli import main as cli_main


def report(criterion, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_bound_sandwich():
    lams = np.linspace(0.5, 5.0, 1001)[1:]
    start = time.perf_counter()
    violations = 0
    for lam in lams:
        lo = kd_lower_bound(lam)
        up = kd_upper_bound(lam)
        ref = kd_reference(lam, 10_000)
        if not (lo - 1e-12 <= ref <= up + 1e-12):
            violations += 1
    elapsed = time.perf_counter() - start
    report(1, violations == 0 and elapsed < 1.0,
           f"{violations} sandwich violations over 1000 lambdas, {elapsed:.3f}s")


def test_criterion_2_km_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 51))
        times = rng.integers(0, 30, size=n)
        events = rng.integers(0, 2, size=n)
        data = simple_dataset(times, t_m=35, flags=events)
        dist = weighted_kaplan_meier(data, np.ones(n), events.astype(float))
        oracle = classical_km(times, events.astype(bool), data.t_max)
        worst = max(worst, float(np.max(np.abs(dist.values - oracle))))
    elapsed = time.perf_counter() - start
    report(2, worst <= 1e-12 and elapsed < 5.0,
           f"max |weighted KM - classical KM| = {worst:.2e} over 200 datasets, "
           f"{elapsed:.2f}s")


def test_criterion_3_end_to_end_gradient_check():
    rng = np.random.default_rng(11)
    n = 20
    lifetimes = np.concatenate([rng.integers(1, 8, size=10),
                                rng.integers(10, 20, size=10)])
    covs = np.concatenate([rng.normal(0.0, 1.0, size=(10, 3)),
                           rng.normal(2.0, 1.0, size=(10, 3))])
    features = np.column_stack([covs, lifetimes / 10.0])
    chi = (25 - lifetimes).astype(float)
    config = TrainConfig(n_clusters=2, hidden_layers=1, hidden_units=16,
                         termination_mode="learnable", l2=1e-2, seed=11)
    params = init_model(features.shape[1], 2, 1, 16, "relu", False, rng,
                        log_rate=-1.0)
    t_max = int(lifetimes.max())

    start = time.perf_counter()
    loss, result, grads = training_loss(params, features, lifetimes, chi, None,
                                        t_max, config, training_mode=True)
    assert result is not None
    flat = flatten_params(params)
    analytic = flatten_grads(params, grads)
    h = 1e-5
    worst = 0.0
    for i in range(len(flat)):
        pert = flat.copy()
        pert[i] += h
        set_flat_params(params, pert)
        up, _, _ = training_loss(params, features, lifetimes, chi, None, t_max,
                                 config, training_mode=True)
        pert[i] -= 2 * h
        set_flat_params(params, pert)
        down, _, _ = training_loss(params, features, lifetimes, chi, None, t_max,
                                   config, training_mode=True)
        set_flat_params(params, flat)
        fd = (up - down) / (2 * h)
        worst = max(worst, abs(fd - analytic[i]) / max(1e-8, abs(fd), abs(analytic[i])))
    elapsed = time.perf_counter() - start
    assert analytic[-1] != 0.0  # log_rate participates
    report(3, worst < 1e-3 and elapsed < 30.0,
           f"worst relative gradient error {worst:.2e} over {len(flat)} parameters "
           f"(incl. log_rate), {elapsed:.1f}s")


def test_criterion_4_synthetic_two_cluster_recovery():
    data, labels = generate(SynthSpec(clusters=("C1", "C3"), n_per_cluster=2000,
                                      t_m=150, seed=7))
    config = TrainConfig(n_clusters=2, seed=7)
    start = time.perf_counter()
    outcomes = cross_validate(data, config, n_folds=5, true_labels=labels)
    per_fold = (time.perf_counter() - start) / 5
    summary = aggregate_reports(outcomes)
    ari_mean = summary["ari_mean"]

    control_rng = np.random.default_rng(404)
    control_c = []
    for out in outcomes:
        rand_labels = control_rng.integers(0, 2, size=len(out.test_indices))
        rep, _ = evaluate_fold(data, out.test_indices, rand_labels, 10, 2)
        control_c.append(rep.c_index)
    margin = summary["c_index_mean"] - float(np.mean(control_c))
    ok = ari_mean >= 0.90 and margin >= 0.05 and per_fold < 900
    report(4, ok,
           f"mean ARI {ari_mean:.4f} (needs >= 0.90), C-index margin over random "
           f"control {margin * 100:.1f} points (needs >= 5), {per_fold:.1f}s/fold")


def test_criterion_5_kuiper_beats_mmd_on_crossing_curves():
    wins = 0
    details = []
    for seed in range(5):
        data, labels = generate(SynthSpec(clusters=("C1", "C2", "C3"),
                                          n_per_cluster=2000, t_m=150,
                                          seed=100 + seed))
        n = len(data)
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        test, tr = perm[:n // 5], perm[n // 5:]
        data_tr, data_te = subset_dataset(data, tr), subset_dataset(data, test)
        scores = {}
        for name, spec in (("kuiper", DivergenceSpec(variant=KuiperUB())),
                           ("mmd", DivergenceSpec(variant=MMD()))):
            best = None
            for restart in range(3):
                cfg = TrainConfig(n_clusters=3, seed=500 + 1000 * restart + seed,
                                  divergence=spec, event_features=False)
                result = train(data_tr, cfg)
                if best is None or result.best_val_objective > best[0]:
                    best = (result.best_val_objective, result)
            pred, _ = assign(best[1].params, data_te, 1)
            scores[name] = adjusted_rand(labels[test], pred)
        wins += scores["kuiper"] > scores["mmd"]
        details.append(f"s{seed}:{scores['kuiper']:.2f}v{scores['mmd']:.2f}")
    report(5, wins >= 4,
           f"KuiperUB beat MMD on {wins}/5 seeds (needs >= 4): {' '.join(details)}")


def test_criterion_6_sample_size_sensitivity():
    values_a = np.array([1.0, 0.9, 0.5, 0.2, 0.0])
    values_b = np.array([1.0, 0.6, 0.3, 0.05, 0.0])
    kuiper_spec = DivergenceSpec(variant=KuiperUB())
    mmd_spec = DivergenceSpec(variant=MMD())

    def at(n):
        a = EmpiricalLifetimeDistribution(values_a, float(n))
        b = EmpiricalLifetimeDistribution(values_b, float(n))
        return (delta(kuiper_spec, a, b).value, delta(mmd_spec, a, b).value)

    k1, m1 = at(100)
    k4, m4 = at(400)
    ok = (k4 > k1) and (m4 == m1)
    report(6, ok,
           f"KuiperUB delta {k1:.3f} -> {k4:.3f} under 4x samples (strictly up), "
           f"MMD delta {m1:.6f} -> {m4:.6f} (exactly unchanged)")


def test_criterion_7_metric_oracles():
    rng = np.random.default_rng(77)
    checked = {"c_index": 0, "brier": 0, "logrank": 0, "ari": 0}
    worst = 0.0
    while min(checked.values()) < 100:
        n = int(rng.integers(3, 13))
        times = rng.integers(0, 9, size=n)
        cens = rng.integers(0, 2, size=n).astype(bool)
        events = ~cens
        k = int(rng.integers(2, 4))
        labels = rng.integers(0, k, size=n)
        risks = rng.choice([0.0, 0.5, 1.0, 2.0], size=n)
        curves = [np.sort(rng.uniform(size=10))[::-1] for _ in range(k)]

        if checked["c_index"] < 100:
            try:
                got = c_index(times, cens, risks)
                diff = abs(got - c_index_oracle(times, cens, risks))
                worst = max(worst, diff)
                checked["c_index"] += 1
            except NumericalError:
                pass
        if checked["brier"] < 100 and not np.all(cens & (times == 0)):
            got = integrated_brier(times, cens, curves, labels)
            worst = max(worst, abs(got - brier_oracle(times, cens, curves, labels)))
            checked["brier"] += 1
        if checked["logrank"] < 100 and len(set(labels)) == k and events.any():
            try:
                expected = logrank_oracle(times, events, labels, k)
            except np.linalg.LinAlgError:
                expected = None  # singular covariance: statistic undefined
            if expected is not None:
                got = logrank_statistic(times, events, labels, n_groups=k)
                worst = max(worst, abs(got - expected))
                checked["logrank"] += 1
        if checked["ari"] < 100:
            other = rng.integers(0, k, size=n)
            worst = max(worst, abs(adjusted_rand(labels, other)
                                   - ari_oracle(labels, other)))
            checked["ari"] += 1
    report(7, worst <= 1e-12,
           f"worst |metric - brute force oracle| = {worst:.2e} over 100+ instances "
           f"of each metric")


def test_criterion_8_cv_determinism(tmp_path):
    data_path = tmp_path / "toy.csv"
    code = cli_main(["synth", "--clusters", "C1,C3", "--n", "200", "--tm", "150",
                     "--seed", "5", "--out", str(data_path)])
    assert code == 0
    labels_path = tmp_path / "toy_labels.csv"
    dirs = [tmp_path / "runA", tmp_path / "runB"]
    for out_dir in dirs:
        code = cli_main(["cv", "--data", str(data_path), "--tm", "150", "--k", "2",
                         "--folds", "3", "--epochs", "20", "--batch-size", "128",
                         "--hidden-units", "32", "--seed", "9",
                         "--true-labels", str(labels_path), "--out", str(out_dir)])
        assert code == 0
    names = ["config_echo.txt", "report.txt"] + \
        [f"report_fold{i}.txt" for i in range(3)] + \
        [f"curves_fold{i}.csv" for i in range(3)]
    mismatched = [name for name in names
                  if (dirs[0] / name).read_bytes() != (dirs[1] / name).read_bytes()]
    report(8, not mismatched,
           f"two identical cv runs produced bitwise-identical report files "
           f"({len(names)} files compared)" if not mismatched
           else f"files differ: {mismatched}")
