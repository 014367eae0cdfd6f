"""Cross-validation orchestration shared by the CLI and the test harness."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .metrics import EvalReport, evaluate
from .survival import EmpiricalLifetimeDistribution
from .training import TrainConfig, TrainResult, assign, train


def subset_dataset(data: Dataset, indices) -> Dataset:
    return Dataset(subjects=[data.subjects[i] for i in indices], t_m=data.t_m)


def evaluation_event_flags(data: Dataset, w_fixed: int) -> np.ndarray:
    """Terminal-event indicators for metric computation.

    Observed termination signals are used when the dataset carries them;
    otherwise events are declared by the fixed inactivity timeout, the same
    convention baseline methods are scored with.
    """
    if data.has_termination_signals():
        return np.array([bool(s.terminated) for s in data.subjects])
    return data.inactive_periods() > w_fixed


@dataclass
class FoldOutcome:
    fold: int
    report: EvalReport
    curves: list[EmpiricalLifetimeDistribution]
    train_result: TrainResult
    test_indices: np.ndarray


def evaluate_fold(data: Dataset, indices, labels, w_fixed: int,
                  n_clusters: int, true_labels=None
                  ) -> tuple[EvalReport, list[EmpiricalLifetimeDistribution]]:
    fold_data = subset_dataset(data, indices)
    flags = evaluation_event_flags(fold_data, w_fixed)
    return evaluate(fold_data.observed_lifetimes(), flags, labels,
                    fold_data.t_max, n_clusters=n_clusters,
                    true_labels=true_labels)


def cross_validate(data: Dataset, config: TrainConfig, n_folds: int = 5,
                   n_train: int | None = None, true_labels=None,
                   w_fixed: int = 10) -> list[FoldOutcome]:
    """The evaluation protocol: hold out fold i, train on the rest, score.

    When ``n_train`` is given, that many training subjects are sampled from
    the non-test folds; the trainer itself carves out its 20% validation
    split internally.  Fold seeds are derived from the config seed.
    """
    if n_folds < 2:
        raise ValueError("need at least two folds")
    if len(data) < n_folds:
        raise ValueError("fewer subjects than folds")
    base = np.random.SeedSequence(config.seed)
    children = base.spawn(n_folds + 1)
    split_rng = np.random.default_rng(children[0])
    order = split_rng.permutation(len(data))
    folds = np.array_split(order, n_folds)
    true_arr = None if true_labels is None else np.asarray(true_labels)
    outcomes = []
    for fi, test_idx in enumerate(folds):
        rest = np.setdiff1d(order, test_idx)
        if n_train is not None and n_train < len(rest):
            rest = split_rng.choice(rest, size=n_train, replace=False)
        fold_seed = int(children[fi + 1].generate_state(1)[0])
        fold_config = replace(config, seed=fold_seed)
        result = train(subset_dataset(data, rest), fold_config)
        test_data = subset_dataset(data, test_idx)
        labels, _ = assign(result.params, test_data, config.tau)
        report, curves = evaluate_fold(
            data, test_idx, labels, w_fixed, config.n_clusters,
            true_labels=None if true_arr is None else true_arr[test_idx])
        outcomes.append(FoldOutcome(fold=fi, report=report, curves=curves,
                                    train_result=result, test_indices=test_idx))
    return outcomes


def aggregate_reports(outcomes: list[FoldOutcome]) -> dict[str, float]:
    """Per-metric mean and standard error over folds."""
    metrics: dict[str, list[float]] = {}
    for out in outcomes:
        for key, value in out.report.as_mapping().items():
            if isinstance(value, (int, float)):
                metrics.setdefault(key, []).append(float(value))
    summary: dict[str, float] = {"folds": len(outcomes)}
    for key, values in sorted(metrics.items()):
        arr = np.asarray(values)
        summary[f"{key}_mean"] = float(arr.mean())
        summary[f"{key}_se"] = float(arr.std(ddof=1) / np.sqrt(len(arr))) \
            if len(arr) > 1 else 0.0
    return summary
