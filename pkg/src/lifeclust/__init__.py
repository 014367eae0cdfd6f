"""Lifetime clustering by divergence maximization over empirical survival curves."""

from .data import Dataset, SubjectRecord, read_dataset_csv, write_dataset_csv
from .divergence import (AllPairs, DeltaResult, DivergenceSpec, KuiperUB, MMD,
                         SampleWithoutReplacement, delta, min_pair_objective)
from .errors import DataFormatError, DegenerateClusterError, NumericalError
from .kuiper import (KuiperResult, kd_lower_bound, kd_reference, kd_upper_bound,
                     kuiper_statistic, kuiper_test, lambda_of, log_kd_upper_grad)
from .metrics import (EvalReport, adjusted_rand, c_index, evaluate,
                      integrated_brier, logrank_statistic)
from .network import (ModelParams, extract_features, forward, load_checkpoint,
                      save_checkpoint)
from .survival import (EmpiricalLifetimeDistribution, FixedTimeout,
                       LearnableExponential, ObservedSignals, differentiable_km,
                       termination_probability, weighted_kaplan_meier)
from .synthetic import SynthSpec, generate
from .training import TrainConfig, TrainResult, assign, train

__all__ = [
    "AllPairs", "DataFormatError", "Dataset", "DegenerateClusterError",
    "DeltaResult", "DivergenceSpec", "EmpiricalLifetimeDistribution",
    "EvalReport", "FixedTimeout", "KuiperResult", "KuiperUB",
    "LearnableExponential", "MMD", "ModelParams", "NumericalError",
    "ObservedSignals", "SampleWithoutReplacement", "SubjectRecord", "SynthSpec",
    "TrainConfig", "TrainResult", "adjusted_rand", "assign", "c_index", "delta",
    "differentiable_km", "evaluate", "extract_features", "forward", "generate",
    "integrated_brier", "kd_lower_bound", "kd_reference", "kd_upper_bound",
    "kuiper_statistic", "kuiper_test", "lambda_of", "load_checkpoint",
    "log_kd_upper_grad", "logrank_statistic", "min_pair_objective",
    "read_dataset_csv", "save_checkpoint", "termination_probability", "train",
    "weighted_kaplan_meier", "write_dataset_csv",
]

__version__ = "0.1.0"
