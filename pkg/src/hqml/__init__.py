"""Hidden quantum Markov model simulation and robust Kraus-operator learning."""

from .datagen import (CorruptionPolicy, HmmSpec, ModelSpec, benchmark,
                      corrupt, generate_hmm, generate_hqmm)
from .entropy_filter import FilterStats, rcr_ef, row_metrics
from .models import (DensityMatrix, StackedKraus, StepResult, batch_loglik,
                     seq_loglik, step, validate)
from .rotate import Objective, SolverConfig, apply_update, eval_objective, maximize
from .trainers import (RunRecord, TrainConfig, resample_weights, train_em,
                       train_ila, train_rila)

__all__ = [
    "CorruptionPolicy", "HmmSpec", "ModelSpec", "benchmark", "corrupt",
    "generate_hmm", "generate_hqmm", "FilterStats", "rcr_ef", "row_metrics",
    "DensityMatrix", "StackedKraus", "StepResult", "batch_loglik",
    "seq_loglik", "step", "validate", "Objective", "SolverConfig",
    "apply_update", "eval_objective", "maximize", "RunRecord", "TrainConfig",
    "resample_weights", "train_em", "train_ila", "train_rila",
]

__version__ = "0.1.0"
