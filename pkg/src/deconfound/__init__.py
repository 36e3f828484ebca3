"""Adversarially de-confounded individualized treatment effect estimation.

Disentangled representation networks with a gradient-reversal treatment
classifier, the accompanying baselines, synthetic benchmarks with oracle
counterfactuals, and the PEHE evaluation harness.
"""

from .autograd import Adam, AdamState, DivergenceError, ParamTensor, SeededRng, Tape
from .data import ObservationalData
from .disentangle import ContributionVector, contribution_vector, orthogonality_loss, ortho_regulariser
from .estimators import CateEstimator, estimator_from_name
from .evaluation import AggregateReport, EvalReport, aggregate, pehe, predict_cate, propensity_histogram
from .harness import ExperimentConfig, render_report, run_experiment, sweep, tune_alpha
from .ihdp import IhdpRealization, load_realization, make_splits
from .synth import DgpConfig, SyntheticDataset, generate, split, sweep_configs
from .training import TrainConfig, TrainReport, coefficient_search, lambda_schedule, train
from .zoo import EstimatorSpec, LayerSpec, Model, PredBundle, build_estimator, forward

__version__ = "0.1.0"

__all__ = [
    "Adam", "AdamState", "DivergenceError", "ParamTensor", "SeededRng", "Tape",
    "ObservationalData", "ContributionVector", "contribution_vector",
    "orthogonality_loss", "ortho_regulariser", "CateEstimator",
    "estimator_from_name", "AggregateReport", "EvalReport", "aggregate",
    "pehe", "predict_cate", "propensity_histogram", "ExperimentConfig",
    "render_report", "run_experiment", "sweep", "tune_alpha",
    "IhdpRealization", "load_realization", "make_splits", "DgpConfig",
    "SyntheticDataset", "generate", "split", "sweep_configs", "TrainConfig",
    "TrainReport", "coefficient_search", "lambda_schedule", "train",
    "EstimatorSpec", "LayerSpec", "Model", "PredBundle", "build_estimator",
    "forward",
]
