"""Self-supervised anomaly detection for tabular data.

Random reversible polynomial transformations are applied to the data, a
classifier is trained to recognise which transformation produced each row,
and samples whose transformed versions the classifier finds hard to
recognise are scored as anomalous.
"""

from .basis import PolyTerm, apply_term, eval_chebyshev, eval_legendre, make_term
from .classifier import ClassifierModel, TrainConfig, init_model, predict_proba, train
from .data import Dataset, RobustScaler, load_csv, pad_even, sequential_split, stratified_split
from .detector import SortadDetector
from .errors import (
    ConfigError,
    DataError,
    ModelFormatError,
    ModelVersionError,
    SelectionError,
    SortadError,
    TrainingDivergenceError,
    TransformOverflowError,
)
from .evaluation import EvalReport, ThresholdMetrics, evaluate, learn_threshold, roc_auc
from .scoring import DirichletModel, ScoreReport, fit_dirichlet, fit_dirichlet_model
from .selection import TransformBank, select_transformations
from .serialization import load_model, save_model
from .transforms import TransformationSpec, forward, generate_spec, invert

__version__ = "0.1.0"

__all__ = [
    "ClassifierModel",
    "ConfigError",
    "DataError",
    "Dataset",
    "DirichletModel",
    "EvalReport",
    "ModelFormatError",
    "ModelVersionError",
    "PolyTerm",
    "RobustScaler",
    "ScoreReport",
    "SelectionError",
    "SortadDetector",
    "SortadError",
    "ThresholdMetrics",
    "TrainConfig",
    "TrainingDivergenceError",
    "TransformBank",
    "TransformOverflowError",
    "TransformationSpec",
    "apply_term",
    "evaluate",
    "eval_chebyshev",
    "eval_legendre",
    "fit_dirichlet",
    "fit_dirichlet_model",
    "forward",
    "generate_spec",
    "init_model",
    "invert",
    "learn_threshold",
    "load_csv",
    "load_model",
    "make_term",
    "pad_even",
    "predict_proba",
    "roc_auc",
    "save_model",
    "select_transformations",
    "sequential_split",
    "stratified_split",
    "train",
]
