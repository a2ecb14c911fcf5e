"""Fairness-aware data valuation (FADO).

Entropy-based per-instance valuations toward a target and protected
attributes, utility aggregation, utility-aware pre-processing and a
benchmark harness for performance/fairness trade-offs.
"""

from fado.dataset import Dataset, DatasetSchema, group_prevalence, load_csv, split_ordered, write_csv
from fado.errors import FadoValidationError, ParseError, SchemaError
from fado.learners import LearnerSpec, fit, predict_proba, sample_grid
from fado.preprocess import InterventionResult, rps, rw, uar, uasp
from fado.synthgen import BiasSpec, generate
from fado.utility import UtilityConfig, UtilityVector, compute_utility, min_max_scale
from fado.valuation import (
    ValuationConfig,
    ValuationVector,
    in_bag_valuation,
    make_bags,
    out_of_bag_valuation,
    prediction_entropy,
    value_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "BiasSpec",
    "Dataset",
    "DatasetSchema",
    "FadoValidationError",
    "InterventionResult",
    "LearnerSpec",
    "ParseError",
    "SchemaError",
    "UtilityConfig",
    "UtilityVector",
    "ValuationConfig",
    "ValuationVector",
    "compute_utility",
    "fit",
    "generate",
    "group_prevalence",
    "in_bag_valuation",
    "load_csv",
    "make_bags",
    "min_max_scale",
    "out_of_bag_valuation",
    "predict_proba",
    "prediction_entropy",
    "rps",
    "rw",
    "sample_grid",
    "split_ordered",
    "uar",
    "uasp",
    "value_dataset",
    "write_csv",
]
