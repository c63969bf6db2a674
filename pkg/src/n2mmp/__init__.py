"""Machine-learning models for the minimum miscibility pressure of N2 / crude
oil systems: data handling, sample partitioning, twelve regressors, model
comparison and sensitivity analysis."""

from .dataset import Dataset, describe, load_csv, save_csv, synthesize
from .evaluation import compare, crossval, metrics, sensitivity
from .models import MODEL_NAMES, FittedModel, derive_seed, fit_model
from .partition import split

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FittedModel",
    "MODEL_NAMES",
    "compare",
    "crossval",
    "derive_seed",
    "describe",
    "fit_model",
    "load_csv",
    "metrics",
    "save_csv",
    "sensitivity",
    "split",
    "synthesize",
    "__version__",
]
