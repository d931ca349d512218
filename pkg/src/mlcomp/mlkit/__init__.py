"""Small numpy toolkit: preprocessing, regression and error metrics."""

from .metrics import RegressionMetrics, regression_metrics
from .preprocess import (
    PCA, PREPROCESSORS, NotFittedError, Preprocessor, Scaler, assess_dimension,
    fit_preprocessor, make_preprocessor, mle_dimension, preprocessor_from_dict,
)
from .regress import (
    KNN, REGRESSORS, Forest, Linear, Regressor, Tree, best_split, fit_regressor,
    make_regressor, regressor_from_dict,
)

__all__ = [
    "RegressionMetrics", "regression_metrics", "PCA", "PREPROCESSORS", "NotFittedError",
    "Preprocessor", "Scaler", "assess_dimension", "fit_preprocessor", "make_preprocessor",
    "mle_dimension", "preprocessor_from_dict", "KNN", "REGRESSORS", "Forest", "Linear",
    "Regressor", "Tree", "best_split", "fit_regressor", "make_regressor", "regressor_from_dict",
]
