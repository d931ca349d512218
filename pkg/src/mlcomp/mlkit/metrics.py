"""Regression accuracy metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RegressionMetrics:
    mape: float
    r2: float
    max_ape: float
    n_excluded: int = 0  # samples dropped from the percentage errors because y_true == 0

    def as_dict(self) -> dict:
        return {"mape": self.mape, "r2": self.r2, "max_ape": self.max_ape,
                "n_excluded": self.n_excluded}


def regression_metrics(y_true, y_pred) -> RegressionMetrics:
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("y_true and y_pred must be non-empty and of equal length")
    nz = y_true != 0
    if not nz.any():
        raise ValueError("all y_true values are zero; percentage error undefined")
    ape = np.abs((y_pred[nz] - y_true[nz]) / y_true[nz])
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res == 0 else 0.0
    return RegressionMetrics(float(ape.mean()), r2, float(ape.max()), int((~nz).sum()))
