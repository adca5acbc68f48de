"""Ordinary least squares on a single feature (time)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datasets import TimeSeriesDataset
from ..errors import TrainingError


@dataclass(frozen=True)
class LinearModel:
    slope: float
    intercept: float

    kind = "lr"

    def predict(self, time_s):
        return predict_lr(self, time_s)


def fit_lr(train: TimeSeriesDataset) -> LinearModel:
    """Closed-form least squares: slope = cov(x, y) / var(x)."""
    x, y = train.time, train.temperature
    if len(x) < 2:
        raise TrainingError("linear regression needs at least 2 samples")
    x_mean, y_mean = x.mean(), y.mean()
    dx = x - x_mean
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise TrainingError("linear regression needs at least 2 distinct times")
    slope = float(dx @ (y - y_mean)) / sxx
    intercept = float(y_mean - slope * x_mean)
    if not (np.isfinite(slope) and np.isfinite(intercept)):
        raise TrainingError("non-finite least-squares coefficients")
    return LinearModel(slope, intercept)


def predict_lr(model: LinearModel, time_s):
    return model.slope * np.asarray(time_s, dtype=float) + model.intercept
