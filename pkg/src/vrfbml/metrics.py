"""Regression error metrics and per-scenario model comparison reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .datasets import Mode, ScenarioMeta, TimeSeriesDataset
from .errors import DataError

METRIC_NAMES = ("r2", "mae", "rmse")
MODEL_ORDER = ("lr", "svr", "gbt")


def _pair(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise ValueError("metrics need at least one sample")
    return a, p


def r2(actual, predicted) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot. Not clamped; may be negative."""
    a, p = _pair(actual, predicted)
    if a.size < 2:
        raise ValueError("r2 needs at least 2 samples")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2 is undefined for a constant actual series")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(math.sqrt(np.mean((a - p) ** 2)))


def relative_percent_error(er: float, pr: float) -> float:
    """(ER - PR) / ER * 100, signed. Take ``abs`` for the tabulated magnitude."""
    if er == 0:
        raise ZeroDivisionError("experimental reference value is zero")
    return (er - pr) / er * 100.0


@dataclass(frozen=True)
class MetricsReport:
    model_kind: str
    scenario: ScenarioMeta
    n: int
    r2: float
    mae: float
    rmse: float
    mean_actual: float
    mean_predicted: float
    rel_error_pct: float
    partition: str = "test"

    @property
    def rel_error_abs(self) -> float:
        return abs(self.rel_error_pct)

    @property
    def r2_negative(self) -> bool:
        return self.r2 < 0

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["scenario"] = {**doc["scenario"], "mode": self.scenario.mode.value,
                           "source": self.scenario.source.value}
        doc["rel_error_abs"] = self.rel_error_abs
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> MetricsReport:
        doc = dict(doc)
        doc.pop("rel_error_abs", None)
        doc["scenario"] = ScenarioMeta(**doc["scenario"])
        return cls(**doc)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> MetricsReport:
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: not a metrics report ({exc})") from None


def evaluate(model, test: TimeSeriesDataset, partition: str = "test") -> MetricsReport:
    if len(test) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    actual = test.temperature
    predicted = np.asarray(model.predict(test.time), dtype=float)
    mean_a, mean_p = float(actual.mean()), float(predicted.mean())
    return MetricsReport(
        model_kind=model.kind, scenario=test.meta, n=len(test),
        r2=r2(actual, predicted), mae=mae(actual, predicted), rmse=rmse(actual, predicted),
        mean_actual=mean_a, mean_predicted=mean_p,
        rel_error_pct=relative_percent_error(mean_a, mean_p), partition=partition,
    )


def _row_key(meta: ScenarioMeta) -> tuple[float, int]:
    return (meta.current_a, 0 if meta.mode is Mode.CHARGING else 1)


def comparison_table(reports, *, include_means: bool = False) -> tuple[str, list[str]]:
    """Merge per-model reports into one CSV grid.

    Rows are (current, mode); columns are model x {r2, mae, rmse}, with an
    optional block of mean actual / mean GBT prediction / relative error.
    Returns the CSV text and warnings for missing cells.
    """
    grid: dict[tuple, dict[str, MetricsReport]] = {}
    metas = {}
    for rep in reports:
        key = _row_key(rep.scenario)
        metas.setdefault(key, rep.scenario)
        cell = grid.setdefault(key, {})
        if rep.model_kind in cell:
            raise DataError(f"duplicate {rep.model_kind} report for "
                            f"{rep.scenario.current_a:g} A {rep.scenario.mode.value}")
        cell[rep.model_kind] = rep

    header = ["current_a", "mode"] + [f"{k}_{m}" for k in MODEL_ORDER for m in METRIC_NAMES]
    if include_means:
        header += ["mean_actual", "mean_predicted_gbt", "rel_error_pct_gbt"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    warnings = []
    for key in sorted(grid):
        meta = metas[key]
        row = [f"{meta.current_a:g}", meta.mode.value]
        for kind in MODEL_ORDER:
            rep = grid[key].get(kind)
            if rep is None:
                warnings.append(f"missing {kind} report for {meta.current_a:g} A {meta.mode.value}")
                row += ["", "", ""]
            else:
                row += [f"{rep.r2:.4f}", f"{rep.mae:.4f}", f"{rep.rmse:.4f}"]
        if include_means:
            rep = grid[key].get("gbt")
            if rep is None:
                row += ["", "", ""]
            else:
                row += [f"{rep.mean_actual:.4f}", f"{rep.mean_predicted:.4f}",
                        f"{rep.rel_error_abs:.4f}"]
        writer.writerow(row)
    return buf.getvalue(), warnings
