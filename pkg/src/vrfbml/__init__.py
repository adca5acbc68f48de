"""VRFB stack thermal simulation and temperature-prediction regressors."""

from .datasets import (Mode, ScenarioMeta, Source, SplitDataset, SplitStrategy, TimeSeriesDataset,
                       load_csv, preprocess, split, synthesize, write_csv)
from .metrics import MetricsReport, evaluate, mae, r2, relative_percent_error, rmse
from .thermal import (OperatingProfile, ThermalState, VrfbParams, calibrate_resistance,
                      closed_form_temp, nernst_ocv, ode_rhs, simulate_cycle)

__version__ = "0.1.0"
