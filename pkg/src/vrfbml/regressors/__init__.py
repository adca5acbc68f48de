from .gbt import GbtModel, RegressionTree, fit_gbt, leaf_output, predict_gbt, split_gain
from .linear import LinearModel, fit_lr, predict_lr
from .svr import Kernel, SvrModel, fit_svr, predict_svr
from .persistence import (FORMAT_VERSION, RegressionModel, load_model, model_from_dict,
                          model_to_dict, predict, save_model)

KINDS = ("lr", "svr", "gbt")


def fit_model(kind: str, train, hyper: dict | None = None) -> RegressionModel:
    """Dispatch to the fitter for ``kind`` with a config-style hyperparameter dict."""
    from ..errors import TrainingError

    hyper = dict(hyper or {})
    try:
        if kind == "lr":
            if hyper:
                raise TrainingError(f"linear regression takes no hyperparameters, got {sorted(hyper)}")
            return fit_lr(train)
        if kind == "svr":
            return fit_svr(train, **hyper)
        if kind == "gbt":
            if "lambda" in hyper:
                hyper["lam"] = hyper.pop("lambda")
            return fit_gbt(train, **hyper)
    except TypeError as exc:
        raise TrainingError(f"bad {kind} hyperparameters: {exc}") from None
    raise TrainingError(f"unknown model kind {kind!r}; expected one of {KINDS}")
