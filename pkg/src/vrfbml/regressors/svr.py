"""Epsilon-insensitive support vector regression on one standardized feature.

The dual is solved in terms of beta_i = alpha_i - alpha_i*::

    min  1/2 beta' K beta - y' beta + eps * sum|beta_i|
    s.t. sum beta_i = 0,  -C <= beta_i <= C

by SMO-style coordinate descent: each step picks the maximal KKT-violating
pair (i, j), moves beta_i += t, beta_j -= t (which keeps the equality
constraint) and minimizes the resulting 1-D piecewise quadratic exactly.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..datasets import TimeSeriesDataset
from ..errors import TrainingError

log = logging.getLogger(__name__)


class Kernel(str, enum.Enum):
    RBF = "rbf"
    LINEAR = "linear"


def kernel_matrix(a, b, kernel: Kernel, gamma: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[None, :]
    if kernel is Kernel.RBF:
        return np.exp(-gamma * (a - b) ** 2)
    return a * b


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_x: np.ndarray  # standardized
    dual_coefs: np.ndarray
    bias: float
    gamma: float
    epsilon: float
    c: float
    x_mean: float
    x_std: float
    kernel: Kernel = Kernel.RBF
    converged: bool = True
    kkt_violation: float = 0.0
    iterations: int = 0
    # full-length duals kept for diagnostics; not persisted
    train_duals: np.ndarray | None = field(default=None, repr=False)

    kind = "svr"

    def predict(self, time_s):
        return predict_svr(self, time_s)


def predict_svr(model: SvrModel, time_s):
    x = np.asarray(time_s, dtype=float)
    z = (np.atleast_1d(x) - model.x_mean) / model.x_std
    out = kernel_matrix(z, model.support_x, model.kernel, model.gamma) @ model.dual_coefs + model.bias
    return float(out[0]) if x.ndim == 0 else out


def dual_objective(beta, K, y, epsilon: float) -> float:
    beta = np.asarray(beta, dtype=float)
    return float(0.5 * beta @ K @ beta - y @ beta + epsilon * np.abs(beta).sum())


def _bias_intervals(beta, grad, c: float, epsilon: float, atol: float):
    """Per-sample interval [lo, hi] of bias values consistent with KKT."""
    lo = np.full_like(grad, -np.inf)
    hi = np.full_like(grad, np.inf)
    at_zero = np.abs(beta) <= atol
    pos_free = (beta > atol) & (beta < c - atol)
    neg_free = (beta < -atol) & (beta > -c + atol)
    at_upper = beta >= c - atol
    at_lower = beta <= -c + atol
    low_tube = -epsilon - grad  # y_i - f_i = +eps
    high_tube = epsilon - grad  # y_i - f_i = -eps
    lo[at_zero], hi[at_zero] = low_tube[at_zero], high_tube[at_zero]
    lo[pos_free], hi[pos_free] = low_tube[pos_free], low_tube[pos_free]
    lo[neg_free], hi[neg_free] = high_tube[neg_free], high_tube[neg_free]
    hi[at_upper] = low_tube[at_upper]
    lo[at_lower] = high_tube[at_lower]
    return lo, hi


def _pair_step(bi: float, bj: float, gi: float, gj: float, eta: float,
               c: float, epsilon: float) -> float:
    """Exact minimizer t of the pair objective along beta_i += t, beta_j -= t."""
    t_lo = max(-c - bi, bj - c)
    t_hi = min(c - bi, bj + c)
    dg = gi - gj

    def phi(t):
        return 0.5 * eta * t * t + dg * t + epsilon * (abs(bi + t) + abs(bj - t))

    knots = sorted({t_lo, t_hi, *(k for k in (-bi, bj) if t_lo < k < t_hi)})
    candidates = list(knots)
    if eta > 1e-12:
        for a, b in zip(knots[:-1], knots[1:]):
            mid = 0.5 * (a + b)
            s = math.copysign(1.0, bi + mid) - math.copysign(1.0, bj - mid)
            candidates.append(min(max(-(dg + epsilon * s) / eta, a), b))
    return min(candidates, key=phi)


def solve_dual(K: np.ndarray, y: np.ndarray, c: float, epsilon: float,
               tol: float = 1e-4, max_passes: int = 100_000):
    """Return (beta, bias, converged, violation, iterations)."""
    n = len(y)
    beta = np.zeros(n)
    grad = -y.astype(float)  # K beta - y
    atol = 1e-12 * c
    diag = np.diag(K).copy()
    violation = math.inf
    it = 0
    for it in range(1, max_passes + 1):
        lo, hi = _bias_intervals(beta, grad, c, epsilon, atol)
        i = int(np.argmax(lo))
        j_first = int(np.argmin(hi))
        violation = float(lo[i] - hi[j_first])
        if violation < tol:
            break
        # second-order choice of j: largest predicted decrease (lo_i - hi_j)^2 / eta_ij
        gap = lo[i] - hi
        eta_all = diag[i] + diag - 2.0 * K[i]
        score = np.where(gap > 0, gap * gap / np.maximum(eta_all, 1e-12), -np.inf)
        score[i] = -np.inf
        j = int(np.argmax(score))
        if not np.isfinite(score[j]):
            j = j_first
        eta = diag[i] + diag[j] - 2.0 * K[i, j]
        t = _pair_step(beta[i], beta[j], grad[i], grad[j], eta, c, epsilon)
        if t == 0.0 and j != j_first:
            j = j_first
            eta = diag[i] + diag[j] - 2.0 * K[i, j]
            t = _pair_step(beta[i], beta[j], grad[i], grad[j], eta, c, epsilon)
        if t == 0.0:
            log.debug("svr: zero step at iteration %d (violation %.3g)", it, violation)
            break
        new_i, new_j = beta[i] + t, beta[j] - t
        # snap onto the box and onto zero so set membership stays exact
        for idx, val in ((i, new_i), (j, new_j)):
            if abs(val) <= atol:
                val = 0.0
            elif abs(val - c) <= atol:
                val = c
            elif abs(val + c) <= atol:
                val = -c
            beta[idx] = val
        t_i, t_j = beta[i] - (new_i - t), (new_j + t) - beta[j]
        grad += t_i * K[:, i] - t_j * K[:, j]
    else:
        lo, hi = _bias_intervals(beta, grad, c, epsilon, atol)
        violation = float(lo.max() - hi.min())

    converged = violation < tol
    lo, hi = _bias_intervals(beta, grad, c, epsilon, atol)
    free = (np.abs(beta) > atol) & (np.abs(beta) < c - atol)
    if free.any():
        bias = float(lo[free].mean())
    else:
        upper, lower = lo.max(), hi.min()
        if math.isfinite(upper) and math.isfinite(lower):
            bias = 0.5 * (upper + lower)
        elif math.isfinite(upper):
            bias = float(upper)
        elif math.isfinite(lower):
            bias = float(lower)
        else:
            bias = 0.0
    return beta, bias, converged, violation, it


def fit_svr(train: TimeSeriesDataset, c: float = 10.0, epsilon: float = 0.05,
            gamma: float | str = "auto", max_passes: int = 100_000, tol: float = 1e-4,
            kernel: Kernel | str = Kernel.RBF) -> SvrModel:
    kernel = Kernel(kernel)
    if not (c > 0 and math.isfinite(c)):
        raise TrainingError(f"C must be > 0, got {c}")
    if not (epsilon >= 0 and math.isfinite(epsilon)):
        raise TrainingError(f"epsilon must be >= 0, got {epsilon}")
    if tol <= 0 or max_passes < 1:
        raise TrainingError("tol must be > 0 and max_passes >= 1")
    x, y = train.time, train.temperature
    if len(x) < 2:
        raise TrainingError("SVR needs at least 2 samples")

    x_mean = float(x.mean())
    x_std = float(x.std())
    if x_std == 0.0:
        x_std = 1.0
    z = (x - x_mean) / x_std
    if gamma == "auto":
        var = float(z.var())
        gamma = 1.0 / var if var > 0 else 1.0
    gamma = float(gamma)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise TrainingError(f"gamma must be > 0, got {gamma}")

    K = kernel_matrix(z, z, kernel, gamma)
    beta, bias, converged, violation, iterations = solve_dual(K, y, c, epsilon, tol, max_passes)
    if not converged:
        log.warning("svr: not converged after %d iterations, KKT violation %.3g",
                    iterations, violation)
    support = beta != 0.0
    return SvrModel(support_x=z[support].copy(), dual_coefs=beta[support].copy(), bias=bias,
                    gamma=gamma, epsilon=float(epsilon), c=float(c), x_mean=x_mean, x_std=x_std,
                    kernel=kernel, converged=converged, kkt_violation=violation,
                    iterations=iterations, train_duals=beta)
