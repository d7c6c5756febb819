"""Logistic-loss estimation of a fixed regressor subset.

Newton's method (equivalently IRLS) fits the coefficients; the WLS-style
covariance at the optimum feeds a two-sided Student's t interval test that
removes terms indistinguishable from zero.

The numeric inner loops live in compiled kernels; this module handles
configuration, model records and the pruning logic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.stats import t as student_t

from . import _kernels as _k

# output of a model with no regressors when the modeled class is not the majority
EMPTY_OUTPUT = -1.0
DISPERSIONS = ("pearson", "working", "fixed")
_HALVINGS = 30
# gradient norm accepted as converged when no step decreases the loss
_STUCK_TOL = 1e-6
_DISPERSION_CODE = {"pearson": _k.PEARSON, "working": _k.WORKING, "fixed": _k.FIXED}


@dataclass(frozen=True)
class FitConfig:
    max_newton_iters: int = 50
    grad_tol: float = 1e-8
    ridge: float = 0.0
    alpha: float = 0.99
    iterate_pruning: bool = False
    dispersion: str = "pearson"

    def __post_init__(self):
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.dispersion not in DISPERSIONS:
            raise ValueError(f"dispersion must be one of {DISPERSIONS}")


@dataclass(frozen=True)
class FittedModel:
    selected: tuple[int, ...]
    theta: np.ndarray
    loss: float
    J: float
    sigma: np.ndarray
    converged: bool
    n_iter: int = 0
    ridge_fallback: bool = False
    n_extracted: int = field(default=-1, compare=False)  # size before the t-test
    bias: float = EMPTY_OUTPUT  # constant output when nothing is selected

    @property
    def size(self) -> int:
        return len(self.selected)

    def decision(self, design: np.ndarray) -> np.ndarray:
        """Model output for a design matrix whose columns follow ``selected``."""
        if not self.selected:
            return np.full(design.shape[0], self.bias)
        return design @ self.theta

    def to_dict(self) -> dict:
        return {
            "selected": [int(j) for j in self.selected],
            "theta": self.theta.tolist(),
            "sigma": self.sigma.tolist(),
            "loss": self.loss,
            "J": self.J,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "ridge_fallback": self.ridge_fallback,
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        return cls(
            tuple(int(j) for j in d["selected"]),
            np.asarray(d["theta"], dtype=float),
            float(d["loss"]),
            float(d["J"]),
            np.asarray(d["sigma"], dtype=float),
            bool(d["converged"]),
            int(d.get("n_iter", 0)),
            bool(d.get("ridge_fallback", False)),
            bias=float(d.get("bias", EMPTY_OUTPUT)),
        )


def empty_model(y: np.ndarray) -> FittedModel:
    """Constant-sign predictor: "rest" unless the modeled class is a strict majority."""
    y = np.asarray(y, dtype=float)
    bias = 1.0 if np.mean(y > 0) > 0.5 else EMPTY_OUTPUT
    yhat = np.full(y.shape[0], bias)
    return FittedModel((), np.zeros(0), float(_mean_loss(y * yhat)), performance_J(yhat, y),
                       np.zeros(0), True, bias=bias)


def _mean_loss(margin: np.ndarray, axis=None):
    return np.mean(np.logaddexp(0.0, -margin), axis=axis)


def logistic_loss(theta, design, y) -> float:
    """Mean of log(1 + exp(-y * yhat)), evaluated without overflow."""
    return float(_mean_loss(np.asarray(y) * (np.asarray(design) @ np.asarray(theta))))


def _misfit(margin: np.ndarray) -> np.ndarray:
    # 1 / (1 + exp(margin)): probability mass on the wrong class
    return 0.5 * (1.0 - np.tanh(0.5 * margin))


def loss_gradient(theta, design, y, ridge: float = 0.0) -> np.ndarray:
    margin = y * (design @ theta)
    return -(design.T @ (y * _misfit(margin))) / y.shape[0] + ridge * theta


def loss_hessian(theta, design, y, ridge: float = 0.0) -> np.ndarray:
    p = _misfit(y * (design @ theta))
    w = p * (1.0 - p)
    h = (design.T * w) @ design / y.shape[0]
    if ridge:
        h[np.diag_indices_from(h)] += ridge
    return h


def performance_J(yhat, y) -> float:
    """Fraction of samples with y * yhat > 0; yhat == 0 counts as an error."""
    return float(np.mean(np.asarray(y, dtype=float) * np.asarray(yhat, dtype=float) > 0.0))


@lru_cache(maxsize=4096)
def t_critical(alpha: float, dof: int) -> float:
    """Two-sided critical value of Student's t at confidence ``alpha``."""
    return float(student_t.ppf(0.5 * (1.0 + alpha), max(dof, 1)))


def _dense(design) -> np.ndarray:
    return np.ascontiguousarray(design, dtype=float)


def _fit_one(x, y, cfg: FitConfig, selected, variances: bool, theta0=None) -> FittedModel:
    n, tau = x.shape
    if n < tau:
        raise ValueError(f"{tau} regressors but only {n} samples")
    start = np.zeros(tau) if theta0 is None else np.array(theta0, dtype=float)
    theta, converged, n_iter, fallback = _k.newton(
        x, y, start, cfg.ridge, cfg.max_newton_iters, cfg.grad_tol, _HALVINGS, _STUCK_TOL)
    sigma = np.full(tau, np.nan)
    if variances:
        var, bumped = _k.variances(x, theta, y, _DISPERSION_CODE[cfg.dispersion], cfg.ridge)
        sigma = np.sqrt(np.maximum(var, 0.0))
        fallback = fallback or bumped
    loss, J = _k.summary(x, theta, y)
    return FittedModel(tuple(selected), theta, float(loss), float(J), sigma, bool(converged),
                       int(n_iter), bool(fallback))


def fit_many(designs, y, cfg: FitConfig = FitConfig(), selected=None, variances: bool = False):
    """Fit each design (no pruning); empty designs give the empty model."""
    y = _dense(y)
    designs = [_dense(d) for d in designs]
    if selected is None:
        selected = [range(d.shape[1]) for d in designs]
    out = []
    for d, sel in zip(designs, selected):
        sel = tuple(int(s) for s in sel)
        out.append(empty_model(y) if d.shape[1] == 0 else _fit_one(d, y, cfg, sel, variances))
    return out


def fit(design, y, cfg: FitConfig = FitConfig(), selected=None, theta0=None) -> FittedModel:
    """Damped Newton minimization of the (optionally ridge-augmented) logistic loss."""
    design = _dense(design)
    y = _dense(y)
    if design.shape[1] == 0:
        return empty_model(y)
    sel = range(design.shape[1]) if selected is None else selected
    return _fit_one(design, y, cfg, tuple(int(s) for s in sel), False, theta0)


def coefficient_variances(model: FittedModel, design, y, dispersion: str = "pearson",
                          ridge: float = 0.0):
    """Per-coefficient variances sigma_e^2 * (G^-1)_jj with G = Psi' R Psi.

    sigma_e^2 is the weighted sum of squared IRLS working residuals over
    N - tau for "pearson", the unweighted sum for "working", and 1 for
    "fixed" (the Fisher covariance). Returns (variances, whether G needed a
    ridge to be inverted).
    """
    design = _dense(design)
    if design.shape[1] == 0:
        return np.zeros(0), False
    var, bumped = _k.variances(design, _dense(model.theta), _dense(y),
                               _DISPERSION_CODE[dispersion], ridge)
    return var, bool(bumped)


def with_variances(model: FittedModel, design, y, dispersion: str = "pearson",
                   ridge: float = 0.0) -> FittedModel:
    var, bumped = coefficient_variances(model, design, y, dispersion, ridge)
    return replace(model, sigma=np.sqrt(np.maximum(var, 0.0)),
                   ridge_fallback=model.ridge_fallback or bumped)


def _significant(model: FittedModel, n: int, alpha: float) -> np.ndarray:
    tcrit = t_critical(alpha, n - model.size)
    return np.abs(model.theta) > model.sigma * tcrit


def prune_many(models, designs, y, cfg: FitConfig = FitConfig()):
    """t-test every model (sigma must be set), drop covered-by-zero terms, refit."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    out = list(models)
    current = list(models)
    todo = list(range(len(models)))
    cols = {i: np.arange(designs[i].shape[1]) for i in todo}
    while todo:
        refit_ids, refit_designs, refit_sel = [], [], []
        for i in todo:
            m = current[i]
            if not m.selected:
                out[i] = m
                continue
            keep = _significant(m, n, cfg.alpha)
            if keep.all():
                out[i] = m
                continue
            cols[i] = cols[i][keep]
            refit_ids.append(i)
            refit_designs.append(designs[i][:, cols[i]])
            refit_sel.append(tuple(s for s, k in zip(m.selected, keep) if k))
        if not refit_ids:
            break
        refits = fit_many(refit_designs, y, cfg, refit_sel, variances=True)
        for i, m in zip(refit_ids, refits):
            current[i] = out[i] = m
        todo = refit_ids if cfg.iterate_pruning else []
    return out


def t_test_prune(model: FittedModel, design, y, cfg: FitConfig = FitConfig()) -> FittedModel:
    """Drop regressors whose confidence interval covers 0, then re-estimate.

    ``design`` has one column per entry of ``model.selected``. A single pass
    unless ``cfg.iterate_pruning`` is set.
    """
    design = np.asarray(design, dtype=float)
    if model.selected and np.isnan(model.sigma).any():
        model = with_variances(model, design, y, cfg.dispersion, cfg.ridge)
    return prune_many([model], [design], y, cfg)[0]


def fit_and_prune_many(designs, y, cfg: FitConfig = FitConfig(), selected=None):
    """Estimate, test, prune and re-estimate a batch of extracted structures."""
    first = fit_many(designs, y, cfg, selected, variances=True)
    pruned = prune_many(first, [np.asarray(d, dtype=float) for d in designs], y, cfg)
    return [replace(p, n_extracted=f.size) for p, f in zip(pruned, first)]


def fit_and_prune(design, y, cfg: FitConfig = FitConfig(), selected=None) -> FittedModel:
    return fit_and_prune_many([design], y, cfg, None if selected is None else [selected])[0]
