"""Randomized model structure selection over a polynomial regressor set.

A vector of regressor inclusion probabilities (RIPs) defines independent
Bernoulli draws over candidate regressors. Each iteration extracts a
population of structures, fits and prunes every one, scores them by training
accuracy and moves each RIP by the gap between the mean score of models
that contain the regressor and of models that do not.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .estimator import FitConfig, FittedModel, fit_and_prune, fit_and_prune_many
from .features import DesignSource, RegressorSet

log = logging.getLogger(__name__)

MEMBERSHIPS = ("extracted", "retained")


@dataclass(frozen=True)
class RfscConfig:
    n_population: int = 100
    max_iterations: int = 300
    epsilon: float = 0.01
    mu_init: float | None = None  # None means 1 / N_r
    seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)
    accept_threshold: float = 0.5
    # whether importance counts a regressor as present when it was drawn
    # ("extracted") or only when it survived the t-test ("retained")
    membership: str = "extracted"
    # also require every RIP within epsilon of 0 or 1 (or a population of equal
    # scores) before stopping
    require_settled: bool = True

    def __post_init__(self):
        if self.n_population < 2:
            raise ValueError("n_population must be >= 2")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.mu_init is not None and not 0.0 < self.mu_init < 1.0:
            raise ValueError("mu_init must lie in (0, 1)")
        if self.membership not in MEMBERSHIPS:
            raise ValueError(f"membership must be one of {MEMBERSHIPS}")

    def initial_mu(self, n_regressors: int) -> float:
        return 1.0 / n_regressors if self.mu_init is None else self.mu_init


@dataclass
class RipState:
    mu: np.ndarray
    iteration: int = 0


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    mean_loss: float
    ams_pre: float
    ams_post: float
    J_max: float
    J_mean: float
    gamma: float
    n_mu_above_half: int
    max_change: float
    changed: np.ndarray  # indices whose RIP moved this iteration
    mu_changed: np.ndarray  # their new values

    COLUMNS = ("iteration", "J_mean", "J_max", "gamma", "ams_pre", "ams_post",
               "n_mu_above_half", "mean_loss")

    def row(self) -> tuple:
        return (self.iteration, self.J_mean, self.J_max, self.gamma, self.ams_pre,
                self.ams_post, self.n_mu_above_half, self.mean_loss)


@dataclass
class SelectionResult:
    model: FittedModel
    trace: list[IterationTrace]
    rip: RipState
    converged: bool
    n_fits: int = 0

    def __iter__(self):
        # unpacks as (model, trace)
        return iter((self.model, self.trace))

    def mu_history(self, mu_init: float) -> np.ndarray:
        """Dense (iterations + 1) x N_r RIP history rebuilt from the sparse trace."""
        mu = np.full(self.rip.mu.shape[0], mu_init)
        rows = [mu.copy()]
        for tr in self.trace:
            mu[tr.changed] = tr.mu_changed
            rows.append(mu.copy())
        return np.array(rows)


def sample_structure(rip: RipState, rng: np.random.Generator) -> np.ndarray:
    """Indices j drawn independently with probability mu_j."""
    return np.flatnonzero(rng.random(rip.mu.shape[0]) < rip.mu)


def importance(population, n_regressors: int | None = None) -> np.ndarray:
    """Mean J of models containing j minus mean J of models without j.

    ``population`` is either a list of (index set, J) pairs or a tuple
    (membership matrix, J vector). Zero wherever either side is empty.
    """
    if isinstance(population, tuple) and len(population) == 2 and np.ndim(population[0]) == 2:
        member = np.asarray(population[0], dtype=bool)
        J = np.asarray(population[1], dtype=float)
    else:
        if not population:
            raise ValueError("population must be non-empty")
        if n_regressors is None:
            n_regressors = 1 + max((max(s) for s, _ in population if len(s)), default=-1)
        member = np.zeros((len(population), n_regressors), dtype=bool)
        for row, (s, _) in enumerate(population):
            member[row, list(s)] = True
        J = np.array([j for _, j in population], dtype=float)
    n_in = member.sum(axis=0)
    n_out = member.shape[0] - n_in
    sum_in = J @ member
    sum_out = J.sum() - sum_in
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = sum_in / n_in - sum_out / n_out
    return np.where((n_in > 0) & (n_out > 0), gap, 0.0)


def step_size(J_max: float, J_mean: float) -> float:
    return 1.0 / (10.0 * (J_max - J_mean) + 0.1)


def update_rips(rip: RipState, imp: np.ndarray, gamma: float) -> RipState:
    if imp.shape != rip.mu.shape:
        raise ValueError("importance and RIP vectors differ in length")
    return RipState(np.clip(rip.mu + gamma * imp, 0.0, 1.0), rip.iteration + 1)


def _structure_key(mask: np.ndarray) -> bytes:
    return np.packbits(mask).tobytes()


def select(targets, rs: RegressorSet, data, cfg: RfscConfig = RfscConfig(),
           class_index: int | None = None) -> SelectionResult:
    """Run the RIP iteration for one binary target and return the final model.

    Stops when no RIP moves by more than ``cfg.epsilon`` and the distribution
    has settled (see ``RfscConfig.require_settled``), or after
    ``cfg.max_iterations``. The final structure holds every regressor whose
    RIP reached ``cfg.accept_threshold`` and is fitted and pruned once.
    """
    y = np.asarray(getattr(targets, "y", targets), dtype=float)
    if isinstance(data, DesignSource):
        source = data
    else:
        source = DesignSource(rs, np.asarray(getattr(data, "features", data), dtype=float))
    n_r = len(rs)
    rip = RipState(np.full(n_r, cfg.initial_mu(n_r)))
    cache: dict[bytes, FittedModel] = {}
    trace: list[IterationTrace] = []
    converged = False

    for t in range(cfg.max_iterations):
        # one stream per (seed, iteration); row k belongs to model k
        rng = np.random.default_rng([cfg.seed, t])
        masks = rng.random((cfg.n_population, n_r)) < rip.mu
        keys = [_structure_key(m) for m in masks]
        fresh = list(dict.fromkeys(k for k in keys if k not in cache))
        if fresh:
            rows = {k: i for i, k in reversed(list(enumerate(keys)))}
            sel = [np.flatnonzero(masks[rows[k]]) for k in fresh]
            fitted = fit_and_prune_many([source(s) for s in sel], y, cfg.fit, sel)
            cache.update(zip(fresh, fitted))
        models = [cache[k] for k in keys]
        post = np.zeros_like(masks)
        for k, model in enumerate(models):
            post[k, list(model.selected)] = True
        J = np.array([m.J for m in models])
        loss = np.array([m.loss for m in models])
        imp = importance((masks if cfg.membership == "extracted" else post, J))
        # a rounded mean can exceed the max by one ulp when all J agree
        J_mean = min(float(J.mean()), float(J.max()))
        gamma = step_size(J.max(), J_mean)
        new = update_rips(rip, imp, gamma)
        change = np.abs(new.mu - rip.mu)
        moved = np.flatnonzero(change > 0)
        trace.append(IterationTrace(
            iteration=t + 1,
            mean_loss=float(loss.mean()),
            ams_pre=float(masks.sum(axis=1).mean()),
            ams_post=float(post.sum(axis=1).mean()),
            J_max=float(J.max()),
            J_mean=J_mean,
            gamma=gamma,
            n_mu_above_half=int(np.count_nonzero(new.mu >= 0.5)),
            max_change=float(change.max(initial=0.0)),
            changed=moved,
            mu_changed=new.mu[moved],
        ))
        rip = new
        # equal scores give zero importance everywhere: the RIPs can no longer move
        settled = (np.minimum(rip.mu, 1.0 - rip.mu).max(initial=0.0) <= cfg.epsilon
                   or J.max() == J.min())
        if change.max(initial=0.0) <= cfg.epsilon and (settled or not cfg.require_settled):
            converged = True
            break

    final = np.flatnonzero(rip.mu >= cfg.accept_threshold)
    model = fit_and_prune(source(final), y, cfg.fit, final)
    if not converged:
        log.info("class %s: RIPs still moving after %d iterations", class_index, cfg.max_iterations)
    return SelectionResult(model, trace, rip, converged, len(cache))
