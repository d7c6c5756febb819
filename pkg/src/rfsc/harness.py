"""Stratified k-fold evaluation with repeated selection runs per fold."""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dcf
from .classifier import ClassModel, Classifier, decide
from .dataset import RawDataset, modeled_classes, normalize, recode, stratified_folds
from .features import DesignSource, enumerate_regressors
from .metrics import accuracy, confusion_matrix, kappa
from .selection import RfscConfig, SelectionResult, select

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    rfsc: RfscConfig = field(default_factory=RfscConfig)
    max_degree: int = 2
    dcf: str = "auto"  # "on", "off" or "auto"
    alpha_d: float = 0.05

    def __post_init__(self):
        if self.dcf not in ("on", "off", "auto"):
            raise ValueError("dcf must be 'on', 'off' or 'auto'")
        if self.max_degree < 0:
            raise ValueError("max_degree must be >= 0")

    def dcf_active(self, n_features: int) -> bool:
        if self.dcf == "auto":
            return dcf.auto_enabled(n_features)
        return self.dcf == "on"


def derive_seed(*parts: int) -> int:
    """Deterministic 32-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def rank_key(result: SelectionResult):
    """Best run first: highest training J, then fewer regressors, then lower loss."""
    m = result.model
    return (-m.J, m.size, m.loss)


@dataclass
class ClassPlan:
    class_index: int
    y: np.ndarray
    kept: tuple[int, ...]
    regressors: object
    screen: dcf.DcfResult | None


def plan_classes(train, cfg: TrainConfig) -> list[ClassPlan]:
    """Per-class targets, optional DCF screening and regressor enumeration."""
    plans = []
    use_dcf = cfg.dcf_active(train.n_features)
    for c in modeled_classes(train.n_classes):
        y = recode(train, c).y
        screen = None
        kept = tuple(range(train.n_features))
        if use_dcf:
            screen = dcf.filter_features(train.features, y, cfg.alpha_d, class_index=c)
            kept = screen.kept
        rs = enumerate_regressors(train.n_features, cfg.max_degree, keep=kept)
        plans.append(ClassPlan(c, y, kept, rs, screen))
    return plans


def _run_selection(args) -> SelectionResult:
    u, y, rs, rcfg, c = args
    return select(y, rs, DesignSource(rs, u), rcfg, class_index=c)


def _map(fn, tasks, jobs: int):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


@dataclass
class TrainResult:
    classifier: Classifier
    runs: dict[int, list[SelectionResult]]
    best: dict[int, int]
    plans: list[ClassPlan]


def train(raw: RawDataset, cfg: TrainConfig = TrainConfig(), seed: int = 0, n_repeats: int = 1,
          jobs: int = 1, seed_prefix: tuple[int, ...] = ()) -> TrainResult:
    """Fit a one-vs-rest classifier, keeping the best of ``n_repeats`` runs per class."""
    ds = normalize(raw)
    plans = plan_classes(ds, cfg)
    tasks = []
    for plan in plans:
        for r in range(n_repeats):
            run_seed = derive_seed(seed, *seed_prefix, r, plan.class_index)
            tasks.append((ds.features, plan.y, plan.regressors, replace(cfg.rfsc, seed=run_seed),
                          plan.class_index))
    results = _map(_run_selection, tasks, jobs)
    runs, best, models = {}, {}, []
    for i, plan in enumerate(plans):
        mine = results[i * n_repeats:(i + 1) * n_repeats]
        k = min(range(n_repeats), key=lambda r: rank_key(mine[r]))
        runs[plan.class_index], best[plan.class_index] = mine, k
        models.append(ClassModel(plan.class_index, plan.kept, plan.regressors, mine[k].model))
    metadata = {
        "seed": seed,
        "n_repeats": n_repeats,
        "best_run": {str(c): r for c, r in best.items()},
        "config": config_dict(cfg),
    }
    names = tuple(raw.feature_names) if raw.feature_names else None
    clf = Classifier(tuple(models), ds.norm_params, tuple(raw.class_names), names, metadata)
    return TrainResult(clf, runs, best, plans)


def config_dict(cfg: TrainConfig) -> dict:
    r = cfg.rfsc
    return {
        "max_degree": cfg.max_degree,
        "dcf": cfg.dcf,
        "alpha_d": cfg.alpha_d,
        "population": r.n_population,
        "iterations": r.max_iterations,
        "epsilon": r.epsilon,
        "mu_init": r.mu_init,
        "accept_threshold": r.accept_threshold,
        "alpha": r.fit.alpha,
        "max_newton_iters": r.fit.max_newton_iters,
        "grad_tol": r.fit.grad_tol,
        "ridge": r.fit.ridge,
        "dispersion": r.fit.dispersion,
        "iterate_pruning": r.fit.iterate_pruning,
        "membership": r.membership,
    }


@dataclass(frozen=True)
class FoldResult:
    fold: int
    best_runs: dict[int, int]
    accuracy: float
    kappa: float
    n_attributes: int
    n_regressors: int
    train_accuracy: float
    wall_time: float = field(default=0.0, compare=False)
    n_dcf_kept: float | None = None


@dataclass
class CvReport:
    folds: list[FoldResult]
    dataset: str = ""
    seed: int = 0
    classifiers: list[Classifier] = field(default_factory=list, repr=False, compare=False)

    def _mean(self, attr: str) -> float:
        return float(np.mean([getattr(f, attr) for f in self.folds]))

    @property
    def J_a(self) -> float:
        return self._mean("accuracy")

    @property
    def K_a(self) -> float:
        return self._mean("kappa")

    @property
    def n_a(self) -> float:
        return self._mean("n_attributes")

    @property
    def n_r(self) -> float:
        return self._mean("n_regressors")

    @property
    def n_models(self) -> int:
        return sum(len(c.models) for c in self.classifiers)

    COLUMNS = ("fold", "best_runs", "accuracy", "kappa", "n_attributes", "n_regressors",
               "train_accuracy", "dcf_kept")

    def rows(self) -> list[tuple]:
        out = []
        for f in self.folds:
            runs = " ".join(f"{c}:{r}" for c, r in sorted(f.best_runs.items()))
            kept = "" if f.n_dcf_kept is None else f"{f.n_dcf_kept:.1f}"
            out.append((f.fold, runs, f"{f.accuracy:.6f}", f"{f.kappa:.6f}", f.n_attributes,
                        f.n_regressors, f"{f.train_accuracy:.6f}", kept))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        w.writerows(self.rows())
        w.writerow(("mean", "", f"{self.J_a:.6f}", f"{self.K_a:.6f}", f"{self.n_a:.2f}",
                    f"{self.n_r:.2f}", f"{self._mean('train_accuracy'):.6f}", ""))
        return buf.getvalue()

    def to_table(self) -> str:
        head = f"{'fold':>4}  {'acc':>7}  {'kappa':>7}  {'n_a':>4}  {'n_r':>4}  best runs"
        lines = [f"dataset: {self.dataset}  seed: {self.seed}", head]
        for f, row in zip(self.folds, self.rows()):
            lines.append(f"{f.fold:>4}  {f.accuracy:7.4f}  {f.kappa:7.4f}  {f.n_attributes:>4}  "
                         f"{f.n_regressors:>4}  {row[1]}")
        lines.append(f"J_a = {self.J_a:.4f}  K_a = {self.K_a:.4f}  n_a = {self.n_a:.1f}  "
                     f"n_r = {self.n_r:.1f}")
        return "\n".join(lines) + "\n"

    def timings_csv(self) -> str:
        return "fold,wall_time_s\n" + "".join(f"{f.fold},{f.wall_time:.3f}\n" for f in self.folds)


def evaluate(clf: Classifier, raw: RawDataset) -> tuple[float, float, np.ndarray]:
    pred = decide(clf.scores(raw.features), clf.n_classes)
    cm = confusion_matrix(pred, raw.labels, clf.n_classes)
    return accuracy(cm), kappa(cm), cm


def run_cv(raw: RawDataset, cfg: TrainConfig = TrainConfig(), n_folds: int = 10,
           n_repeats: int = 10, master_seed: int = 0, jobs: int = 1, name: str = "",
           folds=None) -> CvReport:
    """k-fold CV; each training split gets its own normalization, DCF and selection runs."""
    from .classifier import model_size_report

    plan = folds if folds is not None else stratified_folds(raw.labels, n_folds, master_seed)
    results, classifiers = [], []
    for fold in range(1, plan.n_folds + 1):
        t0 = time.perf_counter()
        train_idx, test_idx = plan.split(fold)
        train_raw, test_raw = raw.subset(train_idx), raw.subset(test_idx)
        try:
            tr = train(train_raw, cfg, master_seed, n_repeats, jobs, seed_prefix=(fold,))
            acc, kap, _ = evaluate(tr.classifier, test_raw)
            train_acc, _, _ = evaluate(tr.classifier, train_raw)
        except Exception as exc:
            raise RuntimeError(f"fold {fold}: {exc}") from exc
        n_a, n_r = model_size_report(tr.classifier)
        kept = [len(p.kept) for p in tr.plans if p.screen is not None]
        results.append(FoldResult(fold, tr.best, acc, kap, n_a, n_r, train_acc,
                                  time.perf_counter() - t0,
                                  float(np.mean(kept)) if kept else None))
        classifiers.append(tr.classifier)
        log.info("fold %d: accuracy %.4f kappa %.4f n_r %d", fold, acc, kap, n_r)
    return CvReport(results, name, master_seed, classifiers)
