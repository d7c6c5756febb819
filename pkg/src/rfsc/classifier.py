"""One-vs-rest assembly of per-class binary models, prediction and explanation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import NormParams, apply_normalization
from .estimator import FittedModel
from .features import RegressorSet, evaluate_subset

FORMAT = "rfsc-model/1"


@dataclass(frozen=True)
class ClassModel:
    class_index: int
    kept_features: tuple[int, ...]
    regressors: RegressorSet
    model: FittedModel

    def monomials(self) -> list[tuple[int, ...]]:
        return [self.regressors.monomials[j] for j in self.model.selected]

    def score(self, u: np.ndarray) -> np.ndarray:
        if not self.model.selected:
            return np.full(u.shape[0], self.model.bias)
        return evaluate_subset(self.regressors, self.model.selected, u) @ self.model.theta


@dataclass(frozen=True)
class Explanation:
    y_plus: float
    y_minus: float
    delta: float
    supporting: list[tuple[str, float]]

    @property
    def score(self) -> float:
        return self.y_plus - self.y_minus


@dataclass(frozen=True)
class Classifier:
    models: tuple[ClassModel, ...]
    norm_params: NormParams
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...] | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n_classes = len(self.class_names)
        expected = [1] if n_classes == 2 else list(range(1, n_classes + 1))
        if [m.class_index for m in self.models] != expected:
            raise ValueError(f"expected class models {expected}")
        for m in self.models:
            if any(not 0 <= j < len(m.regressors) for j in m.model.selected):
                raise ValueError(f"class {m.class_index}: regressor index out of range")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_features(self) -> int:
        return self.norm_params.minimum.shape[0]

    def normalized(self, raw_rows) -> np.ndarray:
        return np.atleast_2d(apply_normalization(raw_rows, self.norm_params))

    def scores(self, raw_rows) -> np.ndarray:
        """(N, number of class models) matrix of model outputs."""
        u = self.normalized(raw_rows)
        return np.column_stack([m.score(u) for m in self.models])

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "class_names": list(self.class_names),
            "feature_names": list(self.feature_names) if self.feature_names else None,
            "norm_params": self.norm_params.to_dict(),
            "models": [
                {
                    "class_index": m.class_index,
                    "kept_features": [int(p) for p in m.kept_features],
                    "max_degree": m.regressors.max_degree,
                    "monomials": m.regressors.to_list(),
                    "terms": [render_term(mono, self.feature_names) for mono in m.monomials()],
                    "fit": m.model.to_dict(),
                }
                for m in self.models
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Classifier":
        if d.get("format") != FORMAT:
            raise ValueError(f"not an {FORMAT} document")
        norm = NormParams.from_dict(d["norm_params"])
        n_features = norm.minimum.shape[0]
        models = tuple(
            ClassModel(
                int(m["class_index"]),
                tuple(m["kept_features"]),
                RegressorSet.from_list(m["monomials"], n_features, int(m["max_degree"])),
                FittedModel.from_dict(m["fit"]),
            )
            for m in d["models"]
        )
        names = tuple(d["feature_names"]) if d.get("feature_names") else None
        return cls(models, norm, tuple(d["class_names"]), names, d.get("metadata", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Classifier":
        return cls.from_dict(json.loads(Path(path).read_text()))


def render_term(monomial, names=None) -> str:
    if not monomial:
        return "1"
    return "*".join(names[p] if names else f"u{p + 1}" for p in monomial)


def decide(scores: np.ndarray, n_classes: int) -> np.ndarray:
    """Class ids from model outputs; ties go to the lowest class id."""
    scores = np.atleast_2d(scores)
    if n_classes == 2:
        # yhat == 0 is not a confident "class 1"
        return np.where(scores[:, 0] > 0.0, 1, 2)
    return np.argmax(scores, axis=1) + 1


def predict(clf: Classifier, raw_rows):
    """Predicted class ids and per-class scores; a 1-d row gives scalar output."""
    raw = np.asarray(raw_rows, dtype=float)
    if raw.shape[-1] != clf.n_features:
        raise ValueError(f"expected {clf.n_features} features, got {raw.shape[-1]}")
    scores = clf.scores(raw)
    classes = decide(scores, clf.n_classes)
    if raw.ndim == 1:
        return int(classes[0]), scores[0]
    return classes, scores


def explain(clf: Classifier, raw_row, class_index: int) -> Explanation:
    """Split one class's output into positive- and negative-coefficient parts.

    For two-class problems class 2 is explained through the negated class-1
    model.
    """
    raw = np.asarray(raw_row, dtype=float)
    if raw.ndim != 1:
        raise ValueError("explain takes a single sample")
    sign = 1.0
    if clf.n_classes == 2 and class_index == 2:
        sign, class_index = -1.0, 1
    try:
        cm = next(m for m in clf.models if m.class_index == class_index)
    except StopIteration:
        raise ValueError(f"no model for class {class_index}") from None
    u = clf.normalized(raw)
    if not cm.model.selected:
        base = sign * cm.model.bias
        plus, minus = max(base, 0.0), max(-base, 0.0)
        return Explanation(plus, minus, _delta(plus, minus), [("<empty>", base)])
    phi = evaluate_subset(cm.regressors, cm.model.selected, u)[0]
    contrib = sign * cm.model.theta * phi
    plus = float(contrib[contrib > 0].sum())
    minus = float(-contrib[contrib < 0].sum())
    terms = [render_term(mono, clf.feature_names) for mono in cm.monomials()]
    return Explanation(plus, minus, _delta(plus, minus), list(zip(terms, contrib.tolist())))


def _delta(plus: float, minus: float) -> float:
    top = max(plus, minus)
    return (plus - minus) / top if top > 0 else 0.0


def model_size_report(clf: Classifier) -> tuple[int, int]:
    """(distinct original features used, distinct regressors) over all class models."""
    monomials = {mono for m in clf.models for mono in m.monomials()}
    features = {p for mono in monomials for p in mono}
    return len(features), len(monomials)
