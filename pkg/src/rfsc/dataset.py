"""Loading, [0,1] normalization, one-vs-rest recoding and stratified folds."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

BUNDLED = ("bupa", "ionosphere", "iris", "sonar", "wdbc", "wine")


class DataFormatError(ValueError):
    """Raised for malformed input rows; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class RawDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] | None = None
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"features must be a non-empty 2-d matrix, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError("labels must have one entry per sample")
        n_classes = int(y.max())
        if y.min() < 1 or set(np.unique(y)) != set(range(1, n_classes + 1)):
            raise ValueError("labels must cover 1..N_c contiguously")
        if self.feature_names is not None and len(self.feature_names) != x.shape[1]:
            raise ValueError("feature_names length does not match the number of features")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        if not self.class_names:
            object.__setattr__(self, "class_names", [str(c) for c in range(1, n_classes + 1)])

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max())

    def subset(self, index) -> "RawDataset":
        """Rows ``index`` of the dataset, keeping the class numbering intact."""
        index = np.asarray(index)
        return _unchecked(RawDataset, self.features[index], self.labels[index],
                          self.feature_names, self.class_names)


@dataclass(frozen=True)
class NormParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormParams":
        return cls(np.asarray(d["min"], dtype=float), np.asarray(d["max"], dtype=float))


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    norm_params: NormParams
    feature_names: list[str] | None = None
    class_names: list[str] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names) if self.class_names else int(self.labels.max())


@dataclass(frozen=True)
class BinaryTargets:
    class_index: int
    y: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    assignments: np.ndarray  # fold ids 1..n_folds

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train indices, test indices) for a 1-based fold id."""
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test


def _unchecked(cls, *args):
    # subsets of a valid dataset may miss classes; skip the coverage check
    obj = object.__new__(cls)
    for name, value in zip(("features", "labels", "feature_names", "class_names"), args):
        object.__setattr__(obj, name, value)
    return obj


def normalize(raw: RawDataset) -> Dataset:
    x = raw.features
    params = NormParams(x.min(axis=0), x.max(axis=0))
    span = params.maximum - params.minimum
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(span > 0, (x - params.minimum) / np.where(span > 0, span, 1.0), 0.0)
    return Dataset(u, raw.labels.copy(), params, raw.feature_names, list(raw.class_names))


def apply_normalization(raw_rows, norm_params: NormParams) -> np.ndarray:
    """Map raw rows (1-d or 2-d) through stored training min/max, clamped to [0, 1]."""
    x = np.asarray(raw_rows, dtype=float)
    n_features = norm_params.minimum.shape[0]
    if x.shape[-1] != n_features:
        raise ValueError(f"expected {n_features} features, got {x.shape[-1]}")
    span = norm_params.maximum - norm_params.minimum
    safe = np.where(span > 0, span, 1.0)
    u = np.where(span > 0, (x - norm_params.minimum) / safe, 0.0)
    return np.clip(u, 0.0, 1.0)


def recode(ds: Dataset, class_index: int) -> BinaryTargets:
    n_classes = ds.n_classes
    if not 1 <= class_index <= n_classes:
        raise ValueError(f"class_index {class_index} outside 1..{n_classes}")
    y = np.where(ds.labels == class_index, 1.0, -1.0)
    return BinaryTargets(class_index, y)


def modeled_classes(n_classes: int) -> list[int]:
    """Classes that get a binary model: only class 1 for two-class problems."""
    return [1] if n_classes == 2 else list(range(1, n_classes + 1))


def stratified_folds(labels, n_folds: int, seed: int | None = None) -> FoldPlan:
    """Shuffle each class, lay classes end to end and deal round-robin.

    Dealing a contiguous class block round-robin keeps per-class fold counts
    within one of each other; dealing the whole sequence keeps fold sizes
    within one as well.
    """
    labels = np.asarray(getattr(labels, "labels", labels))
    n = labels.shape[0]
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    if n_folds > n:
        raise ValueError(f"n_folds={n_folds} exceeds the number of samples {n}")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    # rotate the dealing start so fold 1 is not always the largest
    offset = int(rng.integers(n_folds))
    assignments = np.empty(n, dtype=int)
    assignments[order] = (np.arange(n) + offset) % n_folds + 1
    return FoldPlan(n_folds, assignments)


_SPLIT = re.compile(r"[,;\t ]+")


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_table(text: str, has_labels: bool = True, source: str = "<text>"):
    """Parse delimited numeric text into (matrix, label tokens, header)."""
    rows: list[list[str]] = []
    line_numbers: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("#", "@", "%")):
            continue
        rows.append([t for t in _SPLIT.split(stripped) if t])
        line_numbers.append(lineno)
    if not rows:
        raise DataFormatError(f"{source}: no data rows")

    n_numeric = len(rows[0]) - 1 if has_labels else len(rows[0])
    header = None
    if not all(_is_number(t) for t in rows[0][:max(n_numeric, 1)]):
        header = rows.pop(0)
        line_numbers.pop(0)
        if not rows:
            raise DataFormatError(f"{source}: header but no data rows")

    width = len(header) if header else len(rows[0])
    n_feat = width - 1 if has_labels else width
    if n_feat < 1:
        raise DataFormatError(f"{source}: need at least one feature column", line_numbers[0])
    values = np.empty((len(rows), n_feat))
    tokens: list[str] = []
    for i, (row, lineno) in enumerate(zip(rows, line_numbers)):
        if len(row) != width:
            raise DataFormatError(f"expected {width} fields, found {len(row)}", lineno)
        try:
            values[i] = [float(t) for t in row[:n_feat]]
        except ValueError as exc:
            raise DataFormatError(f"non-numeric feature value ({exc})", lineno) from None
        if not np.all(np.isfinite(values[i])):
            raise DataFormatError("missing or non-finite feature value", lineno)
        if has_labels:
            tokens.append(row[-1])
    return values, tokens, header


def labels_from_tokens(tokens: list[str], class_names: list[str] | None = None):
    """Map label tokens to 1..N_c in order of first appearance (or a given order)."""
    names = list(class_names) if class_names else []
    lookup = {name: i + 1 for i, name in enumerate(names)}
    out = np.empty(len(tokens), dtype=int)
    for k, tok in enumerate(tokens):
        if tok not in lookup:
            if class_names:
                raise ValueError(f"unknown class label {tok!r}")
            names.append(tok)
            lookup[tok] = len(names)
        out[k] = lookup[tok]
    return out, names


def load(path) -> RawDataset:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(text, source=str(path))


def loads(text: str, source: str = "<text>") -> RawDataset:
    values, tokens, header = parse_table(text, has_labels=True, source=source)
    labels, names = labels_from_tokens(tokens)
    feature_names = header[:-1] if header else None
    return RawDataset(values, labels, feature_names, names)


def load_bundled(name: str) -> RawDataset:
    """One of the UCI benchmark sets shipped with the package."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled dataset {name!r}; choose from {', '.join(BUNDLED)}")
    text = resources.files("rfsc").joinpath(f"data/{name}.csv").read_text()
    return loads(text, source=name)


def resolve(name_or_path: str) -> RawDataset:
    """A filesystem path, or a bundled dataset name when no such file exists."""
    if not Path(name_or_path).exists() and name_or_path in BUNDLED:
        return load_bundled(name_or_path)
    return load(name_or_path)
