"""Distance correlation filtering.

Each feature is tested on its own against a class's +/-1 target with the
distance-covariance independence test; features that fail to reject
independence are dropped before regressor enumeration for that class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

MAX_SAMPLES = 10_000  # N x N distance matrices beyond this are refused
_CLAMP = 1e-12


@dataclass(frozen=True)
class DcfResult:
    statistic: np.ndarray
    threshold: float
    kept: tuple[int, ...]
    alpha_d: float
    class_index: int | None = None

    @property
    def dropped(self) -> tuple[int, ...]:
        kept = set(self.kept)
        return tuple(p for p in range(len(self.statistic)) if p not in kept)

    def to_dict(self) -> dict:
        return {
            "class_index": self.class_index,
            "alpha_d": self.alpha_d,
            "threshold": self.threshold,
            "statistic": self.statistic.tolist(),
            "kept": list(self.kept),
        }


def _check(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if x.size < 2:
        raise ValueError("need at least two samples")
    if x.size > MAX_SAMPLES:
        raise ValueError(f"{x.size} samples exceed the O(N^2) limit of {MAX_SAMPLES}")
    return x, y


def _centered(v: np.ndarray) -> tuple[np.ndarray, float]:
    d = np.abs(v[:, None] - v[None, :])
    row = d.mean(axis=1)
    grand = row.mean()
    # distance matrices are symmetric: column means equal row means
    return d - row[:, None] - row[None, :] + grand, grand


def distance_covariance_sq(x, y) -> float:
    x, y = _check(x, y)
    a, _ = _centered(x)
    b, _ = _centered(y)
    value = float(np.mean(a * b))
    if -_CLAMP < value < 0.0:
        value = 0.0
    return value


def threshold(alpha_d: float) -> float:
    return float(norm.ppf(1.0 - alpha_d / 2.0) ** 2)


def _statistic(a, a_mean, b, b_mean, n) -> float:
    s = a_mean * b_mean
    if s <= 0.0:
        return 0.0
    v2 = float(np.mean(a * b))
    return n * max(v2, 0.0) / s


def independence_test(x, y, alpha_d: float = 0.05) -> tuple[float, bool]:
    """Return (N * dCov^2 / S, whether independence is rejected at ``alpha_d``).

    A constant vector gives S = 0; the test then does not reject.
    """
    if not 0.0 < alpha_d < 1.0:
        raise ValueError("alpha_d must lie in (0, 1)")
    x, y = _check(x, y)
    a, a_mean = _centered(x)
    b, b_mean = _centered(y)
    if a_mean * b_mean <= 0.0:
        return 0.0, False
    stat = _statistic(a, a_mean, b, b_mean, x.size)
    return stat, stat > threshold(alpha_d)


def filter_features(features, y, alpha_d: float = 0.05, class_index: int | None = None) -> DcfResult:
    """Screen every feature column of ``features`` against the target ``y``."""
    if not 0.0 < alpha_d < 1.0:
        raise ValueError("alpha_d must lie in (0, 1)")
    u = np.asarray(getattr(features, "features", features), dtype=float)
    y = np.asarray(getattr(y, "y", y), dtype=float)
    if u.ndim != 2 or u.shape[0] != y.shape[0]:
        raise ValueError("features must be (N, N_f) with N matching the target length")
    _check(u[:, 0], y)
    b, b_mean = _centered(y)
    n = u.shape[0]
    stats = np.empty(u.shape[1])
    for p in range(u.shape[1]):
        a, a_mean = _centered(u[:, p])
        stats[p] = _statistic(a, a_mean, b, b_mean, n)
    thr = threshold(alpha_d)
    kept = tuple(int(p) for p in np.flatnonzero(stats > thr))
    return DcfResult(stats, thr, kept, alpha_d, class_index)


def auto_enabled(n_features: int) -> bool:
    """Default policy: filter only medium/large feature sets."""
    return n_features > 15


def report_rows(result: DcfResult, names=None) -> list[dict]:
    kept = set(result.kept)
    return [
        {
            "class": result.class_index,
            "feature": p + 1,
            "name": names[p] if names else f"u{p + 1}",
            "statistic": float(s),
            "threshold": result.threshold,
            "kept": p in kept,
        }
        for p, s in enumerate(result.statistic)
    ]
