"""Built-in base learners.

Every learner is deterministic: the fitted state depends only on the spec and
the multiset of selected examples. Score ties resolve to the smallest label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import Dataset, Subsample
from .errors import ValidationError

_ALIASES = {
    "centroid": "centroid",
    "nearest-centroid": "centroid",
    "nb": "nb",
    "multinomial-naive-bayes": "nb",
    "majority": "majority",
    "majority-label": "majority",
}


@dataclass(frozen=True)
class BaseLearnerSpec:
    kind: str = "centroid"
    smoothing: float = 1.0
    learner_seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in _ALIASES:
            raise ValidationError(f"unknown learner kind {self.kind!r}; expected one of {sorted(set(_ALIASES))}")
        object.__setattr__(self, "kind", _ALIASES[self.kind])
        if not self.smoothing >= 0:
            raise ValidationError(f"smoothing must be non-negative, got {self.smoothing}")

    @property
    def randomized(self) -> bool:
        # none of the built-in learners consume learner_seed
        return False


class FittedClassifier:
    """Base class for fitted learners; subclasses implement ``_scores``."""

    classes: np.ndarray
    d: int

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.d:
            raise ValidationError(f"expected {self.d} features, got {X.shape[1]}")
        return X

    def predict(self, x) -> int:
        return int(self.predict_many(x)[0])

    def predict_many(self, X) -> np.ndarray:
        X = self._check(X)
        # classes is sorted ascending, so argmax picks the smallest tied label
        return self.classes[np.argmax(self._scores(X), axis=1)]

    def _scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class MajorityLabelClassifier(FittedClassifier):
    def __init__(self, label: int, d: int):
        self.label = int(label)
        self.classes = np.array([self.label])
        self.d = d

    def _scores(self, X):
        return np.zeros((X.shape[0], 1))


class NearestCentroidClassifier(FittedClassifier):
    def __init__(self, classes: np.ndarray, centroids: np.ndarray):
        self.classes = classes
        self.centroids = centroids
        self.d = centroids.shape[1]

    def _scores(self, X):
        diff = X[:, None, :] - self.centroids[None, :, :]
        return -np.einsum("eij,eij->ei", diff, diff)


class MultinomialNBClassifier(FittedClassifier):
    def __init__(self, classes: np.ndarray, class_log_prior: np.ndarray, feature_log_prob: np.ndarray):
        self.classes = classes
        self.class_log_prior = class_log_prior
        self.feature_log_prob = feature_log_prob
        self.d = feature_log_prob.shape[1]

    def _scores(self, X):
        finite = np.isfinite(self.feature_log_prob)
        logp = np.where(finite, self.feature_log_prob, 0.0)
        scores = X @ logp.T + self.class_log_prior
        # a positive feature with zero likelihood rules the class out
        impossible = (X > 0).astype(np.float64) @ (~finite).astype(np.float64).T > 0
        scores[impossible] = -np.inf
        return scores


def fit(spec: BaseLearnerSpec, dataset: Dataset, subsample: Subsample) -> FittedClassifier:
    """Train ``spec`` on the examples selected by ``subsample``."""
    idx = np.sort(np.asarray(subsample.indices, dtype=np.int64))
    if idx.max() >= dataset.n:
        raise ValidationError(f"subsample index {idx.max()} out of range for n={dataset.n}")
    labels = dataset.labels[idx]
    if labels.max() >= dataset.c:
        raise ValidationError(f"subsample references label {labels.max()} >= c={dataset.c}")
    classes, counts = np.unique(labels, return_counts=True)

    if spec.kind == "majority":
        return MajorityLabelClassifier(classes[np.argmax(counts)], dataset.d)

    X = dataset.features[idx]
    if spec.kind == "centroid":
        centroids = np.stack([X[labels == cls].mean(axis=0) for cls in classes])
        return NearestCentroidClassifier(classes, centroids)

    if np.any(X < 0):
        raise ValidationError("multinomial naive Bayes requires non-negative features")
    feature_count = np.stack([X[labels == cls].sum(axis=0) for cls in classes])
    alpha = spec.smoothing
    totals = feature_count.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        feature_log_prob = np.log(feature_count + alpha) - np.log(totals + alpha * X.shape[1])
    feature_log_prob = np.where(np.isnan(feature_log_prob), -np.inf, feature_log_prob)
    class_log_prior = np.log(counts / counts.sum())
    return MultinomialNBClassifier(classes, class_log_prior, feature_log_prob)


def predict(classifier: FittedClassifier, x) -> int:
    return classifier.predict(x)
