"""Monte Carlo bagging: train N base classifiers and tally test-set votes."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, draw_subsample
from .errors import ValidationError
from .learners import BaseLearnerSpec, fit


def classifier_seed(master_seed: int, o: int) -> np.random.SeedSequence:
    """Counter-based seed for classifier ``o``, independent of scheduling."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(o),))


@dataclass(eq=False)
class VoteTable:
    counts: np.ndarray  # (e, c) int64
    n: int
    k: int
    N: int
    c: int
    seed: int
    learner: str
    ids: list = field(default=None)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[1] != self.c:
            raise ValidationError(f"counts must have shape (e, {self.c})")
        if self.ids is None:
            self.ids = list(range(self.counts.shape[0]))
        if len(self.ids) != self.counts.shape[0]:
            raise ValidationError("one id per vote row is required")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("example ids must be unique")
        if np.any(self.counts < 0):
            raise ValidationError("vote counts must be non-negative")
        bad = np.nonzero(self.counts.sum(axis=1) != self.N)[0]
        if bad.size:
            raise ValidationError(f"counts for example {self.ids[bad[0]]} do not sum to N={self.N}")

    @property
    def e(self) -> int:
        return int(self.counts.shape[0])

    def __eq__(self, other):
        if not isinstance(other, VoteTable):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "N": self.N,
            "c": self.c,
            "seed": self.seed,
            "learner": self.learner,
            "examples": [{"id": i, "counts": row} for i, row in zip(self.ids, self.counts.tolist())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VoteTable":
        missing = {"n", "k", "N", "c", "seed", "learner", "examples"} - set(data)
        if missing:
            raise ValidationError(f"votes file is missing keys: {sorted(missing)}")
        examples = data["examples"]
        if not examples:
            raise ValidationError("votes file has no examples")
        try:
            counts = np.array([ex["counts"] for ex in examples], dtype=np.int64)
            ids = [ex["id"] for ex in examples]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed example entry: {exc}") from None
        for key in ("n", "k", "N", "c"):
            if not isinstance(data[key], int) or data[key] < 1:
                raise ValidationError(f"{key} must be a positive integer")
        return cls(counts, data["n"], data["k"], data["N"], data["c"], data["seed"], data["learner"], ids)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "VoteTable":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


def _one_classifier(dataset, spec, k, master_seed, o, X_test):
    sub = draw_subsample(dataset, k, classifier_seed(master_seed, o))
    return fit(spec, dataset, sub).predict_many(X_test)


def train_votes(
    dataset: Dataset,
    spec: BaseLearnerSpec,
    k: int,
    N: int,
    master_seed: int,
    testset: Dataset,
    workers: int = 1,
) -> VoteTable:
    """Train ``N`` classifiers on independent size-``k`` subsamples and count votes.

    All test examples are scored by the same ``N`` classifiers. The result does
    not depend on ``workers``.
    """
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if testset.d != dataset.d:
        raise ValidationError(f"test feature dimension {testset.d} != training dimension {dataset.d}")
    c = max(dataset.c, testset.c)
    X_test = testset.features
    counts = np.zeros((testset.n, c), dtype=np.int64)
    rows = np.arange(testset.n)

    def run(o):
        return _one_classifier(dataset, spec, k, master_seed, o, X_test)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for pred in pool.map(run, range(N)):
                np.add.at(counts, (rows, pred), 1)
    else:
        for o in range(N):
            np.add.at(counts, (rows, run(o)), 1)
    return VoteTable(counts, dataset.n, k, N, c, int(master_seed), spec.kind)
