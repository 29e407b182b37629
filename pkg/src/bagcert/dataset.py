"""Labelled datasets, file ingestion and with-replacement subsampling.

A :class:`Dataset` is an ordered, indexed sequence of examples. Duplicates are
allowed and counted with multiplicity, so the subsample space of size ``n**k``
(ordered ``k``-tuples of indices) is well defined.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import FormatError, ParseError, ValidationError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Example:
    features: tuple[float, ...]
    label: int

    def __post_init__(self):
        if self.label < 0:
            raise ValidationError(f"label must be non-negative, got {self.label}")
        if not all(math.isfinite(v) for v in self.features):
            raise ValidationError("features must be finite")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable labelled dataset.

    ``features`` is an ``(n, d)`` float64 array and ``labels`` an ``(n,)``
    integer array with every entry in ``[0, c)``.
    """

    features: np.ndarray
    labels: np.ndarray
    c: int

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, copy=True)
        labels = np.array(self.labels, copy=True)
        if features.ndim == 1:
            features = features.reshape(len(labels), -1) if len(labels) else features.reshape(0, 0)
        if features.ndim != 2:
            raise ValidationError("features must be a 2-d array")
        if labels.ndim != 1 or len(labels) != features.shape[0]:
            raise ValidationError("labels must be 1-d and match the number of feature rows")
        if len(labels) == 0:
            raise ValidationError("dataset must contain at least one example")
        if labels.dtype.kind not in "iu":
            if labels.dtype.kind == "f" and np.all(labels == np.floor(labels)):
                labels = labels.astype(np.int64)
            else:
                raise ValidationError("labels must be integers")
        labels = labels.astype(np.int64)
        if not np.all(np.isfinite(features)):
            raise ValidationError("features must be finite (no NaN or infinity)")
        if self.c < 1:
            raise ValidationError(f"c must be positive, got {self.c}")
        if labels.min() < 0 or labels.max() >= self.c:
            raise ValidationError(f"labels must lie in [0, {self.c})")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "c", int(self.c))

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Example:
        return Example(tuple(float(v) for v in self.features[i]), int(self.labels[i]))

    def __iter__(self) -> Iterator[Example]:
        for i in range(self.n):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.c == other.c
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    @classmethod
    def from_examples(cls, examples: Iterable[Example | tuple], c: int | None = None) -> "Dataset":
        rows = [ex if isinstance(ex, Example) else Example(tuple(ex[0]), int(ex[1])) for ex in examples]
        if not rows:
            raise ValidationError("dataset must contain at least one example")
        dims = {len(ex.features) for ex in rows}
        if len(dims) != 1:
            raise ValidationError("all examples must have the same feature dimension")
        labels = np.array([ex.label for ex in rows], dtype=np.int64)
        features = np.array([ex.features for ex in rows], dtype=np.float64).reshape(len(rows), dims.pop())
        if c is None:
            c = int(labels.max()) + 1
        return cls(features, labels, c)

    def take(self, indices: Sequence[int]) -> "Dataset":
        """Dataset made of the rows at ``indices`` (in order, with repeats)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.c)

    def with_classes(self, c: int) -> "Dataset":
        return Dataset(self.features, self.labels, c)


@dataclass(frozen=True)
class Subsample:
    """Ordered ``k``-tuple of dataset indices drawn with replacement."""

    indices: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.indices)

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if not self.indices:
            raise ValidationError("a subsample must contain at least one index")
        if min(self.indices) < 0:
            raise ValidationError("subsample indices must be non-negative")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_subsample(dataset: Dataset, k: int, seed) -> Subsample:
    """Draw ``k`` indices independently and uniformly from ``[0, n)``.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`
    (an int or a :class:`numpy.random.SeedSequence`); the result is a pure
    function of ``(n, k, seed)``.
    """
    if k < 1:
        raise ValidationError(f"subsample size k must be >= 1, got {k}")
    idx = _rng(seed).integers(0, dataset.n, size=k)
    return Subsample(tuple(idx.tolist()))


def load_csv(path: str | Path, c: int | None = None) -> Dataset:
    """Read a ``label,f0,f1,...`` CSV file.

    ``c`` defaults to one more than the largest observed label.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if not header or header[0].strip() != "label":
            raise ParseError("header must start with 'label'", line=1)
        d = len(header) - 1
        labels: list[int] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != d + 1:
                raise ParseError(f"expected {d + 1} fields, got {len(row)}", line=lineno)
            raw_label = row[0].strip()
            try:
                label = int(raw_label)
            except ValueError:
                raise ValidationError(f"line {lineno}: label {raw_label!r} is not an integer") from None
            if label < 0:
                raise ValidationError(f"line {lineno}: label {label} is negative")
            try:
                feats = [float(cell) for cell in row[1:]]
            except ValueError as exc:
                raise ParseError(f"bad feature value ({exc})", line=lineno) from None
            if not all(math.isfinite(v) for v in feats):
                raise ParseError("non-finite feature value", line=lineno)
            labels.append(label)
            rows.append(feats)
    if not labels:
        raise ValidationError(f"{path}: no examples")
    lab = np.array(labels, dtype=np.int64)
    if c is None:
        c = int(lab.max()) + 1
    return Dataset(np.array(rows, dtype=np.float64).reshape(len(rows), d), lab, c)


def save_csv(dataset: Dataset, path: str | Path) -> None:
    """Write ``dataset`` so that :func:`load_csv` reproduces it exactly."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + [f"f{i}" for i in range(dataset.d)])
        for label, row in zip(dataset.labels.tolist(), dataset.features.tolist()):
            writer.writerow([label] + [repr(v) for v in row])


def _read_idx(path: Path, magic: int, ndim: int) -> np.ndarray:
    raw = path.read_bytes()
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise FormatError(f"{path}: truncated IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: magic {found:#010x}, expected {magic:#010x}")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header_len])
    size = int(np.prod(dims))
    body = raw[header_len:]
    if len(body) != size:
        raise FormatError(f"{path}: expected {size} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_idx(images_path: str | Path, labels_path: str | Path, c: int = 10) -> Dataset:
    """Read an MNIST-style IDX image/label pair; pixels are scaled to [0, 1]."""
    images = _read_idx(Path(images_path), IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(Path(labels_path), IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"image count {images.shape[0]} != label count {labels.shape[0]}")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64), c)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path: str | Path, labels_path: str | Path) -> None:
    """Write uint8 ``images`` (n, rows, cols) and ``labels`` (n,) as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]) + labels.tobytes())


def make_blobs(n: int, c: int, d: int = 2, spread: float = 1.0, seed=0, separation: float = 3.0) -> Dataset:
    """Isotropic Gaussian clusters around evenly spaced centres on a circle.

    Used by the synthetic end-to-end experiments; deterministic given ``seed``.
    """
    rng = _rng(seed)
    angles = 2 * np.pi * np.arange(c) / c
    centres = np.zeros((c, d))
    centres[:, 0] = separation * np.cos(angles)
    if d > 1:
        centres[:, 1] = separation * np.sin(angles)
    labels = rng.integers(0, c, size=n)
    features = centres[labels] + spread * rng.standard_normal((n, d))
    return Dataset(features, labels, c)
