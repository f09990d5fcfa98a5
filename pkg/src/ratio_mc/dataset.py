"""Labeled two-sample datasets: construction, CSV persistence, splitting.

Label 1 marks draws from the target distribution, label 0 draws from the
instrumental one.  The CSV schema is ``x0,...,x{d-1},label`` with floats
serialized to 17 significant digits so a round-trip is bit-exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ParseError, TooFewSamples
from .rng import RngStream
from .validation import check_labels, check_points

_FLOAT_FMT = "%.17g"


class LabeledDataset:
    """Immutable collection of points with binary labels."""

    def __init__(self, points, labels):
        self.points = check_points(points, name="points")
        self.labels = check_labels(labels, n=self.points.shape[0])
        self.points.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.labels))

    @property
    def n0(self) -> int:
        return self.n - self.n1

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.points[idx], self.labels[idx])

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.labels, other.labels
        )

    def __repr__(self):
        return f"LabeledDataset(n1={self.n1}, n0={self.n0}, dim={self.dim})"


@dataclass
class DatasetSplit:
    train: LabeledDataset
    validation: LabeledDataset
    split_fraction: float


def from_samples(x1, x0, rng: RngStream) -> LabeledDataset:
    """Assemble a dataset from pre-drawn target (label 1) and instrumental
    (label 0) samples, shuffled deterministically by ``rng``."""
    x1 = check_points(x1, name="x1")
    x0 = check_points(x0, name="x0")
    if x1.shape[1] != x0.shape[1]:
        raise DimensionMismatch(
            f"target dim {x1.shape[1]} != instrumental dim {x0.shape[1]}"
        )
    points = np.vstack([x1, x0])
    labels = np.concatenate(
        [np.ones(x1.shape[0], dtype=np.int8), np.zeros(x0.shape[0], dtype=np.int8)]
    )
    perm = rng.permutation(points.shape[0])
    return LabeledDataset(points[perm], labels[perm])


def build_dataset(p1, p0, n1: int, n0: int, rng: RngStream) -> LabeledDataset:
    """Draw n1 target and n0 instrumental samples and shuffle them together.

    Draw order is fixed: target first, then instrumental, then the shuffle
    permutation, all from the one stream.
    """
    if n1 < 1 or n0 < 1:
        raise ValueError("n1 and n0 must be >= 1")
    x1 = p1.sample(n1, rng)
    x0 = p0.sample(n0, rng)
    return from_samples(x1, x0, rng)


def save_csv(ds: LabeledDataset, path) -> None:
    header = ",".join([f"x{i}" for i in range(ds.dim)] + ["label"])
    lines = [header]
    for row, label in zip(ds.points, ds.labels):
        lines.append(",".join(_FLOAT_FMT % v for v in row) + f",{int(label)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


_HEADER_RE = re.compile(r"^x0(?:,x\d+)*,label$")


def load_csv(path) -> LabeledDataset:
    with open(path, "r") as fh:
        header = fh.readline().rstrip("\n")
        if not _HEADER_RE.match(header):
            raise ParseError(f"bad header {header!r}, expected x0,...,label", line=1)
        cols = header.split(",")
        dim = len(cols) - 1
        for i, name in enumerate(cols[:-1]):
            if name != f"x{i}":
                raise ParseError(f"bad header column {name!r}, expected x{i}", line=1)
        points, labels = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != dim + 1:
                raise DimensionMismatch(
                    f"line {lineno}: expected {dim + 1} fields, got {len(fields)}"
                )
            try:
                row = [float(v) for v in fields[:-1]]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if fields[-1] not in ("0", "1"):
                raise ParseError(f"label must be 0 or 1, got {fields[-1]!r}", line=lineno)
            points.append(row)
            labels.append(int(fields[-1]))
    if not points:
        return LabeledDataset(np.empty((0, dim)), np.empty(0, dtype=np.int8))
    return LabeledDataset(np.asarray(points), np.asarray(labels, dtype=np.int8))


def stratified_split(ds: LabeledDataset, fraction: float, rng: RngStream) -> DatasetSplit:
    """Split per class with floor(fraction * n_class) points going to train.

    Requires at least 2 points per class, and the floor rule must leave both
    sides of each class nonempty.  Class 0 is permuted before class 1.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    train_idx, val_idx = [], []
    for label in (0, 1):
        cls = np.flatnonzero(ds.labels == label)
        if cls.size < 2:
            raise TooFewSamples(f"class {label} has {cls.size} point(s); need >= 2")
        k = int(np.floor(fraction * cls.size))
        if k == 0 or k == cls.size:
            raise TooFewSamples(
                f"class {label}: fraction {fraction} leaves an empty side "
                f"({k} of {cls.size} to train)"
            )
        perm = rng.permutation(cls.size)
        train_idx.append(cls[perm[:k]])
        val_idx.append(cls[perm[k:]])
    train = ds.subset(np.concatenate(train_idx))
    val = ds.subset(np.concatenate(val_idx))
    return DatasetSplit(train=train, validation=val, split_fraction=float(fraction))
