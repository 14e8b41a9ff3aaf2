"""Dataset ingestion and bitstring encodings (UCR time series, Iris)."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .qnn import LabeledDataset


class DataError(ValueError):
    """Malformed or unsupported input data."""


@dataclass(frozen=True)
class BowConfig:
    window_size: int = 15
    word_size: int = 2
    n_bins: int = 2
    truncate_to_first_half: bool = True

    def __post_init__(self):
        if self.window_size < 1 or self.word_size < 1:
            raise ValueError("window and word sizes must be positive")
        if self.word_size > self.window_size:
            raise ValueError(f"word size {self.word_size} exceeds window size {self.window_size}")
        if self.n_bins != 2:
            raise ValueError("only binary alphabets (n_bins=2) are supported")


@dataclass(frozen=True)
class RawSeries:
    label: int
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("empty series")


def data_path(name):
    """Path to a bundled data file (``iris.csv``, ``GunPoint_TRAIN.tsv``, ...)."""
    return Path(str(resources.files("qsmooth").joinpath("data", name)))


def load_ucr(path):
    """Read a UCR file: one series per line, label first, tab- or comma-separated.

    Raw labels are remapped to 0/1 by sorted order.
    """
    path = Path(path)
    raw = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            sep = "\t" if "\t" in line else ","
            fields = [f for f in line.split(sep) if f.strip()]
            try:
                label = float(fields[0])
                values = np.array([float(f) for f in fields[1:]])
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: cannot parse line ({exc})") from None
            if values.size == 0:
                raise DataError(f"{path}:{lineno}: no values after the label")
            raw.append((label, values))
    if not raw:
        raise DataError(f"{path}: no series found")
    classes = sorted({label for label, _ in raw})
    if len(classes) > 2:
        raise DataError(f"{path}: {len(classes)} classes found, expected at most 2")
    remap = {c: i for i, c in enumerate(classes)}
    return [RawSeries(remap[label], values) for label, values in raw]


def _segments(length, parts):
    """Sizes of ``parts`` contiguous segments, differing by at most one, longer first."""
    base, extra = divmod(length, parts)
    return [base + 1] * extra + [base] * (parts - extra)


def bow_transform(series, config=BowConfig()):
    """Binary Bag-of-Words word sequence of one series.

    Optionally keep the first half, cut non-overlapping windows (a trailing
    partial window is dropped), z-normalise each window, average ``word_size``
    contiguous segments and emit 1 for a positive segment mean.
    """
    values = np.asarray(series.values if isinstance(series, RawSeries) else series, dtype=float)
    if config.truncate_to_first_half:
        values = values[: len(values) // 2]
    n_windows = len(values) // config.window_size
    if n_windows == 0:
        raise DataError(f"series of effective length {len(values)} is shorter than "
                        f"one window of {config.window_size}")
    sizes = _segments(config.window_size, config.word_size)
    edges = np.cumsum([0] + sizes)
    bits = []
    for w in range(n_windows):
        window = values[w * config.window_size:(w + 1) * config.window_size]
        std = window.std()
        z = (window - window.mean()) / std if std > 0 else np.zeros_like(window)
        for lo, hi in zip(edges[:-1], edges[1:]):
            bits.append(int(z[lo:hi].mean() > 0))
    return tuple(bits)


def bow_dataset(series_list, config=BowConfig()):
    return LabeledDataset([bow_transform(s, config) for s in series_list],
                          [s.label for s in series_list])


def load_gunpoint(split="train", config=BowConfig(), path=None):
    path = data_path(f"GunPoint_{split.upper()}.tsv") if path is None else path
    return bow_dataset(load_ucr(path), config)


# -- Iris -----------------------------------------------------------------------

# versicolor rows are dropped
_SPECIES = {"setosa": 1, "virginica": 0, "versicolor": -1}


def load_iris_table(path=None):
    """Read the 5-column Iris CSV into (features[150, 4], species names)."""
    path = data_path("iris.csv") if path is None else Path(path)
    feats, names = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values = [float(v) for v in row[:4]]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: non-numeric feature") from None
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            feats.append(values)
            names.append(row[4].strip().lower().removeprefix("iris-"))
    if not feats:
        raise DataError(f"{path}: no rows")
    unknown = set(names) - set(_SPECIES)
    if unknown:
        raise DataError(f"{path}: unknown species {sorted(unknown)}")
    return np.array(feats), names


def iris_binarize(features, species, seed, train_fraction=0.6):
    """Setosa (1) vs virginica (0) on 3 median-thresholded features.

    Versicolor rows and the petal-width column are dropped, each sample is
    scaled to unit Euclidean norm, a seeded stratified split is made, and each
    feature is binarised against its training-split median (bit = value > median).
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != 4 or len(species) != features.shape[0]:
        raise DataError("expected a (rows, 4) feature table with one species name per row")
    try:
        labels = np.array([_SPECIES[s] for s in species])
    except KeyError as exc:
        raise DataError(f"unknown species name {exc}") from None
    keep = labels >= 0
    feats = features[keep][:, :3]
    labels = labels[keep]
    feats = feats / np.linalg.norm(feats, axis=1, keepdims=True)

    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        cut = int(round(train_fraction * len(idx)))
        train_idx.extend(idx[:cut])
        test_idx.extend(idx[cut:])
    train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)

    medians = np.median(feats[train_idx], axis=0)
    bits = (feats > medians).astype(np.uint8)
    return (LabeledDataset(bits[train_idx], labels[train_idx]),
            LabeledDataset(bits[test_idx], labels[test_idx]))


def load_iris(seed=0, path=None):
    return iris_binarize(*load_iris_table(path), seed=seed)
