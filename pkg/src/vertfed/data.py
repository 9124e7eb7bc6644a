"""Dataset ingestion, binarization, normalization and vertical partitioning."""

import csv
from dataclasses import dataclass

import numpy as np

from vertfed.party import PartyShard


class IngestError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray  # rows x raw features, min-max normalized to [0, 1]
    y: np.ndarray  # 0/1 labels
    ids: list  # identifier strings, or None
    feature_names: list


def _binarize(raw_labels, positive_label=None):
    values = sorted(set(raw_labels))
    if positive_label is None:
        positive_label = values[0]  # "first class vs rest"
    else:
        positive_label = str(positive_label)
        if positive_label not in values:
            raise IngestError(f"positive label {positive_label!r} not present")
    return np.array([1.0 if v == positive_label else 0.0 for v in raw_labels])


def _normalize(X):
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (X - lo) / span


def ingest_csv(path, label_column, id_column=None, feature_columns=None, positive_label=None):
    """Parse a headered CSV into a normalized, binarized dataset."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if row]
    if not rows:
        raise IngestError(f"{path}: no data rows")
    if label_column not in header:
        raise IngestError(f"missing label column {label_column!r}")
    if id_column is not None and id_column not in header:
        raise IngestError(f"missing identifier column {id_column!r}")
    if feature_columns is None:
        feature_columns = [c for c in header if c not in (label_column, id_column)]
    for c in feature_columns:
        if c not in header:
            raise IngestError(f"missing feature column {c!r}")
    col = {name: i for i, name in enumerate(header)}
    feats = []
    labels = []
    ids = [] if id_column is not None else None
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            feats.append([float(row[col[c]]) for c in feature_columns])
        except ValueError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from None
        labels.append(row[col[label_column]].strip())
        if ids is not None:
            ids.append(row[col[id_column]].strip())
    X = _normalize(np.asarray(feats, dtype=np.float64))
    y = _binarize(labels, positive_label)
    return Dataset(X=X, y=y, ids=ids, feature_names=list(feature_columns))


def train_test_split(ds, train_count, test_count, seed=0):
    n = ds.X.shape[0]
    if train_count + test_count > n:
        raise IngestError(f"split {train_count}+{test_count} exceeds {n} rows")
    order = np.random.default_rng(seed).permutation(n)
    tr = order[:train_count]
    te = order[train_count : train_count + test_count]

    def take(idx):
        return Dataset(
            X=ds.X[idx],
            y=ds.y[idx],
            ids=[ds.ids[i] for i in idx] if ds.ids is not None else None,
            feature_names=ds.feature_names,
        )

    return take(tr), take(te)


def feature_ranges(d, n_parties):
    """Contiguous near-equal raw column ranges, remainder to earlier parties."""
    if d < n_parties:
        raise IngestError(f"cannot split {d} features across {n_parties} parties")
    base, rem = divmod(d, n_parties)
    ranges = []
    start = 0
    for i in range(n_parties):
        width = base + (1 if i < rem else 0)
        ranges.append((start, start + width))
        start += width
    return ranges


def partition_vertical(ds, n_parties, active_party=1, bias=True):
    """Split a dataset into per-party vertical shards.

    The active party receives the labels and, when ``bias`` is set, an
    all-ones column prepended to its block. Identifier columns are
    replicated to every shard for entity resolution. Returns the shards,
    the per-party global column ranges and the total weight dimension.
    """
    raw = feature_ranges(ds.X.shape[1], n_parties)
    shards = []
    ranges = []
    offset = 0
    for i, (lo, hi) in enumerate(raw):
        pid = i + 1
        block = ds.X[:, lo:hi]
        if bias and pid == active_party:
            block = np.hstack([np.ones((block.shape[0], 1)), block])
        start = lo + offset
        if bias and pid == active_party:
            offset = 1
        stop = hi + offset
        shards.append(
            PartyShard(
                party_id=pid,
                features=block,
                col_start=start,
                col_stop=stop,
                labels=ds.y.copy() if pid == active_party else None,
                ids=list(ds.ids) if ds.ids is not None else None,
            )
        )
        ranges.append((start, stop))
    d_total = ds.X.shape[1] + (1 if bias else 0)
    return shards, ranges, d_total


def augment(X, n_parties, active_party=1, bias=True):
    """Insert the active party's bias column into a raw feature matrix."""
    if not bias:
        return np.asarray(X, dtype=np.float64)
    lo, _ = feature_ranges(X.shape[1], n_parties)[active_party - 1]
    return np.insert(np.asarray(X, dtype=np.float64), lo, 1.0, axis=1)


def synth_dataset(n_rows, d, seed=0, id_prefix="rec", flip_rate=0.05):
    """Linearly separable-ish binary data with identifier strings."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n_rows, d))
    w_true = rng.normal(0.0, 2.0, size=d)
    z = (X - 0.5) @ w_true
    y = (z > 0).astype(np.float64)
    flips = rng.uniform(size=n_rows) < flip_rate
    y[flips] = 1.0 - y[flips]
    ids = [f"{id_prefix}-{i:06d}" for i in range(n_rows)]
    return Dataset(X=X, y=y, ids=ids, feature_names=[f"f{j}" for j in range(d)])


def dataset_to_csv(ds, path, id_column="id", label_column="label"):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        cols = ds.feature_names
        if ds.ids is not None:
            writer.writerow([id_column, *cols, label_column])
        else:
            writer.writerow([*cols, label_column])
        for i in range(ds.X.shape[0]):
            row = [f"{v:.9g}" for v in ds.X[i]]
            if ds.ids is not None:
                row = [ds.ids[i], *row]
            writer.writerow([*row, int(ds.y[i])])
