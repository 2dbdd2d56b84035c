"""Dataset synthesis, CSV ingestion, and non-IID client partitioning."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CsvFormatError
from .numerics import derive_seed, stream


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, n_in) float64
    labels: np.ndarray    # (n,) int64, values in [0, n_cls)
    n_cls: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ConfigError("features must be (n, n_in), labels (n,)")
        if self.features.shape[0] != self.labels.shape[0] or self.features.shape[0] < 1:
            raise ConfigError("feature/label row counts differ or dataset empty")
        if self.labels.min() < 0 or self.labels.max() >= self.n_cls:
            raise ConfigError("label out of range")
        if not np.all(np.isfinite(self.features)):
            raise ConfigError("non-finite feature rows")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_in(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class DataBatch:
    """View of dataset rows handed to one local training step."""

    features: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class Partition:
    """Disjoint assignment of dataset rows to clients."""

    client_indices: list  # list of int64 arrays
    alpha: float
    seed: int

    def validate(self, n: int) -> None:
        """Check shards are pairwise disjoint and cover exactly {0..n-1}."""
        seen = np.concatenate([np.asarray(c) for c in self.client_indices])
        if seen.shape[0] != n or not np.array_equal(np.sort(seen), np.arange(n)):
            raise ConfigError("partition shards do not disjointly cover the dataset")

    @property
    def n_clients(self) -> int:
        return len(self.client_indices)

    def to_json(self) -> str:
        return json.dumps({str(i): np.asarray(c).tolist()
                           for i, c in enumerate(self.client_indices)})


def class_means(n_cls: int, n_in: int) -> np.ndarray:
    """Deterministic arrangement of class centers on the unit sphere.

    Uses the centered standard-basis simplex when it fits; otherwise a
    fixed-key random arrangement, a pure function of the dimensions.
    """
    if n_cls <= n_in:
        basis = np.eye(n_cls, n_in)
        centered = basis - basis.mean(axis=0)
        return centered / np.linalg.norm(centered, axis=1, keepdims=True)
    rng = stream(0x5EED, n_cls, n_in)
    raw = rng.standard_normal((n_cls, n_in))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def synth_clusters(n_cls: int, n_in: int, per_class: int, spread: float,
                   seed: int) -> Dataset:
    """Balanced Gaussian blobs, one isotropic cluster per class.

    Each class draws from its own stream, so the dataset bytes depend
    only on (dims, per_class, spread, seed) and not on draw order.
    """
    if n_cls < 2 or per_class < 1 or n_in < 1:
        raise ConfigError("need n_cls >= 2, n_in >= 1, per_class >= 1")
    if spread < 0:
        raise ConfigError("spread must be >= 0")
    means = class_means(n_cls, n_in)
    feats = np.empty((n_cls * per_class, n_in))
    labels = np.empty(n_cls * per_class, dtype=np.int64)
    for c in range(n_cls):
        rng = stream(seed, c)
        rows = slice(c * per_class, (c + 1) * per_class)
        feats[rows] = means[c] + spread * rng.standard_normal((per_class, n_in))
        labels[rows] = c
    prov = {"kind": "synthetic", "seed": seed, "n_cls": n_cls, "n_in": n_in,
            "per_class": per_class, "spread": spread}
    return Dataset(feats, labels, n_cls, prov)


@dataclass(frozen=True)
class CsvSchema:
    n_cls: int
    n_in: int
    has_header: bool = False


def ingest_csv(path, schema: CsvSchema) -> Dataset:
    """Load rows of ``label,f1,...,f_nin``; order preserved, checksum recorded."""
    with open(path, "rb") as fh:
        raw = fh.read()
    checksum = hashlib.sha256(raw).hexdigest()
    lines = raw.decode("utf-8").splitlines()
    start = 1 if schema.has_header else 0
    feats, labels = [], []
    for lineno, text in enumerate(lines[start:], start=start + 1):
        if not text.strip():
            continue
        cells = text.split(",")
        if len(cells) != schema.n_in + 1:
            raise CsvFormatError(
                f"line {lineno}: expected {schema.n_in + 1} fields, got {len(cells)}",
                line=lineno)
        try:
            label = int(cells[0])
            row = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise CsvFormatError(f"line {lineno}: {exc}", line=lineno) from exc
        if not 0 <= label < schema.n_cls:
            raise CsvFormatError(
                f"line {lineno}: label {label} outside [0, {schema.n_cls})",
                line=lineno)
        labels.append(label)
        feats.append(row)
    if not feats:
        raise CsvFormatError("no data rows", line=None)
    prov = {"kind": "csv", "path": str(path), "sha256": checksum}
    return Dataset(np.asarray(feats, dtype=np.float64),
                   np.asarray(labels, dtype=np.int64), schema.n_cls, prov)


def _proportions_to_counts(p: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder rounding of ``total * p`` to integers summing to total."""
    raw = p * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def _assign(ds, n_clients, alpha, rng):
    shards = [[] for _ in range(n_clients)]
    for c in range(ds.n_cls):
        idx = np.flatnonzero(ds.labels == c)
        idx = idx[rng.permutation(idx.shape[0])]
        p = rng.dirichlet(np.full(n_clients, alpha))
        counts = _proportions_to_counts(p, idx.shape[0])
        offsets = np.concatenate([[0], np.cumsum(counts)])
        for i in range(n_clients):
            shards[i].append(idx[offsets[i]:offsets[i + 1]])
    return [np.sort(np.concatenate(s)) for s in shards]


def dirichlet_partition(ds: Dataset, n_clients: int, alpha: float, seed: int,
                        min_client_size: int = 10, max_retries: int = 1000) -> Partition:
    """Split rows across clients with per-class Dirichlet(alpha) label ratios.

    Each class's proportion vector across clients is a fresh Dirichlet
    draw.  Draws leaving any client below ``min_client_size`` are
    redrawn up to ``max_retries`` times; if skew persists, examples are
    moved deterministically from the largest shard to the smallest
    until every client is viable (tiny clients would break the local
    training loop).
    """
    if n_clients < 2:
        raise ConfigError("need at least 2 clients")
    if alpha <= 0:
        raise ConfigError("alpha must be > 0")
    if n_clients * min_client_size > ds.n:
        raise ConfigError(
            f"infeasible: {n_clients} clients x min size {min_client_size} "
            f"> {ds.n} examples")

    rng = stream(seed, 0)
    shards = _assign(ds, n_clients, alpha, rng)
    for _ in range(max_retries):
        if min(s.shape[0] for s in shards) >= min_client_size:
            break
        shards = _assign(ds, n_clients, alpha, rng)
    else:
        shards = _rebalance(shards, min_client_size)

    part = Partition([np.asarray(s, dtype=np.int64) for s in shards], alpha, seed)
    part.validate(ds.n)
    return part


def _rebalance(shards, min_client_size):
    """Move rows from the largest shard to the smallest until all are viable."""
    shards = [list(s) for s in shards]
    while True:
        sizes = [len(s) for s in shards]
        smallest = int(np.argmin(sizes))
        if sizes[smallest] >= min_client_size:
            break
        largest = int(np.argmax(sizes))
        shards[smallest].append(shards[largest].pop())
    return [np.sort(np.asarray(s, dtype=np.int64)) for s in shards]


@dataclass(frozen=True)
class SyntheticSource:
    """Recipe for paired train/test cluster datasets from one data seed."""

    n_cls: int
    n_in: int
    per_class: int
    spread: float
    test_per_class: int

    def load(self, seed: int) -> tuple[Dataset, Dataset]:
        train = synth_clusters(self.n_cls, self.n_in, self.per_class,
                               self.spread, derive_seed(seed, 0))
        test = synth_clusters(self.n_cls, self.n_in, self.test_per_class,
                              self.spread, derive_seed(seed, 1))
        return train, test


@dataclass(frozen=True)
class CsvSource:
    """Train (and optionally test) datasets read from CSV files."""

    train_path: str
    schema: CsvSchema
    test_path: str | None = None

    def load(self, seed: int) -> tuple[Dataset, Dataset]:
        train = ingest_csv(self.train_path, self.schema)
        test = ingest_csv(self.test_path, self.schema) if self.test_path else train
        return train, test


def next_batch(ds: Dataset, part: Partition, client: int, batch_size: int,
               rng: np.random.Generator) -> DataBatch:
    """Uniform without-replacement sample from the client's shard.

    Shards smaller than the batch size are returned whole, in stored
    order, with no stream consumption.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if not 0 <= client < part.n_clients:
        raise ConfigError(f"unknown client id {client}")
    shard = part.client_indices[client]
    if batch_size >= shard.shape[0]:
        chosen = shard
    else:
        chosen = shard[rng.choice(shard.shape[0], size=batch_size, replace=False)]
    return DataBatch(ds.features[chosen], ds.labels[chosen])
