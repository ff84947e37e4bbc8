"""Synthetic classification data with a designated tail subpopulation.

The generator draws one Gaussian cluster per class plus a single rare
"tail" cluster that belongs to class 0 but sits geometrically far from
every main cluster (at least 6 cluster widths away). The tail is the
underrepresented subpopulation a backdoor adversary targets: honest
shards contain too few tail points to outweigh persistent malicious
updates aimed at them.

An optional loader for the bundled 8x8 digit bitmaps satisfies the same
interface; synthetic data is the contract-bearing default.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from byzlab.errors import ConfigError


@dataclass
class Dataset:
    features: np.ndarray  # (N, f) float64
    labels: np.ndarray  # (N,) int64, in [0, classes)
    tail_mask: np.ndarray  # (N,) bool
    backdoor_target: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.tail_mask = np.asarray(self.tail_mask, dtype=bool)
        if not (len(self.features) == len(self.labels) == len(self.tail_mask)):
            raise ConfigError("dataset columns disagree on sample count")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def subset(self, index: np.ndarray) -> "Dataset":
        return Dataset(
            features=self.features[index],
            labels=self.labels[index],
            tail_mask=self.tail_mask[index],
            backdoor_target=self.backdoor_target,
        )

    def with_tail_mask(self, mask: np.ndarray, target: int | None = None) -> "Dataset":
        """Same samples, different notion of which slice is the backdoor slice."""
        return Dataset(
            features=self.features,
            labels=self.labels,
            tail_mask=np.asarray(mask, dtype=bool),
            backdoor_target=self.backdoor_target if target is None else target,
        )


def gen_synthetic(
    features: int,
    classes: int,
    samples: int,
    tail_fraction: float,
    seed: int,
    cluster_spread: float = 1.0,
    backdoor_target: int | None = None,
) -> Dataset:
    """Gaussian cluster per class plus a rare, far-away tail cluster.

    Class means sit at radius 3*spread from the origin (well separated
    but contested enough that training dynamics stay interesting), the
    tail mean at radius 9*spread, so the tail is at least 6 spreads from
    every main cluster. The tail carries true label 0 and makes up
    round(tail_fraction * samples) rows. Deterministic per seed.
    """
    if not 0.0 <= tail_fraction <= 0.1:
        raise ConfigError(f"tail fraction must be in [0, 0.1], got {tail_fraction}")
    if samples < 100:
        raise ConfigError(f"need at least 100 samples, got {samples}")
    if classes < 2:
        raise ConfigError("need at least 2 classes")
    if backdoor_target is None:
        backdoor_target = classes - 1
    if not 0 <= backdoor_target < classes:
        raise ConfigError(f"backdoor target {backdoor_target} not a valid class")

    rng = np.random.default_rng(seed)
    means = rng.standard_normal((classes, features))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    means *= 3.0 * cluster_spread
    tail_mean = rng.standard_normal(features)
    tail_mean *= 9.0 * cluster_spread / np.linalg.norm(tail_mean)
    # construction guarantee: ||tail|| - ||mean|| = 6 spreads
    assert min(np.linalg.norm(means - tail_mean, axis=1)) >= 6.0 * cluster_spread

    n_tail = int(round(tail_fraction * samples))
    n_main = samples - n_tail
    labels = np.concatenate(
        [np.arange(n_main, dtype=np.int64) % classes, np.zeros(n_tail, dtype=np.int64)]
    )
    centers = np.concatenate([means[labels[:n_main]], np.tile(tail_mean, (n_tail, 1))])
    feats = centers + cluster_spread * rng.standard_normal((samples, features))
    tail = np.concatenate([np.zeros(n_main, dtype=bool), np.ones(n_tail, dtype=bool)])

    order = rng.permutation(samples)
    return Dataset(
        features=feats[order],
        labels=labels[order],
        tail_mask=tail[order],
        backdoor_target=backdoor_target,
    )


def split(dataset: Dataset, first: int) -> tuple[Dataset, Dataset]:
    """Split into (rows before ``first``, the rest); rows are pre-shuffled."""
    if not 0 < first < len(dataset):
        raise ConfigError(f"split point {first} outside (0, {len(dataset)})")
    idx = np.arange(len(dataset))
    return dataset.subset(idx[:first]), dataset.subset(idx[first:])


def shard(dataset: Dataset, count: int) -> list[Dataset]:
    """Partition into ``count`` near-equal contiguous shards."""
    if count < 1:
        raise ConfigError("shard count must be >= 1")
    if count > len(dataset):
        raise ConfigError(f"cannot cut {len(dataset)} samples into {count} shards")
    bounds = np.linspace(0, len(dataset), count + 1, dtype=int)
    idx = np.arange(len(dataset))
    return [dataset.subset(idx[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]


# ---------------------------------------------------------------------------
# Cache files
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Columnar numeric text: feature columns, then label, then tail flag."""
    path = Path(path)
    header = (
        f"features={dataset.features.shape[1]} "
        f"classes={dataset.classes} "
        f"backdoor_target={dataset.backdoor_target}"
    )
    body = np.column_stack(
        [dataset.features, dataset.labels.astype(np.float64),
         dataset.tail_mask.astype(np.float64)]
    )
    np.savetxt(path, body, header=header, fmt="%.17g")


def load_dataset(path: str | Path) -> Dataset:
    """Load a cache file and validate its invariants."""
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ConfigError(f"{path}: missing header line")
    meta = dict(item.split("=") for item in first[1:].split())
    n_features = int(meta["features"])
    classes = int(meta["classes"])
    target = int(meta["backdoor_target"])

    body = np.loadtxt(path, ndmin=2)
    if body.shape[1] != n_features + 2:
        raise ConfigError(
            f"{path}: expected {n_features + 2} columns, found {body.shape[1]}"
        )
    labels = body[:, n_features].astype(np.int64)
    tail = body[:, n_features + 1] != 0.0
    if len(labels) and (labels.min() < 0 or labels.max() >= classes):
        raise ConfigError(f"{path}: labels outside [0, {classes})")
    if not 0 <= target < classes:
        raise ConfigError(f"{path}: backdoor target outside [0, {classes})")
    return Dataset(
        features=body[:, :n_features],
        labels=labels,
        tail_mask=tail,
        backdoor_target=target,
    )


def load_digits_dataset(
    classes: int = 3,
    tail_fraction: float = 0.02,
    seed: int = 0,
    backdoor_target: int | None = None,
) -> Dataset:
    """Tiny-digits alternative task (8x8 bitmaps bundled with scikit-learn).

    Keeps digits 0..classes-1 as main classes; a subsample of the next
    digit, shrunk to ``tail_fraction`` of the total, plays the tail role
    with true label 0. Requires the optional scikit-learn dependency.
    """
    try:
        from sklearn.datasets import load_digits
    except ImportError as exc:
        raise ConfigError(
            "digits loader needs scikit-learn (pip install byzlab[digits])"
        ) from exc
    if not 0.0 <= tail_fraction <= 0.1:
        raise ConfigError(f"tail fraction must be in [0, 0.1], got {tail_fraction}")
    if not 2 <= classes <= 9:
        raise ConfigError("digits task supports 2..9 main classes")

    raw = load_digits()
    rng = np.random.default_rng(seed)
    main_keep = raw.target < classes
    X_main = raw.data[main_keep] / 16.0
    y_main = raw.target[main_keep].astype(np.int64)

    tail_pool = np.flatnonzero(raw.target == classes)
    n_tail = int(round(tail_fraction * len(X_main) / max(1e-9, 1 - tail_fraction)))
    n_tail = min(n_tail, len(tail_pool))
    tail_idx = rng.choice(tail_pool, size=n_tail, replace=False)

    feats = np.concatenate([X_main, raw.data[tail_idx] / 16.0])
    labels = np.concatenate([y_main, np.zeros(n_tail, dtype=np.int64)])
    tail = np.concatenate(
        [np.zeros(len(X_main), dtype=bool), np.ones(n_tail, dtype=bool)]
    )
    order = rng.permutation(len(feats))
    if backdoor_target is None:
        backdoor_target = classes - 1
    return Dataset(
        features=feats[order],
        labels=labels[order],
        tail_mask=tail[order],
        backdoor_target=backdoor_target,
    )
