"""Server-side aggregation rules.

Linear averaging (FedAvg), static and dynamic norm-bound enforcement,
and three robust baselines: Multi-Krum, coordinate-wise median /
trimmed mean, and FoolsGold contribution reweighting. Everything is a
pure function of the round's inputs; all tie-breaking uses client ids,
never arrival order, so outputs are invariant under permutation of the
submissions.

Dynamic norm bounds follow the median rule: the bound for a round is
the median of the publicly declared update norms times a configured
multiplier, computed over all declared norms before any filtering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from byzlab.errors import ConfigError
from byzlab.model.vectors import clip_to_norm

AGGREGATOR_KINDS = (
    "fedavg",
    "norm_bound_static",
    "norm_bound_dynamic",
    "multi_krum",
    "coord_median",
    "trimmed_mean",
    "foolsgold",
)

# Aggregators that only need the sum of updates; these are the ones a
# masked (crypto-mode) round can serve, since the server never sees
# individual updates there.
SUM_COMPATIBLE_KINDS = ("fedavg", "norm_bound_static", "norm_bound_dynamic")


@dataclass
class AggregatorSpec:
    kind: str = "fedavg"
    bound: float = 1.0  # static bound, or the initial bound for dynamic
    p: float = math.inf  # 2 or inf
    mode: str = "reject"  # reject | clip
    multiplier: float = 1.5  # dynamic bound: median * multiplier
    byzantine_count: int = 1  # multi_krum f
    selection_size: int = 1  # multi_krum m
    trim_fraction: float = 0.1  # trimmed_mean beta

    def validate(self) -> None:
        if self.kind not in AGGREGATOR_KINDS:
            raise ConfigError(
                f"unknown aggregator {self.kind!r}; expected one of {AGGREGATOR_KINDS}"
            )
        if self.p not in (2, math.inf):
            raise ConfigError(f"aggregator.p must be 2 or inf, got {self.p!r}")
        if self.mode not in ("reject", "clip"):
            raise ConfigError(f"aggregator.mode must be reject or clip, got {self.mode!r}")
        if self.kind in ("norm_bound_static", "norm_bound_dynamic") and self.bound <= 0:
            raise ConfigError(f"norm bound must be positive, got {self.bound}")
        if self.kind == "norm_bound_dynamic" and self.multiplier <= 0:
            raise ConfigError(f"bound multiplier must be positive, got {self.multiplier}")
        if self.kind == "multi_krum":
            if self.byzantine_count < 0 or self.selection_size < 1:
                raise ConfigError("multi_krum needs byzantine_count >= 0, selection_size >= 1")
        if self.kind == "trimmed_mean" and not 0.0 <= self.trim_fraction < 0.5:
            raise ConfigError(
                f"trim fraction must be in [0, 0.5), got {self.trim_fraction}"
            )

    @property
    def uses_norm_bound(self) -> bool:
        return self.kind in ("norm_bound_static", "norm_bound_dynamic")


@dataclass
class UpdateHistory:
    """Per-client cumulative sum of submitted updates across rounds."""

    sums: dict[int, np.ndarray] = field(default_factory=dict)

    def add(self, client_id: int, update: np.ndarray) -> None:
        if client_id in self.sums:
            self.sums[client_id] = self.sums[client_id] + update
        else:
            self.sums[client_id] = np.array(update, dtype=np.float64, copy=True)

    def vector(self, client_id: int, dim: int) -> np.ndarray:
        return self.sums.get(client_id, np.zeros(dim, dtype=np.float64))


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


def fedavg(
    updates: Sequence[tuple[int, np.ndarray]],
    weights: Sequence[float] | None = None,
) -> np.ndarray:
    """Weighted mean of updates; uniform 1/n by default."""
    if not updates:
        raise ConfigError("fedavg over an empty update list")
    vecs = np.stack([np.asarray(u, dtype=np.float64) for _, u in updates])
    if weights is None:
        return vecs.mean(axis=0)
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != len(vecs):
        raise ConfigError("weight count does not match update count")
    total = w.sum()
    if total <= 0:
        raise ConfigError("weights must sum to a positive value")
    return (vecs * w[:, None]).sum(axis=0) / total


def dynamic_bound(public_norms: Sequence[float], multiplier: float) -> float:
    """Median of the declared norms times the multiplier.

    Even counts take the mean of the two middle values.
    """
    if not public_norms:
        raise ConfigError("cannot compute a bound from zero declared norms")
    if multiplier <= 0:
        raise ConfigError(f"bound multiplier must be positive, got {multiplier}")
    return float(np.median(np.asarray(public_norms, dtype=np.float64))) * multiplier


@dataclass
class FilterResult:
    accepted: list[int]
    rejected: dict[int, str]
    updates: dict[int, np.ndarray]  # post-filter updates (clipped in clip mode)


def norm_bound_filter(
    declared: Sequence[tuple[int, float]],
    bound: float,
    p: float,
    mode: str = "reject",
    updates: Mapping[int, np.ndarray] | None = None,
    verdicts: Mapping[int, bool] | None = None,
) -> FilterResult:
    """Apply a norm bound to a round's submissions.

    ``declared`` is the public (client id, declared norm) list. Reject
    mode drops ids whose declared norm exceeds the bound or whose
    verification verdict (if provided) is False; clip mode accepts
    everyone and rescales the supplied update vectors onto the bound.
    An empty accepted set is a valid, recorded outcome.
    """
    if bound <= 0:
        raise ConfigError(f"norm bound must be positive, got {bound}")
    if mode not in ("reject", "clip"):
        raise ConfigError(f"filter mode must be reject or clip, got {mode!r}")
    accepted: list[int] = []
    rejected: dict[int, str] = {}
    out_updates: dict[int, np.ndarray] = {}
    for client_id, norm in declared:
        if verdicts is not None and not verdicts.get(client_id, True):
            rejected[client_id] = "verification"
            continue
        if mode == "reject" and norm > bound:
            rejected[client_id] = "norm"
            continue
        accepted.append(client_id)
        if updates is not None and client_id in updates:
            vec = updates[client_id]
            if mode == "clip":
                vec = clip_to_norm(vec, bound, p)
            out_updates[client_id] = vec
    return FilterResult(accepted=accepted, rejected=rejected, updates=out_updates)


def multi_krum(
    updates: Sequence[tuple[int, np.ndarray]],
    byzantine_count: int,
    selection_size: int,
) -> list[int]:
    """Select the ids whose updates sit closest to their neighbors.

    Each update is scored by the sum of squared distances to its
    n - f - 2 nearest other updates; the ``selection_size`` lowest
    scores win, ties broken by lowest client id.
    """
    n = len(updates)
    f = byzantine_count
    if n < f + 3:
        raise ConfigError(f"multi_krum needs n >= f + 3 (n={n}, f={f})")
    if selection_size < 1 or selection_size > n:
        raise ConfigError(f"selection size {selection_size} outside [1, {n}]")
    ids = [cid for cid, _ in updates]
    vecs = np.stack([np.asarray(u, dtype=np.float64) for _, u in updates])
    diffs = vecs[:, None, :] - vecs[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diffs, diffs)
    neighbors = n - f - 2
    scores = []
    for i in range(n):
        others = np.delete(sq[i], i)
        others.sort()
        scores.append(float(others[:neighbors].sum()))
    ranked = sorted(range(n), key=lambda i: (scores[i], ids[i]))
    return sorted(ids[i] for i in ranked[:selection_size])


def coord_median(updates: Sequence[tuple[int, np.ndarray]]) -> np.ndarray:
    """Coordinatewise median; even counts average the two middle values."""
    if not updates:
        raise ConfigError("median over an empty update list")
    vecs = np.stack([np.asarray(u, dtype=np.float64) for _, u in updates])
    return np.median(vecs, axis=0)


def trimmed_mean(
    updates: Sequence[tuple[int, np.ndarray]], trim_fraction: float
) -> np.ndarray:
    """Coordinatewise mean after dropping floor(beta*n) values per end."""
    if not updates:
        raise ConfigError("trimmed mean over an empty update list")
    if not 0.0 <= trim_fraction < 0.5:
        raise ConfigError(f"trim fraction must be in [0, 0.5), got {trim_fraction}")
    vecs = np.stack([np.asarray(u, dtype=np.float64) for _, u in updates])
    k = int(trim_fraction * len(vecs))
    ordered = np.sort(vecs, axis=0)
    if k:
        ordered = ordered[k:-k]
    return ordered.mean(axis=0)


def foolsgold(
    history: UpdateHistory, client_ids: Sequence[int], dim: int
) -> dict[int, float]:
    """Per-client learning-rate weights in [0, 1] from history similarity.

    Pairwise cosine similarities of cumulative update histories, with
    pardoning (scale down similarity to clients whose own maximum
    similarity is higher), then weight = 1 - max similarity, rescaled by
    the maximum, pushed through a logit and clamped to [0, 1]. Clients
    with identical histories are driven to weight 0; a client with no
    history yet keeps weight 1 (no evidence).
    """
    if len(client_ids) < 2:
        raise ConfigError("foolsgold needs at least 2 clients")
    ids = list(client_ids)
    vecs = np.stack([history.vector(cid, dim) for cid in ids])
    norms = np.linalg.norm(vecs, axis=1)
    active = norms > 0

    n = len(ids)
    cs = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and active[i] and active[j]:
                cs[i, j] = float(vecs[i] @ vecs[j]) / (norms[i] * norms[j])
    maxcs = cs.max(axis=1)
    # pardoning: an honest client that merely resembles a more-suspicious
    # one gets its similarity scaled back down
    pardoned = cs.copy()
    for i in range(n):
        for j in range(n):
            if i != j and maxcs[j] > maxcs[i] and maxcs[j] > 0:
                pardoned[i, j] *= maxcs[i] / maxcs[j]

    wv = 1.0 - pardoned.max(axis=1)
    np.clip(wv, 0.0, 1.0, out=wv)
    top = wv.max()
    if top > 0:
        wv = wv / top
    wv[wv >= 1.0] = 0.99
    with np.errstate(divide="ignore"):
        wv = np.log(wv / (1.0 - wv)) + 0.5
    wv[~np.isfinite(wv)] = 0.0
    np.clip(wv, 0.0, 1.0, out=wv)
    wv[~active] = 1.0
    return {cid: float(w) for cid, w in zip(ids, wv)}


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


@dataclass
class AggregationResult:
    delta: np.ndarray  # global update to apply
    bound: float | None  # bound computed/used this round (None if no bound rule)
    accepted: list[int]
    rejected: dict[int, str]
    weights: dict[int, float]  # per-client weight actually applied
    empty_round: bool = False  # accepted set was empty; zero update applied


def aggregate(
    updates: Sequence[tuple[int, np.ndarray]],
    declared_norms: Mapping[int, float],
    spec: AggregatorSpec,
    history: UpdateHistory | None = None,
    verdicts: Mapping[int, bool] | None = None,
) -> AggregationResult:
    """Dispatch to the configured rule and record every decision.

    Norm-bound kinds compose the bound, the filter, and a uniform mean
    over survivors. An empty accepted set yields a zero update flagged
    in the result rather than an error.
    """
    spec.validate()
    if not updates:
        raise ConfigError("aggregate called with no updates")
    ids = [cid for cid, _ in updates]
    dim = len(updates[0][1])
    update_map = {cid: np.asarray(u, dtype=np.float64) for cid, u in updates}

    if spec.kind == "fedavg":
        return AggregationResult(
            delta=fedavg(updates),
            bound=None,
            accepted=sorted(ids),
            rejected={},
            weights={cid: 1.0 for cid in ids},
        )

    if spec.uses_norm_bound:
        declared = [(cid, declared_norms[cid]) for cid in ids]
        if spec.kind == "norm_bound_dynamic":
            bound = dynamic_bound([norm for _, norm in declared], spec.multiplier)
        else:
            bound = spec.bound
        result = norm_bound_filter(
            declared, bound, spec.p, spec.mode, updates=update_map, verdicts=verdicts
        )
        if not result.accepted:
            return AggregationResult(
                delta=np.zeros(dim),
                bound=bound,
                accepted=[],
                rejected=result.rejected,
                weights={},
                empty_round=True,
            )
        survivors = [(cid, result.updates[cid]) for cid in sorted(result.accepted)]
        return AggregationResult(
            delta=fedavg(survivors),
            bound=bound,
            accepted=sorted(result.accepted),
            rejected=result.rejected,
            weights={cid: 1.0 for cid in result.accepted},
        )

    if spec.kind == "multi_krum":
        chosen = multi_krum(updates, spec.byzantine_count, spec.selection_size)
        survivors = [(cid, update_map[cid]) for cid in chosen]
        return AggregationResult(
            delta=fedavg(survivors),
            bound=None,
            accepted=chosen,
            rejected={cid: "krum-score" for cid in ids if cid not in chosen},
            weights={cid: 1.0 for cid in chosen},
        )

    if spec.kind == "coord_median":
        return AggregationResult(
            delta=coord_median(updates),
            bound=None,
            accepted=sorted(ids),
            rejected={},
            weights={cid: 1.0 for cid in ids},
        )

    if spec.kind == "trimmed_mean":
        return AggregationResult(
            delta=trimmed_mean(updates, spec.trim_fraction),
            bound=None,
            accepted=sorted(ids),
            rejected={},
            weights={cid: 1.0 for cid in ids},
        )

    # foolsgold: weights act as per-client learning rates under a uniform
    # 1/n average, so all-ones weights reduce to plain fedavg
    if history is None:
        raise ConfigError("foolsgold needs an update history")
    weights = foolsgold(history, ids, dim)
    vecs = np.stack([update_map[cid] * weights[cid] for cid in ids])
    return AggregationResult(
        delta=vecs.sum(axis=0) / len(ids),
        bound=None,
        accepted=sorted(ids),
        rejected={},
        weights=weights,
    )
