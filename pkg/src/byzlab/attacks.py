"""Adversary strategies and Sybil identity management.

The controller-level strategies compose a few primitives: label
flipping, update scaling, backdoor training on a blended shard, Sybil
spawning, clone diversification, and norm-bound manipulation. All
strategies are bound-compliant by construction: when a norm bound is in
force the adversary clips its own submissions onto the bound, because a
rejected update contributes nothing.

Two composite attacks target the median-bound secure-aggregation
pipeline specifically:

* ``sybil_tail``: every controlled identity submits a (optionally
  diversified) clone of one backdoor update trained on the tail
  subpopulation, accelerating tail takeover with population count
  rather than scale.
* ``stat_manip``: every controlled identity submits an update of
  exactly the announced bound's norm, aligned with the backdoor
  descent direction, and declares that norm publicly. With a Sybil
  majority the declared-norm median equals the old bound, so the next
  bound is multiplier * old bound: geometric loosening.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from byzlab.errors import ConfigError, ProtocolStateError
from byzlab.model.data import Dataset
from byzlab.model.nets import ModelSpec, grad, local_train
from byzlab.model.vectors import clip_to_norm, p_norm

ROLE_HONEST = "honest"
ROLE_ADVERSARY = "adversary"
ROLE_SYBIL = "sybil"

STRATEGIES = (
    "none",
    "label_flip",
    "scale",
    "backdoor_prototypical",
    "backdoor_tail",
    "sybil_tail",
    "stat_manip",
)
SCHEDULES = ("single_shot", "continuous", "fixed_frequency")
SPAWN_SCHEDULES = ("at_round", "ramp")


@dataclass(frozen=True)
class ClientIdentity:
    id: int
    role: str = ROLE_HONEST
    controller: int | None = None  # owning adversary, for sybils
    spawn_round: int = 0

    def __post_init__(self):
        if self.role not in (ROLE_HONEST, ROLE_ADVERSARY, ROLE_SYBIL):
            raise ConfigError(f"unknown role {self.role!r}")
        if self.role == ROLE_SYBIL and self.controller is None:
            raise ConfigError("a sybil needs a controlling adversary")


@dataclass
class AttackSpec:
    strategy: str = "none"
    schedule: str = "continuous"
    start_round: int = 1  # continuous/fixed_frequency attacks fire from here on
    single_shot_round: int = 1
    sybil_count: int = 0
    spawn_schedule: str = "at_round"
    spawn_round: int = 1
    ramp_interval: int = 5  # rounds between doublings under "ramp"
    boost: float = 20.0  # scaling factor applied to malicious updates
    blend: float = 0.5  # backdoor fraction of the training mixture
    diversify: float = 0.1  # clone perturbation radius, fraction of the bound
    target_label: int | None = None  # defaults to the dataset's backdoor target
    flip_from: int = 0
    flip_to: int | None = None  # defaults to target_label
    extra_tail_fraction: float = 0.0  # artificial-tail-target hook (measured only)

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown attack strategy {self.strategy!r}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown attack schedule {self.schedule!r}")
        if self.spawn_schedule not in SPAWN_SCHEDULES:
            raise ConfigError(f"unknown spawn schedule {self.spawn_schedule!r}")
        if self.sybil_count < 0:
            raise ConfigError("sybil count must be >= 0")
        if not 0.0 <= self.diversify < 1.0:
            raise ConfigError(f"diversify must be in [0, 1), got {self.diversify}")
        if not 0.0 < self.blend <= 1.0:
            raise ConfigError(f"blend must be in (0, 1], got {self.blend}")
        if self.boost < 1.0:
            raise ConfigError(f"boost must be >= 1, got {self.boost}")
        if self.single_shot_round < 1:
            raise ConfigError("single-shot round must be >= 1")
        if self.start_round < 1:
            raise ConfigError("attack start round must be >= 1")
        if self.ramp_interval < 1:
            raise ConfigError("ramp interval must be >= 1")
        if not 0.0 <= self.extra_tail_fraction <= 1.0:
            raise ConfigError("extra tail fraction must be in [0, 1]")


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


def label_flip(dataset: Dataset, from_class: int, to_class: int) -> Dataset:
    """Relabel every ``from_class`` sample as ``to_class``; features untouched.

    A class absent from the shard flips vacuously. Task-level class
    bounds are validated by the scenario config, not against the
    shard's realized labels.
    """
    if from_class < 0 or to_class < 0:
        raise ConfigError(f"flip classes must be nonnegative, got {from_class}, {to_class}")
    if from_class == to_class:
        warnings.warn("label flip with from == to is a no-op", stacklevel=2)
        return dataset
    labels = dataset.labels.copy()
    labels[labels == from_class] = to_class
    return Dataset(
        features=dataset.features,
        labels=labels,
        tail_mask=dataset.tail_mask,
        backdoor_target=dataset.backdoor_target,
    )


def scale_update(delta: np.ndarray, boost: float) -> np.ndarray:
    """Multiply an update by the boost factor (>= 1)."""
    if boost < 1.0:
        raise ConfigError(f"boost must be >= 1, got {boost}")
    return np.asarray(delta, dtype=np.float64) * boost


def train_backdoor(
    spec: ModelSpec,
    global_params: np.ndarray,
    honest_shard: Dataset,
    backdoor_shard: Dataset,
    blend: float,
    epochs: int,
    lr: float,
    batch_size: int,
    rng: np.random.Generator,
    bound: float | None = None,
    p: float = math.inf,
) -> np.ndarray:
    """Local training on a backdoor/honest mixture, clipped onto the bound.

    The mixture has ``blend`` fraction backdoor rows (sampled with
    replacement from the backdoor shard, which already carries the
    attacker's target labels) and the rest honest rows. Clipping onto
    the bound is the rational adversary move under a norm-bound filter.
    """
    if len(honest_shard) == 0 or len(backdoor_shard) == 0:
        raise ConfigError("both shards must be nonempty")
    total = len(honest_shard)
    n_backdoor = max(1, int(round(blend * total)))
    n_honest = max(0, total - n_backdoor)
    bd_idx = rng.integers(0, len(backdoor_shard), size=n_backdoor)
    parts_X = [backdoor_shard.features[bd_idx]]
    parts_y = [backdoor_shard.labels[bd_idx]]
    if n_honest:
        keep = rng.permutation(len(honest_shard))[:n_honest]
        parts_X.append(honest_shard.features[keep])
        parts_y.append(honest_shard.labels[keep])
    X = np.concatenate(parts_X)
    y = np.concatenate(parts_y)
    delta = local_train(spec, global_params, X, y, epochs, lr, batch_size, rng)
    if bound is not None and math.isfinite(bound):
        delta = clip_to_norm(delta, bound, p)
    return delta


def spawn_sybils(
    adversary_id: int,
    count: int,
    spawn_round: int,
    population: list[ClientIdentity],
) -> list[ClientIdentity]:
    """Append ``count`` fresh sybil identities controlled by the adversary.

    Ids continue from the current maximum; there is no admission
    control, so sybils enter the sampling pool exactly like honest
    clients. Spawning twice for the same (controller, round) is an
    error.
    """
    if not any(c.id == adversary_id and c.role == ROLE_ADVERSARY for c in population):
        raise ProtocolStateError(f"adversary {adversary_id} is not registered")
    if count == 0:
        return list(population)
    if any(
        c.role == ROLE_SYBIL
        and c.controller == adversary_id
        and c.spawn_round == spawn_round
        for c in population
    ):
        raise ProtocolStateError(
            f"sybils for adversary {adversary_id} at round {spawn_round} already spawned"
        )
    next_id = max(c.id for c in population) + 1
    spawned = [
        ClientIdentity(
            id=next_id + i,
            role=ROLE_SYBIL,
            controller=adversary_id,
            spawn_round=spawn_round,
        )
        for i in range(count)
    ]
    return list(population) + spawned


def sybils_due(attack: AttackSpec, round_index: int) -> int:
    """How many sybils should exist by ``round_index`` under the spawn schedule.

    ``at_round`` releases all at once; ``ramp`` starts with one and
    doubles every ``ramp_interval`` rounds up to the configured count.
    """
    if attack.sybil_count == 0 or round_index < attack.spawn_round:
        return 0
    if attack.spawn_schedule == "at_round":
        return attack.sybil_count
    steps = (round_index - attack.spawn_round) // attack.ramp_interval
    return min(attack.sybil_count, 1 << steps)


def orthogonal_units(
    base: np.ndarray, count: int, rng: np.random.Generator
) -> tuple[list[np.ndarray], bool]:
    """Unit vectors orthogonal to ``base`` and to each other.

    Gram-Schmidt over seeded Gaussian draws. Once the d-1 available
    orthogonal directions are exhausted the remainder are plain random
    units (quasi-orthogonal in high dimension); the returned flag says
    whether that wrap happened.
    """
    base = np.asarray(base, dtype=np.float64)
    d = base.size
    basis: list[np.ndarray] = []
    norm = np.linalg.norm(base)
    if norm > 0:
        basis.append(base / norm)
    units: list[np.ndarray] = []
    wrapped = False
    for _ in range(count):
        if len(basis) < d:
            while True:
                v = rng.standard_normal(d)
                for b in basis:
                    v -= (v @ b) * b
                vn = np.linalg.norm(v)
                if vn > 1e-12:
                    break
            u = v / vn
            basis.append(u)
        else:
            wrapped = True
            v = rng.standard_normal(d)
            u = v / np.linalg.norm(v)
        units.append(u)
    return units, wrapped


def sybil_tail_round(
    shared_delta: np.ndarray,
    sybil_ids: list[int],
    bound: float | None,
    diversify: float,
    p: float,
    rng: np.random.Generator,
) -> tuple[dict[int, np.ndarray], bool]:
    """Per-sybil updates cloned from one shared backdoor update.

    With ``diversify`` = 0 (or a single sybil) every controlled identity
    submits the identical clone. Otherwise each clone is perturbed by
    diversify * bound along its own direction orthogonal to the shared
    update and to the other perturbations, then clipped back onto the
    bound, so diversification never violates the filter.
    """
    shared = np.asarray(shared_delta, dtype=np.float64)
    if bound is not None and math.isfinite(bound):
        shared = clip_to_norm(shared, bound, p)
        radius = bound
    else:
        bound = None
        radius = p_norm(shared, p)
    if diversify == 0.0 or len(sybil_ids) <= 1:
        return {cid: shared.copy() for cid in sybil_ids}, False
    units, wrapped = orthogonal_units(shared, len(sybil_ids), rng)
    out = {}
    for cid, u in zip(sorted(sybil_ids), units):
        candidate = shared + diversify * radius * u
        if bound is not None:
            candidate = clip_to_norm(candidate, bound, p)
        out[cid] = candidate
    return out, wrapped


def stat_manip_direction(
    spec: ModelSpec, global_params: np.ndarray, backdoor_shard: Dataset
) -> np.ndarray:
    """Unit descent direction of the backdoor loss at the current model."""
    g = grad(spec, global_params, backdoor_shard.features, backdoor_shard.labels)
    norm = np.linalg.norm(g)
    if norm == 0:
        # nothing to descend; any direction keeps the declared norm valid
        direction = np.zeros_like(g)
        direction[0] = 1.0
        return direction
    return -g / norm


def stat_manip_round(
    sybil_ids: list[int],
    bound: float,
    direction: np.ndarray,
    p: float,
) -> dict[int, np.ndarray]:
    """Updates of norm exactly ``bound`` along the backdoor direction.

    The maximum admissible size: the declared norms equal the bound, so
    with enough controlled identities the next round's median shifts up.
    """
    if bound is None or not math.isfinite(bound) or bound <= 0:
        raise ConfigError("stat_manip needs a finite positive public bound")
    direction = np.asarray(direction, dtype=np.float64)
    scale = p_norm(direction, p)
    if scale == 0:
        raise ConfigError("stat_manip direction must be nonzero")
    update = direction * (bound / scale)
    return {cid: update.copy() for cid in sybil_ids}


def schedule_attack(
    attack: AttackSpec, round_index: int, sampled_controlled: list[int]
) -> list[int]:
    """Which controlled ids fire this round.

    single_shot fires only at its configured round; continuous fires
    whenever a controlled id was sampled, from ``start_round`` on;
    fixed_frequency behaves like continuous (the sampling layer already
    guarantees one controlled participant per round and flags the
    substitution).
    """
    if attack.strategy == "none":
        return []
    if attack.schedule == "single_shot":
        if round_index != attack.single_shot_round:
            return []
    elif round_index < attack.start_round:
        return []
    return sorted(sampled_controlled)


# ---------------------------------------------------------------------------
# Round-level controller
# ---------------------------------------------------------------------------


@dataclass
class AdversaryController:
    """Sequential per-round decision maker for one adversary and its sybils."""

    adversary_id: int
    attack: AttackSpec
    model_spec: ModelSpec
    honest_shard: Dataset
    backdoor_shard: Dataset  # already labeled with the attacker's target
    epochs: int
    lr: float
    batch_size: int
    flags: dict = field(default_factory=dict)

    def updates_for_round(
        self,
        round_index: int,
        firing_ids: list[int],
        global_params: np.ndarray,
        bound: float | None,
        p: float,
        rng: np.random.Generator,
    ) -> tuple[dict[int, np.ndarray], dict[int, float], dict]:
        """Produce (updates, declared norms, flags) for every firing id."""
        flags: dict = {}
        if not firing_ids:
            return {}, {}, flags
        strategy = self.attack.strategy

        if strategy == "label_flip":
            flipped = label_flip(
                self.honest_shard,
                self.attack.flip_from,
                self.attack.flip_to
                if self.attack.flip_to is not None
                else self.backdoor_shard.backdoor_target,
            )
            updates = {}
            for cid in firing_ids:
                delta = local_train(
                    self.model_spec,
                    global_params,
                    flipped.features,
                    flipped.labels,
                    self.epochs,
                    self.lr,
                    self.batch_size,
                    rng,
                )
                updates[cid] = self._finish(delta, bound, p)
        elif strategy == "scale":
            updates = {}
            for cid in firing_ids:
                delta = local_train(
                    self.model_spec,
                    global_params,
                    self.honest_shard.features,
                    self.honest_shard.labels,
                    self.epochs,
                    self.lr,
                    self.batch_size,
                    rng,
                )
                updates[cid] = self._finish(delta, bound, p)
        elif strategy in ("backdoor_prototypical", "backdoor_tail"):
            updates = {}
            for cid in firing_ids:
                delta = train_backdoor(
                    self.model_spec,
                    global_params,
                    self.honest_shard,
                    self.backdoor_shard,
                    self.attack.blend,
                    self.epochs,
                    self.lr,
                    self.batch_size,
                    rng,
                )
                updates[cid] = self._finish(delta, bound, p)
        elif strategy == "sybil_tail":
            shared = train_backdoor(
                self.model_spec,
                global_params,
                self.honest_shard,
                self.backdoor_shard,
                self.attack.blend,
                self.epochs,
                self.lr,
                self.batch_size,
                rng,
            )
            shared = scale_update(shared, self.attack.boost)
            updates, wrapped = sybil_tail_round(
                shared, firing_ids, bound, self.attack.diversify, p, rng
            )
            if wrapped:
                flags["diversification_wrapped"] = True
        elif strategy == "stat_manip":
            if bound is None:
                raise ConfigError("stat_manip requires a norm-bound defense in force")
            direction = stat_manip_direction(
                self.model_spec, global_params, self.backdoor_shard
            )
            updates = stat_manip_round(firing_ids, bound, direction, p)
            declared = {cid: float(bound) for cid in firing_ids}
            return updates, declared, flags
        else:
            raise ConfigError(f"strategy {strategy!r} produces no updates")

        declared = {cid: p_norm(vec, p) for cid, vec in updates.items()}
        return updates, declared, flags

    def _finish(self, delta: np.ndarray, bound: float | None, p: float) -> np.ndarray:
        """Boost, then clip onto the bound if one is in force."""
        delta = scale_update(delta, self.attack.boost)
        if bound is not None and math.isfinite(bound):
            delta = clip_to_norm(delta, bound, p)
        return delta
