"""Round-driven simulation engine.

One round follows the standard cycle: sample a cohort, clients train
locally and submit (masked and proven in crypto mode, plain integers in
plaintext mode), the server verifies and aggregates, the global model
moves, and metrics land in a RoundRecord.

Both modes share the exact same integer pipeline on the client side --
clip, quantize onto the fixed grid, clamp into the round's power-of-two
bound window -- and the server always reduces accepted submissions by
integer summation before dequantizing. That makes plaintext and crypto
runs of an all-honest scenario bit-identical, which the acceptance
suite checks via model checksums.

Norm-bound rounds announce a bound to clients before submissions (the
previous round's computed bound; initially the configured one). The
freshly computed median bound of the current round is recorded and,
in plaintext mode, applied by the filter; in crypto mode enforcement is
the range proof at the announced bound's bit width, and any failed
verification aborts the round (there is no dropout or exclusion path
under pairwise masks).
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from byzlab import attacks as atk
from byzlab import secagg
from byzlab.aggregators import (
    AggregatorSpec,
    UpdateHistory,
    aggregate,
    dynamic_bound,
)
from byzlab.crypto.groups import GroupParams, group_pow, setup_group
from byzlab.errors import ConfigError, ProtocolAbort
from byzlab.model import data as data_mod
from byzlab.model import nets
from byzlab.model.quantize import (
    QuantSpec,
    bits_for_bound,
    clamp_to_window,
    from_committed_sum,
    quantize,
    signed_to_float,
    to_committed,
    window_bound,
)
from byzlab.model.vectors import clip_to_norm, p_norm
from byzlab.prng import CounterStream
from byzlab.sim import seeds
from byzlab.sim.config import ScenarioConfig


@dataclass
class RoundRecord:
    round_index: int
    mode: str
    sampled: list[int]
    malicious: list[int]  # sampled ids with a non-honest role
    substituted: bool  # fixed-frequency swap-in happened
    declared_norms: dict[int, float]
    announced_bound: float | None
    bound: float | None  # bound computed this round (recorded B_t)
    bits: int
    median_norm: float | None
    accepted: list[int]
    rejected: dict[int, str]
    weights: dict[int, float]
    empty_round: bool
    aborted: bool
    abort_reason: str | None
    main_accuracy: float
    backdoor_accuracy: float | None
    checksum: str
    wall_ms: float
    flags: dict = field(default_factory=dict)


@dataclass
class RunResult:
    records: list[RoundRecord]
    final_params: np.ndarray
    summary: dict
    aborted: bool  # at least one round aborted


def sample_clients(
    ids: list[int],
    size: int,
    rng: np.random.Generator,
    ensure_one_of: list[int] | None = None,
) -> tuple[list[int], bool]:
    """Uniform sample without replacement, ascending ids.

    If ``ensure_one_of`` is given and none of those ids landed in the
    sample, the lowest such id replaces the largest sampled id outside
    the set (the fixed-frequency guarantee); the substitution is
    reported so the round record can flag it.
    """
    if size > len(ids):
        raise ConfigError(f"cannot sample {size} of {len(ids)} clients")
    pool = sorted(ids)
    chosen = sorted(int(x) for x in rng.choice(pool, size=size, replace=False))
    substituted = False
    if ensure_one_of and not set(chosen) & set(ensure_one_of):
        victim = max(c for c in chosen if c not in ensure_one_of)
        chosen.remove(victim)
        chosen.append(min(ensure_one_of))
        chosen.sort()
        substituted = True
    return chosen, substituted


def model_checksum(params: np.ndarray) -> str:
    return hashlib.sha256(
        np.ascontiguousarray(params, dtype=np.float64).tobytes()
    ).hexdigest()[:16]


class Simulation:
    """Deterministic state machine for one scenario run."""

    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self.master = config.run.master_seed
        self.model_spec = config.model
        self.quant: QuantSpec = config.quantization
        self.agg_spec: AggregatorSpec = config.aggregator
        self.attack = config.attack
        self.mode = config.run.mode
        self.group: GroupParams | None = (
            setup_group(config.run.group_profile) if self.mode == "crypto" else None
        )

        self._build_data()
        self._build_population()

        self.global_params = nets.init_params(self.model_spec)
        self.history = UpdateHistory()
        self.records: list[RoundRecord] = []
        # bound announced to clients next round; updated by dynamic rule
        self.announced_bound: float | None = (
            self.agg_spec.bound if self.agg_spec.uses_norm_bound else None
        )
        self._spawned_total = 0

    # -- setup ------------------------------------------------------------

    def _build_data(self) -> None:
        cfg = self.config
        if cfg.data.source == "synthetic":
            full = data_mod.gen_synthetic(
                features=cfg.model.features,
                classes=cfg.model.classes,
                samples=cfg.data.samples + cfg.data.eval_samples,
                tail_fraction=cfg.data.tail_fraction,
                seed=seeds.child_seed(self.master, "data"),
                cluster_spread=cfg.data.cluster_spread,
                backdoor_target=cfg.data.backdoor_target,
            )
            self.train_set, self.eval_set = data_mod.split(full, cfg.data.samples)
        elif cfg.data.source == "digits":
            full = data_mod.load_digits_dataset(
                classes=cfg.model.classes,
                tail_fraction=cfg.data.tail_fraction,
                seed=seeds.child_seed(self.master, "data"),
                backdoor_target=cfg.data.backdoor_target,
            )
            cut = max(1, int(len(full) * 0.7))
            self.train_set, self.eval_set = data_mod.split(full, cut)
        else:
            full = data_mod.load_dataset(cfg.data.path)
            if full.features.shape[1] != cfg.model.features:
                raise ConfigError(
                    f"{cfg.data.path}: feature count {full.features.shape[1]} "
                    f"does not match model.features {cfg.model.features}"
                )
            cut = max(1, int(len(full) * 0.7))
            self.train_set, self.eval_set = data_mod.split(full, cut)

        self.backdoor_target = (
            self.attack.target_label
            if self.attack.target_label is not None
            else self.train_set.backdoor_target
        )
        if not 0 <= self.backdoor_target < cfg.model.classes:
            raise ConfigError(f"backdoor target {self.backdoor_target} out of range")

        # the eval view whose "tail" slice is what the active attack targets
        if self.attack.strategy in ("backdoor_prototypical", "label_flip", "scale"):
            mask = (self.eval_set.labels == self.attack.flip_from) & (
                ~self.eval_set.tail_mask
            )
            self.backdoor_view = self.eval_set.with_tail_mask(
                mask, self.backdoor_target
            )
        else:
            self.backdoor_view = self.eval_set.with_tail_mask(
                self.eval_set.tail_mask, self.backdoor_target
            )

    def _build_population(self) -> None:
        cfg = self.config
        n_honest, n_adv = cfg.population.honest, cfg.population.adversaries
        self.population: list[atk.ClientIdentity] = [
            atk.ClientIdentity(id=i, role=atk.ROLE_HONEST) for i in range(n_honest)
        ] + [
            atk.ClientIdentity(id=n_honest + j, role=atk.ROLE_ADVERSARY)
            for j in range(n_adv)
        ]
        shards = data_mod.shard(self.train_set, max(1, n_honest + n_adv))
        self.shards = {c.id: shards[k] for k, c in enumerate(self.population)}

        self.controllers: dict[int, atk.AdversaryController] = {}
        if self.attack.strategy != "none":
            for j in range(n_adv):
                adv_id = n_honest + j
                self.controllers[adv_id] = atk.AdversaryController(
                    adversary_id=adv_id,
                    attack=self.attack,
                    model_spec=self.model_spec,
                    honest_shard=self.shards[adv_id],
                    backdoor_shard=self._build_backdoor_shard(),
                    epochs=cfg.training.epochs,
                    lr=cfg.training.lr,
                    batch_size=cfg.training.batch_size,
                )

    def _build_backdoor_shard(self) -> data_mod.Dataset:
        """The adversary's poisoned data, labeled with its target class."""
        train = self.train_set
        if self.attack.strategy in ("backdoor_tail", "sybil_tail", "stat_manip"):
            rows = np.flatnonzero(train.tail_mask)
        else:
            rows = np.flatnonzero(
                (train.labels == self.attack.flip_from) & (~train.tail_mask)
            )
        if len(rows) == 0:
            raise ConfigError("the attack's source slice of the training set is empty")
        shard = train.subset(rows)
        features = shard.features
        if self.attack.extra_tail_fraction > 0:
            # artificial-tail-target hook: jittered copies enlarging the
            # adversary's dataset; effect is measured, never assumed
            rng = seeds.rng_for(self.master, "artificial-tail")
            extra = int(round(self.attack.extra_tail_fraction * len(rows)))
            if extra:
                picks = rng.integers(0, len(rows), size=extra)
                jitter = self.config.data.cluster_spread * rng.standard_normal(
                    (extra, features.shape[1])
                )
                features = np.concatenate([features, features[picks] + jitter])
        labels = np.full(len(features), self.backdoor_target, dtype=np.int64)
        return data_mod.Dataset(
            features=features,
            labels=labels,
            tail_mask=np.ones(len(features), dtype=bool),
            backdoor_target=self.backdoor_target,
        )

    # -- per-round pieces --------------------------------------------------

    def _spawn_due_sybils(self, round_index: int) -> None:
        due = atk.sybils_due(self.attack, round_index)
        if due <= self._spawned_total or not self.controllers:
            return
        adv_id = min(self.controllers)  # sybils belong to the lowest adversary
        self.population = atk.spawn_sybils(
            adv_id, due - self._spawned_total, round_index, self.population
        )
        self._spawned_total = due

    def _client_quanta(self, delta: np.ndarray, bits: int) -> np.ndarray:
        """Shared client-side integer pipeline: clip to grid, quantize, window."""
        clipped = np.clip(delta, -self.quant.clip, self.quant.clip)
        signed = quantize(clipped, self.quant).signed()
        return clamp_to_window(signed, bits)

    def _honest_delta(self, client_id: int, round_index: int) -> np.ndarray:
        shard = self.shards[client_id]
        rng = seeds.rng_for(self.master, "train", client_id, round_index)
        delta = nets.local_train(
            self.model_spec,
            self.global_params,
            shard.features,
            shard.labels,
            self.config.training.epochs,
            self.config.training.lr,
            self.config.training.batch_size,
            rng,
        )
        if self.announced_bound is not None:
            delta = clip_to_norm(delta, self.announced_bound, self.agg_spec.p)
        return delta

    def _collect_submissions(
        self, round_index: int, sampled: list[int], bits: int
    ) -> tuple[dict[int, np.ndarray], dict[int, float], dict]:
        """Quantized signed updates and declared norms for every sampled id."""
        roles = {c.id: c for c in self.population}
        controlled = [cid for cid in sampled if roles[cid].role != atk.ROLE_HONEST]
        firing = atk.schedule_attack(self.attack, round_index, controlled)
        flags: dict = {}

        float_updates: dict[int, np.ndarray] = {}
        declared_override: dict[int, float] = {}
        for cid in sampled:
            if cid in firing:
                continue
            if roles[cid].role == atk.ROLE_HONEST:
                float_updates[cid] = self._honest_delta(cid, round_index)
            else:
                # controlled client lying low: behave like an honest client
                # on the controller's honest shard
                owner = roles[cid].controller if roles[cid].role == atk.ROLE_SYBIL else cid
                shard = self.shards.get(cid, self.shards[owner])
                rng = seeds.rng_for(self.master, "train", cid, round_index)
                delta = nets.local_train(
                    self.model_spec,
                    self.global_params,
                    shard.features,
                    shard.labels,
                    self.config.training.epochs,
                    self.config.training.lr,
                    self.config.training.batch_size,
                    rng,
                )
                if self.announced_bound is not None:
                    delta = clip_to_norm(delta, self.announced_bound, self.agg_spec.p)
                float_updates[cid] = delta

        if firing:
            by_controller: dict[int, list[int]] = {}
            for cid in firing:
                owner = roles[cid].controller if roles[cid].role == atk.ROLE_SYBIL else cid
                by_controller.setdefault(owner, []).append(cid)
            for owner, ids in sorted(by_controller.items()):
                controller = self.controllers[owner]
                rng = seeds.rng_for(self.master, "attack", owner, round_index)
                updates, declared, atk_flags = controller.updates_for_round(
                    round_index,
                    sorted(ids),
                    self.global_params,
                    self.announced_bound,
                    self.agg_spec.p,
                    rng,
                )
                float_updates.update(updates)
                declared_override.update(declared)
                flags.update(atk_flags)

        quanta: dict[int, np.ndarray] = {}
        norms: dict[int, float] = {}
        for cid in sampled:
            q = self._client_quanta(float_updates[cid], bits)
            quanta[cid] = q
            norms[cid] = declared_override.get(
                cid, p_norm(signed_to_float(q, self.quant), self.agg_spec.p)
            )
        if firing:
            flags["firing"] = sorted(firing)
        return quanta, norms, flags

    # -- round execution ---------------------------------------------------

    def execute_round(self, round_index: int) -> RoundRecord:
        started = time.perf_counter()
        self._spawn_due_sybils(round_index)
        roles = {c.id: c for c in self.population}
        ids = sorted(roles)

        ensure = None
        if (
            self.attack.strategy != "none"
            and self.attack.schedule == "fixed_frequency"
            and round_index >= self.attack.start_round
        ):
            ensure = [cid for cid in ids if roles[cid].role != atk.ROLE_HONEST]
        rng = seeds.rng_for(self.master, "sample", round_index)
        sampled, substituted = sample_clients(
            ids, self.config.run.sample_size, rng, ensure
        )
        malicious = [cid for cid in sampled if roles[cid].role != atk.ROLE_HONEST]

        bits = (
            bits_for_bound(self.announced_bound, self.quant)
            if self.agg_spec.uses_norm_bound
            else self.quant.bits
        )
        announced = self.announced_bound
        quanta, declared, flags = self._collect_submissions(round_index, sampled, bits)
        median_norm = float(np.median([declared[cid] for cid in sampled]))

        try:
            if self.mode == "crypto":
                delta, info = self._server_crypto(round_index, sampled, quanta, declared, bits)
            else:
                delta, info = self._server_plaintext(sampled, quanta, declared)
            aborted, abort_reason = False, None
        except ProtocolAbort as exc:
            delta = np.zeros(self.model_spec.dim)
            info = {
                "bound": self._fresh_bound(declared, sampled),
                "accepted": [],
                "rejected": dict(getattr(exc, "evidence", {}).get("rejected", {})),
                "weights": {},
                "empty_round": False,
            }
            aborted, abort_reason = True, str(exc)
            flags["abort_evidence"] = getattr(exc, "evidence", {})

        if not aborted:
            self.global_params = self.global_params + delta
        if self.agg_spec.kind == "norm_bound_dynamic" and info["bound"] is not None:
            self.announced_bound = info["bound"]

        main_acc = nets.evaluate(self.model_spec, self.global_params, self.eval_set)
        backdoor_acc = (
            nets.backdoor_eval(self.model_spec, self.global_params, self.backdoor_view)
            if self.backdoor_view.tail_mask.any()
            else None
        )

        record = RoundRecord(
            round_index=round_index,
            mode=self.mode,
            sampled=sampled,
            malicious=malicious,
            substituted=substituted,
            declared_norms={cid: declared[cid] for cid in sampled},
            announced_bound=announced,
            bound=info["bound"],
            bits=bits,
            median_norm=median_norm,
            accepted=info["accepted"],
            rejected=info["rejected"],
            weights=info["weights"],
            empty_round=info["empty_round"],
            aborted=aborted,
            abort_reason=abort_reason,
            main_accuracy=main_acc,
            backdoor_accuracy=backdoor_acc,
            checksum=model_checksum(self.global_params),
            wall_ms=(time.perf_counter() - started) * 1000.0,
            flags=flags,
        )
        self.records.append(record)
        return record

    def _fresh_bound(self, declared: dict[int, float], sampled: list[int]) -> float | None:
        if not self.agg_spec.uses_norm_bound:
            return None
        if self.agg_spec.kind == "norm_bound_static":
            return self.agg_spec.bound
        return dynamic_bound([declared[cid] for cid in sampled], self.agg_spec.multiplier)

    def _quant_slack(self, dim: int) -> float:
        """Half-step norm inflation rounding can add on top of a float bound."""
        half = 0.5 * self.quant.step
        return half * math.sqrt(dim) if self.agg_spec.p == 2 else half

    def _server_plaintext(
        self,
        sampled: list[int],
        quanta: dict[int, np.ndarray],
        declared: dict[int, float],
    ) -> tuple[np.ndarray, dict]:
        floats = {
            cid: signed_to_float(quanta[cid], self.quant) for cid in sampled
        }
        updates = [(cid, floats[cid]) for cid in sampled]
        spec = self.agg_spec
        if spec.uses_norm_bound:
            # compose bound -> filter -> mean over survivors directly, with
            # integer summation so reject-mode rounds match crypto rounds bit
            # for bit; the filter tolerates the half-step norm inflation that
            # rounding onto the grid can add to a float-clipped update
            bound = self._fresh_bound(declared, sampled)
            slack = self._quant_slack(self.model_spec.dim)
            if spec.mode == "reject":
                accepted = [cid for cid in sampled if declared[cid] <= bound + slack]
            else:
                accepted = list(sampled)
            rejected = {cid: "norm" for cid in sampled if cid not in accepted}
            if not accepted:
                delta = np.zeros(self.model_spec.dim)
                info = {
                    "bound": bound,
                    "accepted": [],
                    "rejected": rejected,
                    "weights": {},
                    "empty_round": True,
                }
            else:
                if spec.mode == "clip":
                    clipped = [
                        clip_to_norm(floats[cid], bound, spec.p) for cid in accepted
                    ]
                    delta = np.stack(clipped).mean(axis=0)
                else:
                    total = np.sum(
                        np.stack([quanta[cid] for cid in accepted]), axis=0
                    )
                    delta = signed_to_float(total, self.quant) / len(accepted)
                info = {
                    "bound": bound,
                    "accepted": sorted(accepted),
                    "rejected": rejected,
                    "weights": {cid: 1.0 for cid in accepted},
                    "empty_round": False,
                }
        elif spec.kind == "fedavg":
            total = np.sum(np.stack([quanta[cid] for cid in sampled]), axis=0)
            delta = signed_to_float(total, self.quant) / len(sampled)
            info = {
                "bound": None,
                "accepted": sorted(sampled),
                "rejected": {},
                "weights": {cid: 1.0 for cid in sampled},
                "empty_round": False,
            }
        else:
            result = aggregate(updates, declared, spec, history=self.history)
            delta = result.delta
            info = {
                "bound": result.bound,
                "accepted": result.accepted,
                "rejected": result.rejected,
                "weights": result.weights,
                "empty_round": result.empty_round,
            }
        for cid in sampled:
            self.history.add(cid, floats[cid])
        return delta, info

    def _server_crypto(
        self,
        round_index: int,
        sampled: list[int],
        quanta: dict[int, np.ndarray],
        declared: dict[int, float],
        bits: int,
    ) -> tuple[np.ndarray, dict]:
        group = self.group
        assert group is not None
        d = self.model_spec.dim

        # per-round ephemeral DH keys and pairwise seeds over the cohort
        secrets_: dict[int, int] = {}
        registry = secagg.RoundKeys(group)
        for cid in sampled:
            stream = CounterStream(seeds.stream_seed(self.master, "dh", cid, round_index))
            a = stream.next_scalar(group.q)
            secrets_[cid] = a
            registry.register(cid, group_pow(group.g, a, group))

        envelopes = []
        for cid in sampled:
            pair_seeds = {}
            for peer in sampled:
                if peer == cid:
                    continue
                seed = registry.derive(secrets_[cid], cid, peer, round_index)
                pair_seeds[seed.pair] = seed
            mask = secagg.compute_client_mask(cid, sampled, pair_seeds, d, group.q)
            committed = to_committed(quanta[cid], bits)
            envelopes.append(
                secagg.build_envelope(
                    committed,
                    mask,
                    bits,
                    group,
                    declared[cid],
                    cid,
                    round_index,
                    CounterStream(
                        seeds.stream_seed(self.master, "proof", cid, round_index)
                    ),
                )
            )

        self._last_crypto_round = {
            "round_index": round_index,
            "bits": bits,
            "envelopes": envelopes,
        }

        verdicts = [secagg.verify_envelope(env, bits, group) for env in envelopes]
        rejected = {
            env.client_id: f"{v.reason}"
            + (f"@{v.coordinate}" if v.coordinate is not None else "")
            for env, v in zip(envelopes, verdicts)
            if not v.accepted
        }
        bound = self._fresh_bound(declared, sampled)
        if self.announced_bound is not None:
            slack = self._quant_slack(d)
            for env in envelopes:
                if env.declared_norm > self.announced_bound + slack:
                    rejected.setdefault(env.client_id, "norm")
        if rejected:
            # no dropout recovery: masked sums cannot exclude a client
            raise ProtocolAbort(
                "envelope verification failed; aborting masked round",
                evidence={"rejected": rejected},
            )

        decoding_key = [0] * d  # pairwise masks cancel exactly
        sums = secagg.aggregate_round(envelopes, decoding_key, group, verdicts)
        signed_total = from_committed_sum(sums, len(envelopes), bits)
        delta = signed_to_float(signed_total, self.quant) / len(envelopes)
        self._last_crypto_round["decoding_key"] = decoding_key
        self._last_crypto_round["sums"] = sums
        info = {
            "bound": bound,
            "accepted": sorted(sampled),
            "rejected": {},
            "weights": {cid: 1.0 for cid in sampled},
            "empty_round": False,
        }
        return delta, info

    # -- full run ------------------------------------------------------------

    def run(self, on_round=None) -> RunResult:
        """Execute all configured rounds; ``on_round(sim, record)`` runs after each."""
        any_abort = False
        for t in range(1, self.config.run.rounds + 1):
            record = self.execute_round(t)
            if on_round is not None:
                on_round(self, record)
            if record.aborted:
                any_abort = True
                if not self.config.run.continue_after_abort:
                    break
        final_main = (
            self.records[-1].main_accuracy
            if self.records
            else nets.evaluate(self.model_spec, self.global_params, self.eval_set)
        )
        final_backdoor = self.records[-1].backdoor_accuracy if self.records else None
        time_to_backdoor = next(
            (
                r.round_index
                for r in self.records
                if r.backdoor_accuracy is not None and r.backdoor_accuracy >= 0.5
            ),
            None,
        )
        summary = {
            "rounds_run": len(self.records),
            "final_main_accuracy": final_main,
            "final_backdoor_accuracy": final_backdoor,
            "time_to_backdoor": time_to_backdoor,
            "aborted_rounds": sum(r.aborted for r in self.records),
            "final_checksum": model_checksum(self.global_params),
            "mean_round_ms": (
                float(np.mean([r.wall_ms for r in self.records])) if self.records else 0.0
            ),
            "realized_alpha": (
                float(np.mean([len(r.malicious) / len(r.sampled) for r in self.records]))
                if self.records
                else 0.0
            ),
        }
        return RunResult(
            records=self.records,
            final_params=self.global_params,
            summary=summary,
            aborted=any_abort,
        )
