"""Scenario configuration: YAML files with strict validation.

A scenario file is a nested-table key/value document. Every key has a
default; unknown keys are rejected with their full path so typos fail
fast. ``load_config`` returns a fully materialized ``ScenarioConfig``
and ``dump_config`` writes an effective-config echo that loads back to
an identical object.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from byzlab.aggregators import SUM_COMPATIBLE_KINDS, AggregatorSpec
from byzlab.attacks import AttackSpec, sybils_due
from byzlab.crypto.groups import setup_group
from byzlab.errors import ConfigError
from byzlab.model.nets import ModelSpec
from byzlab.model.quantize import QuantSpec


@dataclass
class RunSpec:
    master_seed: int = 1
    rounds: int = 30
    sample_size: int = 10
    mode: str = "plaintext"  # plaintext | crypto
    group_profile: str = "standard"
    continue_after_abort: bool = True


@dataclass
class PopulationSpec:
    honest: int = 20
    adversaries: int = 1


@dataclass
class DataSpec:
    source: str = "synthetic"  # synthetic | digits | file
    path: str | None = None  # cache file for source=file
    samples: int = 6000
    eval_samples: int = 2000
    tail_fraction: float = 0.02
    cluster_spread: float = 1.0
    backdoor_target: int | None = None  # default: classes - 1


@dataclass
class TrainSpec:
    epochs: int = 1
    lr: float = 0.5
    batch_size: int = 64


@dataclass
class OutputSpec:
    dir: str | None = None  # default: $BYZLAB_OUT or ./runs
    write_transcripts: bool = False


@dataclass
class ScenarioConfig:
    run: RunSpec = field(default_factory=RunSpec)
    population: PopulationSpec = field(default_factory=PopulationSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    data: DataSpec = field(default_factory=DataSpec)
    training: TrainSpec = field(default_factory=TrainSpec)
    quantization: QuantSpec = field(default_factory=lambda: QuantSpec(bits=16, clip=1.0))
    aggregator: AggregatorSpec = field(default_factory=AggregatorSpec)
    attack: AttackSpec = field(default_factory=AttackSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def validate(self) -> None:
        r, pop = self.run, self.population
        if r.rounds < 0:
            raise ConfigError("run.rounds must be >= 0")
        if r.mode not in ("plaintext", "crypto"):
            raise ConfigError(f"run.mode must be plaintext or crypto, got {r.mode!r}")
        if pop.honest < 0 or pop.adversaries < 0 or pop.honest + pop.adversaries < 1:
            raise ConfigError("population must contain at least one client")
        # sybils due by round 1 already exist when round 1 samples, and the
        # population only grows after that
        round_one_pop = pop.honest + pop.adversaries + (
            sybils_due(self.attack, 1) if self.attack.strategy != "none" else 0
        )
        if r.sample_size < 1 or r.sample_size > round_one_pop:
            raise ConfigError(
                f"run.sample_size {r.sample_size} outside [1, round-1 population "
                f"{round_one_pop}]"
            )

        self.aggregator.validate()
        self.attack.validate()

        if self.data.source not in ("synthetic", "digits", "file"):
            raise ConfigError(f"data.source {self.data.source!r} unknown")
        if self.data.source == "file" and not self.data.path:
            raise ConfigError("data.path is required when data.source is file")
        if self.data.source == "synthetic":
            if self.data.samples + self.data.eval_samples < 200:
                raise ConfigError("data.samples + data.eval_samples must be >= 200")
            if not 0.0 <= self.data.tail_fraction <= 0.1:
                raise ConfigError("data.tail_fraction must be in [0, 0.1]")
        if self.data.backdoor_target is not None and not (
            0 <= self.data.backdoor_target < self.model.classes
        ):
            raise ConfigError("data.backdoor_target outside the class range")

        if self.training.epochs < 0 or self.training.lr < 0:
            raise ConfigError("training.epochs and training.lr must be >= 0")
        if self.training.batch_size < 1:
            raise ConfigError("training.batch_size must be >= 1")

        if self.attack.strategy != "none":
            if pop.adversaries < 1:
                raise ConfigError("an attack needs at least one adversary")
            if (
                self.attack.schedule == "single_shot"
                and self.attack.single_shot_round > r.rounds
            ):
                raise ConfigError(
                    f"attack.single_shot_round {self.attack.single_shot_round} "
                    f"outside [1, {r.rounds}]"
                )
            if self.attack.strategy == "stat_manip" and self.aggregator.kind != (
                "norm_bound_dynamic"
            ):
                raise ConfigError(
                    "stat_manip manipulates the dynamic bound; set "
                    "aggregator.kind = norm_bound_dynamic"
                )

        if r.mode == "crypto":
            if self.aggregator.kind not in SUM_COMPATIBLE_KINDS:
                raise ConfigError(
                    f"aggregator.kind {self.aggregator.kind!r} needs individual "
                    "updates and cannot run under masked aggregation; use one of "
                    f"{SUM_COMPATIBLE_KINDS} or run.mode = plaintext"
                )
            if self.aggregator.uses_norm_bound and not math.isinf(self.aggregator.p):
                raise ConfigError(
                    "masked aggregation enforces per-coordinate bounds only; "
                    "aggregator.p must be inf in crypto mode"
                )
            if self.aggregator.mode != "reject":
                raise ConfigError(
                    "a failed proof cannot be clipped; aggregator.mode must be "
                    "reject in crypto mode"
                )
            group = setup_group(r.group_profile)
            # decoding needs headroom: sum of n committed values must stay < q
            max_participants = (
                pop.honest + pop.adversaries + self.attack.sybil_count
            )
            if max_participants << self.quantization.bits >= group.q:
                raise ConfigError(
                    f"group order of profile {r.group_profile!r} too small for "
                    f"{max_participants} clients at {self.quantization.bits} bits"
                )


# ---------------------------------------------------------------------------
# Loading / dumping
# ---------------------------------------------------------------------------

_SECTIONS = {
    "run": RunSpec,
    "population": PopulationSpec,
    "model": ModelSpec,
    "data": DataSpec,
    "training": TrainSpec,
    "quantization": QuantSpec,
    "aggregator": AggregatorSpec,
    "attack": AttackSpec,
    "output": OutputSpec,
}


def _coerce_p(value):
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return math.inf
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"aggregator.p must be 2 or inf, got {value!r}") from None
    return float(value)


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Build and validate a config from a nested dict (strict keys)."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping of sections")
    for section in raw:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")

    kwargs = {}
    for section, cls in _SECTIONS.items():
        table = raw.get(section, {}) or {}
        if not isinstance(table, dict):
            raise ConfigError(f"config section {section!r} must be a table")
        known = {f.name for f in fields(cls)}
        for key in table:
            if key not in known:
                raise ConfigError(f"unknown config key {section}.{key}")
        values = dict(table)
        if section == "aggregator" and "p" in values:
            values["p"] = _coerce_p(values["p"])
        try:
            kwargs[section] = cls(**values)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value in section {section!r}: {exc}") from exc

    config = ScenarioConfig(**kwargs)
    config.validate()
    return config


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(config: ScenarioConfig) -> dict:
    """All fields, defaults materialized; inverse of config_from_dict."""
    out = {}
    for section in _SECTIONS:
        out[section] = asdict(getattr(config, section))
    return out


def dump_config(config: ScenarioConfig, path: str | Path) -> None:
    """Write the effective config; loading the dump reproduces the config."""
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=True)
