"""Scenario orchestration: run, write outputs, sweep.

Output directory layout for one run:

  effective_config.yaml   all keys materialized; reloadable
  metrics.csv             one row per round (see metrics.CSV_COLUMNS)
  summary.json            end-of-run aggregates and timing
  transcripts/            optional per-round crypto transcripts
"""

from __future__ import annotations

import copy
import os
from pathlib import Path

from byzlab.errors import ConfigError
from byzlab.secagg import verify_envelope
from byzlab.sim import metrics as metrics_mod
from byzlab.sim import transcript as transcript_mod
from byzlab.sim.config import (
    ScenarioConfig,
    config_from_dict,
    config_to_dict,
    dump_config,
)
from byzlab.sim.engine import RoundRecord, RunResult, Simulation

OUTPUT_ROOT_ENV = "BYZLAB_OUT"


def resolve_output_dir(config: ScenarioConfig, override: str | None = None) -> Path:
    if override:
        return Path(override)
    if config.output.dir:
        return Path(config.output.dir)
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return Path(root) / f"seed{config.run.master_seed}"


def _transcript_writer(transcripts_dir: Path, config: ScenarioConfig):
    def on_round(sim: Simulation, record: RoundRecord) -> None:
        info = getattr(sim, "_last_crypto_round", None)
        if not info or info["round_index"] != record.round_index:
            return
        envelopes = info["envelopes"]
        verdicts = [verify_envelope(env, info["bits"], sim.group) for env in envelopes]
        transcript_mod.write_transcript(
            transcripts_dir / f"round_{record.round_index:04d}.json",
            sim.group,
            record.round_index,
            info["bits"],
            config.quantization.bits,
            config.quantization.clip,
            envelopes,
            verdicts,
            info.get("decoding_key", [0] * sim.model_spec.dim),
            info.get("sums"),
            record.abort_reason,
        )

    return on_round


def run_scenario(
    config: ScenarioConfig, out_dir: str | Path | None = None
) -> tuple[RunResult, Path]:
    """Execute all rounds and persist config echo, CSV, and summary."""
    out = resolve_output_dir(config, str(out_dir) if out_dir else None)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    sim = Simulation(config)
    dump_config(config, out / "effective_config.yaml")

    on_round = None
    if config.output.write_transcripts and config.run.mode == "crypto":
        transcripts_dir = out / "transcripts"
        transcripts_dir.mkdir(exist_ok=True)
        on_round = _transcript_writer(transcripts_dir, config)

    result = sim.run(on_round=on_round)
    metrics_mod.write_metrics(result.records, out / "metrics.csv")
    metrics_mod.write_summary(result.summary, out / "summary.json")
    return result, out


def sweep(
    config: ScenarioConfig,
    param: str,
    values: list[str],
    out_root: str | Path | None = None,
) -> list[Path]:
    """Run the scenario once per value of a dotted config key.

    Each run lands in ``<out>/<param>=<value>/`` with its own effective
    config echo.
    """
    if "." not in param:
        raise ConfigError(f"sweep parameter must be section.key, got {param!r}")
    section, key = param.split(".", 1)
    base = config_to_dict(config)
    if section not in base or key not in base[section]:
        raise ConfigError(f"unknown sweep parameter {param!r}")

    root = Path(out_root) if out_root else resolve_output_dir(config) / "sweep"
    out_dirs = []
    for value in values:
        raw = copy.deepcopy(base)
        raw[section][key] = _parse_scalar(value)
        swept = config_from_dict(raw)
        _, out = run_scenario(swept, root / f"{param}={value}")
        out_dirs.append(out)
    return out_dirs


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text
