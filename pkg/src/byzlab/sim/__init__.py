"""Simulation harness: configs, the round engine, metrics, transcripts, CLI."""

from byzlab.sim.config import ScenarioConfig, config_from_dict, dump_config, load_config
from byzlab.sim.engine import RoundRecord, RunResult, Simulation, sample_clients
from byzlab.sim.metrics import read_metrics, write_metrics
from byzlab.sim.runner import run_scenario, sweep
from byzlab.sim.transcript import verify_transcript, write_transcript

__all__ = [
    "ScenarioConfig",
    "config_from_dict",
    "dump_config",
    "load_config",
    "RoundRecord",
    "RunResult",
    "Simulation",
    "sample_clients",
    "read_metrics",
    "write_metrics",
    "run_scenario",
    "sweep",
    "verify_transcript",
    "write_transcript",
]
