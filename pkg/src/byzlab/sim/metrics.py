"""CSV metrics and the run summary.

One CSV row per round, floats at 6 decimals, empty cells for absent
values (no bound rule, no backdoor slice). The writer is fully
deterministic: rerunning a scenario with the same config and seed
produces byte-identical output.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from byzlab.sim.engine import RoundRecord

CSV_COLUMNS = [
    "round",
    "main_acc",
    "backdoor_acc",
    "bound",
    "median_norm",
    "n_sampled",
    "n_malicious",
    "n_rejected",
    "aborted",
    "mode",
    "checksum",
]


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def record_row(record: RoundRecord) -> list[str]:
    return [
        str(record.round_index),
        _fmt(record.main_accuracy),
        _fmt(record.backdoor_accuracy),
        _fmt(record.bound),
        _fmt(record.median_norm),
        str(len(record.sampled)),
        str(len(record.malicious)),
        str(len(record.rejected)),
        str(int(record.aborted)),
        record.mode,
        record.checksum,
    ]


def write_metrics(records: list[RoundRecord], path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow(record_row(record))


def read_metrics(path: str | Path) -> list[dict]:
    """Parse a metrics CSV back into typed per-round dicts."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            rows.append(
                {
                    "round": int(raw["round"]),
                    "main_acc": float(raw["main_acc"]),
                    "backdoor_acc": (
                        None if raw["backdoor_acc"] == "" else float(raw["backdoor_acc"])
                    ),
                    "bound": None if raw["bound"] == "" else float(raw["bound"]),
                    "median_norm": (
                        None if raw["median_norm"] == "" else float(raw["median_norm"])
                    ),
                    "n_sampled": int(raw["n_sampled"]),
                    "n_malicious": int(raw["n_malicious"]),
                    "n_rejected": int(raw["n_rejected"]),
                    "aborted": bool(int(raw["aborted"])),
                    "mode": raw["mode"],
                    "checksum": raw["checksum"],
                }
            )
        return rows


def write_summary(summary: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
