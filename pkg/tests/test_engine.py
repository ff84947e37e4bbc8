"""Round engine: sampling, determinism, accounting, dual-mode equality,
abort handling."""

import numpy as np
import pytest

from byzlab.errors import ConfigError
from byzlab.sim.config import config_from_dict
from byzlab.sim.engine import Simulation, sample_clients
from byzlab.sim import seeds


def _config(**over):
    base = {
        "run": {"master_seed": 11, "rounds": 4, "sample_size": 4, "mode": "plaintext"},
        "population": {"honest": 8, "adversaries": 0},
        "data": {"samples": 1200, "eval_samples": 400},
        "training": {"epochs": 1, "lr": 0.5, "batch_size": 32},
        "attack": {"strategy": "none"},
    }
    for section, table in over.items():
        base.setdefault(section, {}).update(table)
    return config_from_dict(base)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_sample_everyone():
    ids = list(range(6))
    sampled, substituted = sample_clients(ids, 6, np.random.default_rng(0))
    assert sampled == ids and not substituted


def test_sample_deterministic_per_stream():
    ids = list(range(50))
    a, _ = sample_clients(ids, 10, seeds.rng_for(3, "sample", 7))
    b, _ = sample_clients(ids, 10, seeds.rng_for(3, "sample", 7))
    assert a == b
    c, _ = sample_clients(ids, 10, seeds.rng_for(3, "sample", 8))
    assert a != c


def test_sample_too_large_errors():
    with pytest.raises(ConfigError):
        sample_clients([1, 2], 3, np.random.default_rng(0))


def test_sample_inclusion_frequency():
    ids = list(range(40))
    rng = np.random.default_rng(5)
    hits = sum(17 in sample_clients(ids, 8, rng)[0] for _ in range(10_000))
    assert abs(hits / 10_000 - 8 / 40) <= 0.02


def test_sample_substitution_flagged():
    ids = list(range(10))
    rng = np.random.default_rng(1)
    seen_substituted = False
    for _ in range(50):
        sampled, substituted = sample_clients(ids, 3, rng, ensure_one_of=[9])
        assert 9 in sampled
        seen_substituted = seen_substituted or substituted
    assert seen_substituted


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


def test_zero_rounds_returns_initial_model():
    sim = Simulation(_config(run={"rounds": 0}))
    result = sim.run()
    assert result.records == []
    np.testing.assert_array_equal(result.final_params, np.zeros(sim.model_spec.dim))


def test_full_run_determinism():
    r1 = Simulation(_config()).run()
    r2 = Simulation(_config()).run()
    assert [rec.checksum for rec in r1.records] == [rec.checksum for rec in r2.records]
    assert [rec.sampled for rec in r1.records] == [rec.sampled for rec in r2.records]
    r3 = Simulation(_config(run={"master_seed": 12})).run()
    assert [rec.checksum for rec in r1.records] != [rec.checksum for rec in r3.records]


def test_accounting_invariants():
    config = _config(
        population={"honest": 8, "adversaries": 1},
        attack={"strategy": "backdoor_tail", "schedule": "continuous"},
        aggregator={"kind": "norm_bound_static", "bound": 0.5, "p": "inf"},
        run={"rounds": 6, "sample_size": 5},
    )
    result = Simulation(config).run()
    for rec in result.records:
        assert len(rec.sampled) == 5
        assert sorted(rec.accepted) + sorted(rec.rejected) == [] or (
            set(rec.accepted) | set(rec.rejected) == set(rec.sampled)
        )
        assert set(rec.accepted) & set(rec.rejected) == set()
        assert set(rec.malicious) <= set(rec.sampled)
        assert rec.bits >= 1


def test_population_nondecreasing_under_spawn():
    config = _config(
        population={"honest": 6, "adversaries": 1},
        attack={
            "strategy": "sybil_tail",
            "sybil_count": 4,
            "spawn_schedule": "ramp",
            "spawn_round": 1,
            "ramp_interval": 2,
        },
        aggregator={"kind": "norm_bound_static", "bound": 0.5, "p": "inf"},
        run={"rounds": 6, "sample_size": 4},
    )
    sim = Simulation(config)
    sizes = []
    for t in range(1, 7):
        sim.execute_round(t)
        sizes.append(len(sim.population))
    assert sizes == sorted(sizes)
    assert sizes[-1] == 7 + 4


def test_dual_mode_checksums_match():
    base = dict(
        population={"honest": 6, "adversaries": 0},
        data={"samples": 600, "eval_samples": 200},
        run={"rounds": 2, "sample_size": 3, "master_seed": 21},
    )
    plain = Simulation(_config(**base)).run()
    crypto_cfg = dict(base)
    crypto_cfg["run"] = dict(base["run"], mode="crypto")
    crypto = Simulation(_config(**crypto_cfg)).run()
    assert [r.checksum for r in plain.records] == [r.checksum for r in crypto.records]


def test_crypto_abort_recorded_and_model_unchanged(monkeypatch):
    config = _config(
        run={"rounds": 1, "sample_size": 3, "mode": "crypto"},
        population={"honest": 6, "adversaries": 0},
        data={"samples": 600, "eval_samples": 200},
    )
    sim = Simulation(config)

    import byzlab.secagg as secagg_mod
    from byzlab.secagg import EnvelopeVerdict

    monkeypatch.setattr(
        sim, "_server_crypto",
        lambda *a, **k: (_ for _ in ()).throw(
            __import__("byzlab.errors", fromlist=["ProtocolAbort"]).ProtocolAbort(
                "forced", evidence={"rejected": {0: "range@1"}}
            )
        ),
    )
    before = sim.global_params.copy()
    record = sim.execute_round(1)
    assert record.aborted
    assert record.abort_reason == "forced"
    np.testing.assert_array_equal(sim.global_params, before)


def test_fixed_frequency_every_round_has_malicious():
    config = _config(
        population={"honest": 12, "adversaries": 1},
        attack={"strategy": "backdoor_tail", "schedule": "fixed_frequency"},
        aggregator={"kind": "norm_bound_static", "bound": 0.5, "p": "inf"},
        run={"rounds": 5, "sample_size": 3},
    )
    result = Simulation(config).run()
    assert all(len(rec.malicious) >= 1 for rec in result.records)


def test_wall_clock_and_flags_do_not_affect_checksums():
    a = Simulation(_config()).run()
    b = Simulation(_config()).run()
    assert a.summary["final_checksum"] == b.summary["final_checksum"]
