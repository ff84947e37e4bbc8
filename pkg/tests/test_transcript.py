"""Round transcripts: write, reload, re-verify, tamper detection."""

import json

import pytest

from byzlab import secagg
from byzlab.crypto.groups import group_pow
from byzlab.prng import CounterStream
from byzlab.sim.transcript import load_transcript, verify_transcript, write_transcript


def _cohort(std_group, updates, bits=4):
    q = std_group.q
    ids = list(range(len(updates)))
    secrets = {i: 777 + i for i in ids}
    keys = secagg.RoundKeys(std_group)
    for i in ids:
        keys.register(i, group_pow(std_group.g, secrets[i], std_group))
    envelopes = []
    for i in ids:
        seeds = {}
        for j in ids:
            if j != i:
                s = keys.derive(secrets[i], i, j, 3)
                seeds[s.pair] = s
        mask = secagg.compute_client_mask(i, ids, seeds, len(updates[i]), q)
        envelopes.append(
            secagg.build_envelope(
                updates[i], mask, bits, std_group, 0.5, i, 3,
                CounterStream(b"tr" + bytes([i])),
            )
        )
    verdicts = [secagg.verify_envelope(e, bits, std_group) for e in envelopes]
    return envelopes, verdicts


def _write(std_group, tmp_path, envelopes, verdicts, sums):
    path = tmp_path / "round_0003.json"
    write_transcript(
        path, std_group, 3, 4, 16, 1.0, envelopes, verdicts,
        [0] * len(envelopes[0].payload), sums, None,
    )
    return path


def test_transcript_roundtrip_reproduces_verdicts(std_group, tmp_path):
    envelopes, verdicts = _cohort(std_group, [[1, 2], [3, 4]])
    sums = secagg.aggregate_round(envelopes, [0, 0], std_group, verdicts)
    assert sums == [4, 6]
    path = _write(std_group, tmp_path, envelopes, verdicts, sums)
    report = verify_transcript(path)
    assert report["match"]
    assert report["verdicts_match"] and report["sums_match"] and report["abort_match"]


def test_transcript_detects_tampered_payload(std_group, tmp_path):
    envelopes, verdicts = _cohort(std_group, [[1], [2]])
    sums = secagg.aggregate_round(envelopes, [0], std_group, verdicts)
    path = _write(std_group, tmp_path, envelopes, verdicts, sums)
    doc = json.loads(path.read_text())
    payload = int(doc["envelopes"][0]["payload"][0], 16)
    doc["envelopes"][0]["payload"][0] = format(payload + 1, "x")
    path.write_text(json.dumps(doc))
    report = verify_transcript(path)
    assert not report["match"]


def test_transcript_detects_tampered_proof(std_group, tmp_path):
    envelopes, verdicts = _cohort(std_group, [[1], [2]])
    sums = secagg.aggregate_round(envelopes, [0], std_group, verdicts)
    path = _write(std_group, tmp_path, envelopes, verdicts, sums)
    doc = json.loads(path.read_text())
    blob = bytearray(bytes.fromhex(doc["envelopes"][1]["proofs"][0]))
    blob[len(blob) // 2] ^= 0x01
    doc["envelopes"][1]["proofs"][0] = blob.hex()
    path.write_text(json.dumps(doc))
    report = verify_transcript(path)
    assert not report["verdicts_match"] or not report["match"]


def test_transcript_rejects_unknown_format(tmp_path):
    path = tmp_path / "bogus.json"
    path.write_text('{"format": "other", "version": 9}')
    with pytest.raises(ValueError):
        load_transcript(path)
