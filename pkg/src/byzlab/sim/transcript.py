"""Round transcript files: full crypto-round evidence, independently
re-verifiable.

A transcript is a single JSON document. Group elements and scalars are
lowercase hex strings (big-endian, no prefix); range proofs are the hex
of their length-prefixed binary serialization (see
``RangeProof.to_bytes``: a 4-byte bit count, then per bit the
commitment pair and the four OR-proof scalars, each as a 4-byte length
followed by big-endian bytes, then the consistency opening).

Fields:

  format, version    fixed tag and schema version
  profile            group profile name
  group              {p, q, g, h} in hex
  round              round index
  bits               proof bit width announced for the round
  quant              {bits, clip} of the fixed-point grid
  decoding_key       per-coordinate key, hex list
  envelopes          list of {client, declared_norm, payload (hex list),
                     commitments (list of [c, mask_term] hex pairs),
                     proofs (hex list)}
  verdicts           list of {client, accepted, reason, coordinate}
  aggregate_sums     decoded per-coordinate sums (hex list) or null
  abort              abort reason string or null

``verify_transcript`` replays verification and aggregation from the file
alone and reports whether the recorded verdicts and sums reproduce.
"""

from __future__ import annotations

import json
from pathlib import Path

from byzlab.crypto.commitments import ExtendedCommitment
from byzlab.crypto.groups import GroupParams
from byzlab.crypto.rangeproof import RangeProof
from byzlab.errors import ProtocolAbort
from byzlab.secagg import ClientEnvelope, EnvelopeVerdict, aggregate_round, verify_envelope

FORMAT_TAG = "byzlab-round-transcript"
VERSION = 1


def _hex(x: int) -> str:
    return format(x, "x")


def write_transcript(
    path: str | Path,
    group: GroupParams,
    round_index: int,
    bits: int,
    quant_bits: int,
    quant_clip: float,
    envelopes: list[ClientEnvelope],
    verdicts: list[EnvelopeVerdict],
    decoding_key: list[int],
    aggregate_sums: list[int] | None,
    abort_reason: str | None,
) -> None:
    doc = {
        "format": FORMAT_TAG,
        "version": VERSION,
        "profile": group.profile,
        "group": {k: _hex(getattr(group, k)) for k in ("p", "q", "g", "h")},
        "round": round_index,
        "bits": bits,
        "quant": {"bits": quant_bits, "clip": quant_clip},
        "decoding_key": [_hex(k) for k in decoding_key],
        "envelopes": [
            {
                "client": env.client_id,
                "declared_norm": env.declared_norm,
                "payload": [_hex(v) for v in env.payload],
                "commitments": [
                    [_hex(ec.c), _hex(ec.mask_term)] for ec in env.commitments
                ],
                "proofs": [proof.to_bytes().hex() for proof in env.proofs],
            }
            for env in envelopes
        ],
        "verdicts": [
            {
                "client": env.client_id,
                "accepted": v.accepted,
                "reason": v.reason,
                "coordinate": v.coordinate,
            }
            for env, v in zip(envelopes, verdicts)
        ],
        "aggregate_sums": (
            None if aggregate_sums is None else [_hex(s) for s in aggregate_sums]
        ),
        "abort": abort_reason,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_transcript(path: str | Path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_TAG or doc.get("version") != VERSION:
        raise ValueError(f"{path}: not a version-{VERSION} round transcript")
    return doc


def _envelopes_from_doc(doc: dict, round_index: int) -> list[ClientEnvelope]:
    envelopes = []
    for entry in doc["envelopes"]:
        envelopes.append(
            ClientEnvelope(
                client_id=entry["client"],
                round_index=round_index,
                bits=doc["bits"],
                payload=tuple(int(v, 16) for v in entry["payload"]),
                commitments=tuple(
                    ExtendedCommitment(c=int(c, 16), mask_term=int(m, 16))
                    for c, m in entry["commitments"]
                ),
                proofs=tuple(
                    RangeProof.from_bytes(bytes.fromhex(blob))
                    for blob in entry["proofs"]
                ),
                declared_norm=entry["declared_norm"],
            )
        )
    return envelopes


def verify_transcript(path: str | Path) -> dict:
    """Re-verify a recorded round from the file alone.

    Returns a report with ``match`` True iff re-running envelope
    verification and aggregation reproduces the recorded verdicts,
    abort status, and aggregate sums.
    """
    doc = load_transcript(path)
    group = GroupParams(
        p=int(doc["group"]["p"], 16),
        q=int(doc["group"]["q"], 16),
        g=int(doc["group"]["g"], 16),
        h=int(doc["group"]["h"], 16),
        profile=doc["profile"],
    )
    envelopes = _envelopes_from_doc(doc, doc["round"])
    bits = doc["bits"]
    verdicts = [verify_envelope(env, bits, group) for env in envelopes]

    recorded = doc["verdicts"]
    verdicts_match = len(recorded) == len(verdicts) and all(
        r["accepted"] == v.accepted and r["reason"] == v.reason
        for r, v in zip(recorded, verdicts)
    )

    decoding_key = [int(k, 16) for k in doc["decoding_key"]]
    sums = None
    abort_reason = None
    if all(v.accepted for v in verdicts):
        try:
            sums = aggregate_round(envelopes, decoding_key, group, verdicts)
        except ProtocolAbort as exc:
            abort_reason = str(exc)
    else:
        abort_reason = "envelope verification failed"

    recorded_sums = (
        None
        if doc["aggregate_sums"] is None
        else [int(s, 16) for s in doc["aggregate_sums"]]
    )
    sums_match = sums == recorded_sums
    abort_match = (doc["abort"] is None) == (abort_reason is None)

    return {
        "path": str(path),
        "round": doc["round"],
        "clients": [env.client_id for env in envelopes],
        "verdicts_match": verdicts_match,
        "sums_match": sums_match,
        "abort_match": abort_match,
        "match": verdicts_match and sums_match and abort_match,
    }
