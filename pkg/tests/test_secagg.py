"""Secure aggregation: pairwise secrets, mask telescoping, envelopes,
and verified unmasking against the plaintext oracle."""

import hashlib

import pytest

from byzlab import secagg
from byzlab.crypto import commit, setup_group
from byzlab.crypto.groups import encode_element, group_pow
from byzlab.errors import (
    MaskSumError,
    PayloadConsistencyError,
    ProtocolOrderError,
    ProtocolStateError,
    QuantRangeError,
    RegistrationError,
    ShapeError,
)
from byzlab.prng import CounterStream


def _seed(pair, seed_byte, round_index=0):
    return secagg.MaskSeed(
        pair=pair, round_index=round_index, seed=bytes([seed_byte]) * 32
    )


# ---------------------------------------------------------------------------
# Pairwise secrets
# ---------------------------------------------------------------------------


def test_pairwise_secret_toy_point(toy_group):
    # a=3, b=4: shared point 2^12 mod 23 = 2 (12 mod 11 = 1)
    pk_b = group_pow(toy_group.g, 4, toy_group)
    seed = secagg.derive_pairwise_secret(3, pk_b, 1, 2, round_index=5, params=toy_group)
    expected = hashlib.sha256(
        b"byzlab/pairwise-seed/v1" + encode_element(2) + (5).to_bytes(8, "big")
    ).digest()
    assert seed.seed == expected
    assert seed.pair == (1, 2)


def test_pairwise_secret_symmetry(std_group):
    a, b = 123456789, 987654321
    pk_a = group_pow(std_group.g, a, std_group)
    pk_b = group_pow(std_group.g, b, std_group)
    s_ab = secagg.derive_pairwise_secret(a, pk_b, 7, 3, 2, std_group)
    s_ba = secagg.derive_pairwise_secret(b, pk_a, 3, 7, 2, std_group)
    assert s_ab == s_ba


def test_pairwise_secret_round_binding(std_group):
    a, b = 5, 6
    pk_b = group_pow(std_group.g, b, std_group)
    s1 = secagg.derive_pairwise_secret(a, pk_b, 1, 2, 1, std_group)
    s2 = secagg.derive_pairwise_secret(a, pk_b, 1, 2, 2, std_group)
    assert s1.seed != s2.seed


def test_registry_unknown_peer(std_group):
    keys = secagg.RoundKeys(std_group)
    keys.register(1, group_pow(std_group.g, 11, std_group))
    with pytest.raises(RegistrationError):
        keys.derive(11, 1, 99, 0)


# ---------------------------------------------------------------------------
# Masks
# ---------------------------------------------------------------------------


def test_mask_sign_convention_three_clients(monkeypatch, std_group):
    """Scalar expansions {s12: 5, s13: 7, s23: 2} telescope to zero:
    r1 = 12 = 1 mod 11, r2 = -5 + 2 = 8, r3 = -7 - 2 = 2."""
    q = 11
    table = {(1, 2): 5, (1, 3): 7, (2, 3): 2}

    def fake_expand(seed, length, modulus):
        return [table[seed.pair] % modulus] * length

    monkeypatch.setattr(secagg, "expand_mask", fake_expand)
    seeds = {pair: _seed(pair, 0) for pair in table}
    peers = [1, 2, 3]
    r1 = secagg.compute_client_mask(1, peers, seeds, 1, q)
    r2 = secagg.compute_client_mask(2, peers, seeds, 1, q)
    r3 = secagg.compute_client_mask(3, peers, seeds, 1, q)
    assert (r1, r2, r3) == ([1], [8], [2])
    assert (r1[0] + r2[0] + r3[0]) % q == 0


def test_two_client_pair_cancellation(std_group):
    q = std_group.q
    seeds = {(0, 1): _seed((0, 1), 9)}
    r0 = secagg.compute_client_mask(0, [0, 1], seeds, 8, q)
    r1 = secagg.compute_client_mask(1, [0, 1], seeds, 8, q)
    assert r0 == secagg.expand_mask(seeds[(0, 1)], 8, q)
    assert all((a + b) % q == 0 for a, b in zip(r0, r1))


def test_mask_cancellation_ten_clients(std_group):
    q = std_group.q
    n, d = 10, 100
    seeds = {
        (i, j): _seed((i, j), (7 * i + j) % 251)
        for i in range(n)
        for j in range(i + 1, n)
    }
    peers = list(range(n))
    masks = [secagg.compute_client_mask(i, peers, seeds, d, q) for i in peers]
    for k in range(d):
        assert sum(m[k] for m in masks) % q == 0


def test_missing_seed_is_protocol_error(std_group):
    with pytest.raises(ProtocolStateError):
        secagg.compute_client_mask(0, [0, 1], {}, 4, std_group.q)


def test_mask_update_trivials(std_group):
    q = std_group.q
    mask = [5, 7, 9]
    assert secagg.mask_update([0, 0, 0], mask, q).payload == (5, 7, 9)
    assert secagg.mask_update([1, 2, 3], [0, 0, 0], q).payload == (1, 2, 3)
    masked = secagg.mask_update([1, 2, 3], mask, q)
    recovered = [(pv - m) % q for pv, m in zip(masked.payload, mask)]
    assert recovered == [1, 2, 3]
    with pytest.raises(ShapeError):
        secagg.mask_update([1], [1, 2], q)


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------


def _envelope(std_group, values, mask, bits=4, client_id=0, tag=b"env"):
    return secagg.build_envelope(
        values,
        mask,
        bits,
        std_group,
        declared_norm=1.0,
        client_id=client_id,
        round_index=0,
        stream=CounterStream(tag),
    )


def test_envelope_roundtrip(std_group):
    env = _envelope(std_group, [3, 5], [101, 202])
    verdict = secagg.verify_envelope(env, 4, std_group)
    assert verdict.accepted
    assert len(env.commitments) == 2 and len(env.proofs) == 2


def test_empty_envelope_vacuously_valid(std_group):
    env = _envelope(std_group, [], [])
    assert secagg.verify_envelope(env, 4, std_group).accepted


def test_envelope_out_of_range_coordinate(std_group):
    with pytest.raises(QuantRangeError):
        _envelope(std_group, [3, 16], [1, 2])


def test_envelope_forged_proof_rejected_with_coordinate(std_group):
    good = _envelope(std_group, [3, 5], [101, 202])
    other = _envelope(std_group, [3, 6], [101, 203])
    tampered = secagg.ClientEnvelope(
        client_id=good.client_id,
        round_index=good.round_index,
        bits=good.bits,
        payload=good.payload,
        commitments=good.commitments,
        proofs=(good.proofs[0], other.proofs[1]),
        declared_norm=good.declared_norm,
    )
    verdict = secagg.verify_envelope(tampered, 4, std_group)
    assert not verdict.accepted
    assert verdict.reason == "range"
    assert verdict.coordinate == 1


def test_envelope_shape_mismatch_rejected(std_group):
    good = _envelope(std_group, [3, 5], [101, 202])
    lopsided = secagg.ClientEnvelope(
        client_id=0,
        round_index=0,
        bits=good.bits,
        payload=good.payload,
        commitments=good.commitments[:1],
        proofs=good.proofs,
        declared_norm=good.declared_norm,
    )
    assert secagg.verify_envelope(lopsided, 4, std_group).reason == "shape"


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def _masked_round(std_group, updates, bits=4, round_index=0):
    """Full masked cohort: DH seeds, masks, envelopes, verdicts."""
    q = std_group.q
    n = len(updates)
    ids = list(range(n))
    secrets = {i: 1000 + 13 * i for i in ids}
    keys = secagg.RoundKeys(std_group)
    for i in ids:
        keys.register(i, group_pow(std_group.g, secrets[i], std_group))
    envelopes = []
    for i in ids:
        seeds = {}
        for j in ids:
            if j != i:
                s = keys.derive(secrets[i], i, j, round_index)
                seeds[s.pair] = s
        d = len(updates[i])
        mask = secagg.compute_client_mask(i, ids, seeds, d, q)
        envelopes.append(
            secagg.build_envelope(
                updates[i], mask, bits, std_group, 1.0, i, round_index,
                CounterStream(b"agg" + bytes([i])),
            )
        )
    verdicts = [secagg.verify_envelope(env, bits, std_group) for env in envelopes]
    return envelopes, verdicts


def test_aggregate_three_clients_matches_plaintext_oracle(std_group):
    envelopes, verdicts = _masked_round(std_group, [[1], [2], [3]])
    sums = secagg.aggregate_round(envelopes, [0], std_group, verdicts)
    assert sums == [6]


def test_aggregate_single_client_zero_mask(std_group):
    envelopes, verdicts = _masked_round(std_group, [[9, 4]])
    assert secagg.aggregate_round(envelopes, [0, 0], std_group, verdicts) == [9, 4]


def test_aggregate_requires_verdicts(std_group):
    envelopes, verdicts = _masked_round(std_group, [[1], [2]])
    with pytest.raises(ProtocolOrderError):
        secagg.aggregate_round(envelopes, [0], std_group, verdicts[:1])
    bad = [verdicts[0], secagg.EnvelopeVerdict(accepted=False, reason="range")]
    with pytest.raises(ProtocolOrderError):
        secagg.aggregate_round(envelopes, [0], std_group, bad)


def test_tampered_payload_aborts_consistency_not_mask_sum(std_group):
    envelopes, verdicts = _masked_round(std_group, [[1], [2], [3]])
    victim = envelopes[1]
    tampered = secagg.ClientEnvelope(
        client_id=victim.client_id,
        round_index=victim.round_index,
        bits=victim.bits,
        payload=((victim.payload[0] + 1) % std_group.q,),
        commitments=victim.commitments,
        proofs=victim.proofs,
        declared_norm=victim.declared_norm,
    )
    envelopes = [envelopes[0], tampered, envelopes[2]]
    # commitments are untouched, so the mask-sum check still passes
    column = [env.commitments[0] for env in envelopes]
    assert secagg.verify_mask_sum(column, 0, std_group)
    with pytest.raises(PayloadConsistencyError):
        secagg.aggregate_round(envelopes, [0], std_group, verdicts)


def test_wrong_decoding_key_aborts_mask_sum(std_group):
    envelopes, verdicts = _masked_round(std_group, [[1], [2]])
    with pytest.raises(MaskSumError):
        secagg.aggregate_round(envelopes, [1], std_group, verdicts)


def test_nonzero_decoding_key_variant(std_group):
    """Client-chosen blindings with a published decoding key."""
    q = std_group.q
    blindings = [[123], [456]]
    key = [(123 + 456) % q]
    envelopes = [
        secagg.build_envelope(
            [v], blindings[i], 4, std_group, 1.0, i, 0, CounterStream(bytes([i]))
        )
        for i, v in enumerate([7, 8])
    ]
    verdicts = [secagg.verify_envelope(e, 4, std_group) for e in envelopes]
    assert secagg.aggregate_round(envelopes, key, std_group, verdicts) == [15]


def test_verify_mask_sum_reexported(std_group):
    # envelope columns feed the commitment-layer check directly
    assert secagg.verify_mask_sum([], 0, std_group)
