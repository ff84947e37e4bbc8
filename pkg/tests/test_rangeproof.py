"""Range proof completeness, soundness, binding, and tamper rejection.

The exhaustive 8-bit sweep lives in the acceptance suite; here the same
properties are exercised at 4 bits plus targeted forgeries.
"""

import pytest

from byzlab.crypto import commit, prove_range, verify_range
from byzlab.crypto.rangeproof import RangeProof, _prove_bits, verify_range_bytes
from byzlab.errors import QuantRangeError
from byzlab.prng import CounterStream


def _stream(tag: bytes = b"range-test") -> CounterStream:
    return CounterStream(tag)


def test_all_zero_bits_accepts(std_group):
    proof = prove_range(0, 12345, 4, std_group, _stream())
    assert verify_range(commit(0, 12345, std_group), proof, 4, std_group)


def test_thirteen_roundtrip_and_decomposition(std_group):
    r = 987654321
    proof = prove_range(13, r, 4, std_group, _stream())
    assert verify_range(commit(13, r, std_group), proof, 4, std_group)
    assert len(proof.bit_commitments) == 4
    # 13 = 1101b: recompute each bit commitment from the transcript's
    # consistency algebra by checking against both possible bit values
    # is covered by verification; here just pin the shape
    assert len(proof.bit_proofs) == 4


def test_out_of_range_value_refused(std_group):
    with pytest.raises(QuantRangeError):
        prove_range(16, 7, 4, std_group, _stream())
    with pytest.raises(QuantRangeError):
        prove_range(-1, 7, 4, std_group, _stream())


def test_binding_to_wrong_commitment_rejects(std_group):
    proof = prove_range(13, 42, 4, std_group, _stream())
    assert not verify_range(commit(14, 42, std_group), proof, 4, std_group)
    assert not verify_range(commit(13, 43, std_group), proof, 4, std_group)


def test_forged_out_of_range_proof_rejects(std_group):
    # prover skips the precondition: commits 21 but can only decompose
    # 21 mod 16 = 5 into four bits, so consistency must fail
    v, r = 21, 1111
    forged = _prove_bits(v, r, 4, std_group, _stream())
    assert not verify_range(commit(v, r, std_group), forged, 4, std_group)


def test_wrong_bit_width_rejects(std_group):
    proof = prove_range(5, 9, 4, std_group, _stream())
    assert not verify_range(commit(5, 9, std_group), proof, 5, std_group)
    assert not verify_range(commit(5, 9, std_group), proof, 3, std_group)


def test_serialization_roundtrip(std_group):
    proof = prove_range(11, 33, 4, std_group, _stream())
    blob = proof.to_bytes()
    assert RangeProof.from_bytes(blob) == proof
    assert verify_range_bytes(commit(11, 33, std_group), blob, 4, std_group)


def test_single_bit_flip_rejects(std_group):
    proof = prove_range(9, 77, 4, std_group, _stream())
    ec = commit(9, 77, std_group)
    blob = bytearray(proof.to_bytes())
    # flip one bit in the middle of the transcript body
    blob[len(blob) // 2] ^= 0x10
    assert not verify_range_bytes(ec, bytes(blob), 4, std_group)


def test_truncated_transcript_rejects(std_group):
    proof = prove_range(9, 77, 4, std_group, _stream())
    ec = commit(9, 77, std_group)
    blob = proof.to_bytes()
    assert not verify_range_bytes(ec, blob[:-3], 4, std_group)
    assert not verify_range_bytes(ec, blob + b"\x00", 4, std_group)


def test_toy_group_small_ranges(toy_group):
    # scalars live mod 11, so only 2-bit ranges are meaningful in the toy group
    for v in range(4):
        proof = prove_range(v, 5, 2, toy_group, _stream())
        assert verify_range(commit(v, 5, toy_group), proof, 2, toy_group)


def test_proofs_depend_on_stream_but_verify_either_way(std_group):
    p1 = prove_range(6, 8, 4, std_group, _stream(b"a"))
    p2 = prove_range(6, 8, 4, std_group, _stream(b"b"))
    assert p1 != p2
    ec = commit(6, 8, std_group)
    assert verify_range(ec, p1, 4, std_group)
    assert verify_range(ec, p2, 4, std_group)
