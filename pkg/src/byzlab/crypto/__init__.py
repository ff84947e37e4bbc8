"""Prime-order group arithmetic, extended Pedersen commitments, and
bit-decomposition range proofs."""

from byzlab.crypto.groups import (
    GroupParams,
    setup_group,
    encode_element,
    group_pow,
    is_subgroup_element,
    miller_rabin,
)
from byzlab.crypto.commitments import (
    ExtendedCommitment,
    commit,
    add_commitments,
    identity_commitment,
    verify_mask_sum,
)
from byzlab.crypto.rangeproof import (
    BitProof,
    RangeProof,
    prove_range,
    verify_range,
)

__all__ = [
    "GroupParams",
    "setup_group",
    "encode_element",
    "group_pow",
    "is_subgroup_element",
    "miller_rabin",
    "ExtendedCommitment",
    "commit",
    "add_commitments",
    "identity_commitment",
    "verify_mask_sum",
    "BitProof",
    "RangeProof",
    "prove_range",
    "verify_range",
]
