"""Extended Pedersen commitments.

A plain Pedersen commitment to value m with blinding r is g^m * h^r.
Here every commitment additionally carries the mask term g^r, which lets
an aggregating server check a claimed sum of blindings against a public
decoding key without learning any individual blinding: the product of
mask terms over clients equals g^(sum of blindings).

Both components are additively homomorphic: multiplying commitments
componentwise commits to the sums of the values and blindings mod q.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from byzlab.crypto.groups import GroupParams, group_pow


@dataclass(frozen=True)
class ExtendedCommitment:
    c: int  # g^m * h^r mod p
    mask_term: int  # g^r mod p


def identity_commitment() -> ExtendedCommitment:
    """Commitment to (0, 0); the empty-product convention."""
    return ExtendedCommitment(c=1, mask_term=1)


def commit(m: int, r: int, params: GroupParams) -> ExtendedCommitment:
    """Commit to value m with blinding r (both taken mod q)."""
    c = (group_pow(params.g, m, params) * group_pow(params.h, r, params)) % params.p
    return ExtendedCommitment(c=c, mask_term=group_pow(params.g, r, params))


def add_commitments(
    commitments: Iterable[ExtendedCommitment], params: GroupParams
) -> ExtendedCommitment:
    """Componentwise group product; equals commit(sum m_i, sum r_i)."""
    c = 1
    mask = 1
    for ec in commitments:
        c = (c * ec.c) % params.p
        mask = (mask * ec.mask_term) % params.p
    return ExtendedCommitment(c=c, mask_term=mask)


def verify_mask_sum(
    commitments: Sequence[ExtendedCommitment],
    decoding_key: int,
    params: GroupParams,
) -> bool:
    """Check that the blindings behind ``commitments`` sum to ``decoding_key``.

    True iff the product of mask terms equals g^decoding_key. An empty
    sequence verifies against decoding key 0.
    """
    product = 1
    for ec in commitments:
        product = (product * ec.mask_term) % params.p
    return product == group_pow(params.g, decoding_key, params)
