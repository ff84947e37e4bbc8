"""Prime-order subgroups of Z_p* used by the commitment layer.

Two profiles are published:

``test``
    The toy group p=23, q=11, g=2, h=3. Both generators have order 11.
    Useful for exhaustive checks; binding is only toy-grade.

``standard``
    A 2048-bit modulus with a 256-bit prime-order subgroup. Parameters
    are fixed constants, derived once from nothing-up-my-sleeve SHA-256
    chains (see ``derive_standard_params`` for the exact procedure, which
    reproduces the constants bit for bit):

      * q: first probable prime at or above the 256-bit integer expanded
        from the tag ``rofl-lab-q`` (top bit forced, made odd).
      * p = k*q + 1: k is a 1792-bit even integer expanded from
        ``rofl-lab-p || counter``; the first counter giving a 2048-bit
        prime p wins.
      * g: hash-to-subgroup of ``rofl-lab-g || counter`` (first result
        that is not 1).
      * h: hash-to-subgroup of ``rofl-lab-h || encode(g) || counter``,
        so no party knows log_g(h).

    "Hash-to-subgroup" expands the tag to 2048 bits, reduces mod p and
    raises to the cofactor (p-1)/q.

Exponents live mod q throughout; every element produced here satisfies
x^q = 1 (mod p). Arithmetic is gmpy2-backed, with 8-bit-window
fixed-base tables for the two generators (they absorb nearly all
exponentiations in a round).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import gmpy2

from byzlab.errors import ConfigError

_STANDARD_P = int(
    "900B58AC4B406480A9ED71538C86963681ECFCF071A35957BFAA6FAB061A736A"
    "29F1AA30EED326C91DED48BD4FCDF903A3883716A73769006EEACBD003CD29C7"
    "5941B79017EBF3A83242318B337E93E487DAF190B80E6DA100E74060D20CDCEF"
    "42B40BB88B8944A9095A63A14759451D2A3A08B4D949C33EAB336DE486EA76CF"
    "C6D2347BB701CF51E2932B3631D54DC508C0F87A8C3977F708B2B6ACF217F816"
    "A0C144F010DE494E3E60D31554548A4AB863BBB636D6CDBE3B79D0FCFCF48E09"
    "EA728612D80CDEAA74768488011B78D1E7220B77D2C48A97BA868B9DD1215EE4"
    "8824A457C55F81D18FC5036DB0D4CFD80F452CA3E94083C135A77B6809310F57",
    16,
)
_STANDARD_Q = int(
    "A897C677031604C74A23155D2C2B5FB69A14B6DF33B8695FA03174E589F697AF", 16
)
_STANDARD_G = int(
    "3B96AE47227215DC30FFB32CC0F76447D3FA71AB0389EFC153E8532C3453FAF5"
    "DA0128D276A147F5812BD5B6E5149943EEBEE9903C284E96C395BCF1C27C5350"
    "2E4D5764E81E316C1BD960AB4688475DE3089739A127C211A5593FEA4F4AD5F4"
    "7F5D2964FDF97CD544A52ECF22153B08949A62538CC024D4EAACE61E51D46962"
    "7FE25540FE7256C422271975CBCCCC07E38D45345FB7849496E1A9E6038EC596"
    "DD37C4166EF3C81D1C685E84AB8DBCAD4D7FC2350BEEB6C530BB88F7B758896D"
    "8E44F93DD9152E02D711159BC2F68A16325AC61BE96E18A93FE8EE4982C8C116"
    "748238C1C8F8106F6E746C10AA1418797D114EA94516573B5C40111A5E89B53F",
    16,
)
_STANDARD_H = int(
    "1200ADC8F0E9A7A297872E3AB293FB2D400EA09F88CD31D36E2FBC497E490CBD"
    "11E8CCE960548FBA1CFD5EA93DF1B469F3F4B4D6BA7622761BD5CC20A12A632E"
    "BE02D3FF0A755FB35497A7955C80BC72374859D49A9293DA24D4FF38B093C198"
    "F67F75646EA8F7B02372755CC4CB1B28FD8DA60B939AF14163B2802E392A07E6"
    "B15F27DF64BC357A49DF8D6E2C33A5240180E03EB470A1A83F81C20806EB798F"
    "A2EE5D55C576A4BC38F2C773EC0AAE499125FB6D322768463D1F4E238677D454"
    "0A252D885E7AC151C7ED830C7FF3D4BAB49FA998D747383B39DB083E7D5F3D92"
    "EE5AA5A8E8DF60109820618CD7E5B2F9001446BA3917A1A51E6A727BF04934BD",
    16,
)

_PROFILES = ("test", "standard")


@dataclass(frozen=True)
class GroupParams:
    """Published parameters of a prime-order subgroup of Z_p*.

    ``g`` and ``h`` both generate the order-q subgroup and the discrete
    log of h base g is unknown by construction (standard profile) or
    irrelevant (test profile, fixed by fiat).
    """

    p: int
    q: int
    g: int
    h: int
    profile: str = "custom"

    def digest(self) -> bytes:
        """Stable 32-byte identifier of (p, q, g, h) for transcript hashes."""
        return _group_digest(self.p, self.q, self.g, self.h)


@lru_cache(maxsize=16)
def _group_digest(p: int, q: int, g: int, h: int) -> bytes:
    return hashlib.sha256(
        b"byzlab/group/v1"
        + encode_element(p)
        + encode_element(q)
        + encode_element(g)
        + encode_element(h)
    ).digest()


def setup_group(profile: str) -> GroupParams:
    """Return the fixed published parameters for ``profile``."""
    if profile == "test":
        return GroupParams(p=23, q=11, g=2, h=3, profile="test")
    if profile == "standard":
        return GroupParams(
            p=_STANDARD_P,
            q=_STANDARD_Q,
            g=_STANDARD_G,
            h=_STANDARD_H,
            profile="standard",
        )
    raise ConfigError(f"unknown group profile {profile!r}; expected one of {_PROFILES}")


def encode_element(x: int) -> bytes:
    """Length-prefixed big-endian encoding: 4-byte length, then minimal bytes.

    Zero encodes as a bare zero length. Used both for transcript hashing
    and for the documented wire format of recorded transcripts.
    """
    if x < 0:
        raise ValueError("cannot encode negative value")
    body = x.to_bytes((x.bit_length() + 7) // 8, "big") if x else b""
    return len(body).to_bytes(4, "big") + body


def decode_element(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Inverse of :func:`encode_element`; returns (value, next offset)."""
    if offset + 4 > len(data):
        raise ValueError("truncated length prefix")
    n = int.from_bytes(data[offset : offset + 4], "big")
    offset += 4
    if offset + n > len(data):
        raise ValueError("truncated element body")
    return int.from_bytes(data[offset : offset + n], "big"), offset + n


# ---------------------------------------------------------------------------
# Exponentiation
# ---------------------------------------------------------------------------

_WINDOW = 8


class _FixedBaseTable:
    """8-bit-window precomputation for one base: table[w][j] = base^(j << 8w)."""

    def __init__(self, base: int, p: int, q: int):
        self.p = gmpy2.mpz(p)
        self.q = q
        windows = (q.bit_length() + _WINDOW - 1) // _WINDOW
        b = gmpy2.mpz(base % p)
        rows = []
        for _ in range(windows):
            row = [gmpy2.mpz(1)] * (1 << _WINDOW)
            acc = gmpy2.mpz(1)
            for j in range(1, 1 << _WINDOW):
                acc = (acc * b) % self.p
                row[j] = acc
            rows.append(row)
            # base for the next window: b^(2^8)
            b = (acc * b) % self.p
        self.rows = rows

    def pow(self, exponent: int) -> int:
        e = exponent % self.q
        acc = gmpy2.mpz(1)
        w = 0
        p = self.p
        rows = self.rows
        while e:
            j = e & 0xFF
            if j:
                acc = (acc * rows[w][j]) % p
            e >>= _WINDOW
            w += 1
        return int(acc)


@lru_cache(maxsize=16)
def _table(base: int, p: int, q: int) -> _FixedBaseTable:
    return _FixedBaseTable(base, p, q)


def group_pow(base: int, exponent: int, params: GroupParams) -> int:
    """base^exponent mod p, reducing the exponent mod q first.

    The reduction is valid for order-q elements only, which is every
    element this package produces. Fixed-base tables are used for the
    published generators; anything else goes through gmpy2.
    """
    e = exponent % params.q
    if base == params.g or base == params.h:
        return _table(base, params.p, params.q).pow(e)
    return int(gmpy2.powmod(base, e, params.p))


def pow_any(base: int, exponent: int, p: int) -> int:
    """Plain modular exponentiation; negative exponents invert mod p."""
    return int(gmpy2.powmod(base, exponent, p))


def mul(a: int, b: int, params: GroupParams) -> int:
    return (a * b) % params.p


def invert(a: int, params: GroupParams) -> int:
    return int(gmpy2.invert(a, params.p))


def is_subgroup_element(x: int, params: GroupParams) -> bool:
    """True iff x is in the order-q subgroup (x^q = 1, 0 < x < p)."""
    if not 0 < x < params.p:
        return False
    return gmpy2.powmod(x, params.q, params.p) == 1


# ---------------------------------------------------------------------------
# Parameter derivation (reproduces the embedded standard constants)
# ---------------------------------------------------------------------------


def _expand_bits(tag: bytes, nbits: int) -> int:
    out = b""
    counter = 0
    while len(out) * 8 < nbits:
        out += hashlib.sha256(tag + counter.to_bytes(4, "big")).digest()
        counter += 1
    x = int.from_bytes(out[: (nbits + 7) // 8], "big")
    x &= (1 << nbits) - 1
    x |= 1 << (nbits - 1)
    return x


def _hash_to_subgroup(tag: bytes, p: int, cofactor: int) -> int:
    counter = 0
    while True:
        u = _expand_bits(tag + counter.to_bytes(4, "big"), 2048) % p
        candidate = int(gmpy2.powmod(u, cofactor, p))
        if candidate != 1:
            return candidate
        counter += 1


def derive_standard_params() -> GroupParams:
    """Re-run the seeded search that produced the standard constants."""
    q = _expand_bits(b"rofl-lab-q", 256) | 1
    while not gmpy2.is_prime(q, 64):
        q += 2
    counter = 0
    while True:
        k = _expand_bits(b"rofl-lab-p" + counter.to_bytes(4, "big"), 1792) & ~1
        p = k * q + 1
        if p.bit_length() == 2048 and gmpy2.is_prime(p, 64):
            break
        counter += 1
    cofactor = (p - 1) // q
    g = _hash_to_subgroup(b"rofl-lab-g", p, cofactor)
    h = _hash_to_subgroup(b"rofl-lab-h" + encode_element(g), p, cofactor)
    return GroupParams(p=p, q=q, g=g, h=h, profile="standard")


def miller_rabin(n: int, rounds: int = 64, seed: bytes = b"byzlab/mr") -> bool:
    """Miller-Rabin with deterministically seeded bases.

    Self-contained (no gmpy2 primality call) so tests can use it as an
    oracle independent of the library used elsewhere.
    """
    if n < 2:
        return False
    for small in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n == small:
            return True
        if n % small == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for i in range(rounds):
        raw = int.from_bytes(
            hashlib.sha256(seed + i.to_bytes(4, "big") + encode_element(n)).digest(),
            "big",
        )
        a = 2 + raw % (n - 3)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True
