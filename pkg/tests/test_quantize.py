"""Fixed-point grid: endpoints, roundtrip error bound, monotonicity,
and the power-of-two bound windows."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzlab.errors import QuantRangeError
from byzlab.model.quantize import (
    QuantSpec,
    bits_for_bound,
    clamp_to_window,
    dequantize,
    from_committed_sum,
    quantize,
    signed_to_float,
    to_committed,
    window_bound,
)

SPEC16 = QuantSpec(bits=16, clip=1.0)


def test_zero_maps_to_midpoint():
    assert quantize(np.array([0.0]), SPEC16).values[0] == 32768


def test_endpoints():
    ulp = 1e-12
    fv = quantize(np.array([-1.0, 1.0 - ulp]), SPEC16)
    assert fv.values[0] == 0
    assert fv.values[1] == 2**16 - 1


def test_out_of_range_errors():
    with pytest.raises(QuantRangeError):
        quantize(np.array([1.5]), SPEC16)


def test_roundtrip_error_bounded():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        v = rng.uniform(-1.0, 1.0, size=16)
        err = np.max(np.abs(dequantize(quantize(v, SPEC16)) - v))
        worst = max(worst, float(err))
    assert worst <= SPEC16.clip / 2 ** (SPEC16.bits - 1)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=-1.0, max_value=1.0), st.floats(min_value=-1.0, max_value=1.0))
def test_quantize_monotone(a, b):
    lo, hi = sorted((a, b))
    fv = quantize(np.array([lo, hi]), SPEC16)
    assert fv.values[0] <= fv.values[1]


def test_signed_and_float_views():
    fv = quantize(np.array([0.5, -0.5]), SPEC16)
    signed = fv.signed()
    assert signed[0] == -signed[1]
    np.testing.assert_allclose(signed_to_float(signed, SPEC16), [0.5, -0.5], atol=SPEC16.step)


# ---------------------------------------------------------------------------
# Bound windows
# ---------------------------------------------------------------------------


def test_bits_for_bound_no_bound_is_full_width():
    assert bits_for_bound(None, SPEC16) == 16
    assert bits_for_bound(float("inf"), SPEC16) == 16


def test_bits_for_bound_coarsens_within_factor_two():
    # effective enforcement lands in [bound/2, bound]
    for bound in (0.9, 0.5, 0.26, 0.126, 0.01):
        bits = bits_for_bound(bound, SPEC16)
        assert bound / 2 <= window_bound(bits, SPEC16) <= bound


def test_window_roundtrip():
    signed = np.array([-5, 0, 3], dtype=np.int64)
    committed = to_committed(signed, 4)
    assert committed == [3, 8, 11]
    back = from_committed_sum(committed, 1, 4)
    np.testing.assert_array_equal(back, signed)


def test_window_clamp():
    signed = np.array([-9, -8, 7, 8], dtype=np.int64)
    np.testing.assert_array_equal(clamp_to_window(signed, 4), [-8, -8, 7, 7])


def test_to_committed_rejects_out_of_window():
    with pytest.raises(QuantRangeError):
        to_committed(np.array([8], dtype=np.int64), 4)


def test_committed_sum_of_cohort():
    rows = [np.array([-3, 2], dtype=np.int64), np.array([1, -1], dtype=np.int64)]
    total = [a + b for a, b in zip(*(to_committed(r, 4) for r in rows))]
    np.testing.assert_array_equal(from_committed_sum(total, 2, 4), [-2, 1])
