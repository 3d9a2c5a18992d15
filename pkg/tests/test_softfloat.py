import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from anyround import softfloat as sf
from anyround.softfloat import (
    BINARY64,
    RD,
    RN,
    RO,
    RU,
    RZ,
    FloatFormat,
    SoftValue,
    decode,
    fp_add,
    fp_mul,
    max_finite,
    min_subnormal,
    pred,
    round_rational,
    sign,
    succ,
    ulp,
    zero,
)

E5M3 = FloatFormat(5, 3)  # 8-bit format used for exhaustive scans
E4M3 = FloatFormat(4, 3)
F5_11 = FloatFormat(5, 11)


def all_finite(fmt):
    for bits in range(1 << fmt.total_bits):
        v = SoftValue(fmt, bits)
        if v.is_finite():
            yield v


def all_finite_nonzero(fmt):
    return (v for v in all_finite(fmt) if not v.is_zero())


def test_format_derivations():
    assert BINARY64.total_bits == 64
    assert BINARY64.bias == 1023
    assert BINARY64.e_min == -1022
    assert BINARY64.e_max == 1023
    assert F5_11.total_bits == 16
    assert F5_11.e_min == -14
    assert FloatFormat.parse("e8 m24").total_bits == 32
    assert FloatFormat(5, 9).spec_string() == "e5 m9"


def test_decode_one():
    assert decode(SoftValue(BINARY64, 0x3FF0000000000000)) == 1


def test_decode_smallest_subnormal_f5_11():
    # e_min = -14, p = 11 so the smallest subnormal is 2^-24.
    assert decode(min_subnormal(F5_11)) == Fraction(1, 1 << 24)


def test_decode_one_plus_ulp():
    assert decode(SoftValue(BINARY64, 0x3FF0000000000001)) == 1 + Fraction(1, 1 << 52)


def test_encode_decode_roundtrip_exhaustive_small():
    for v in all_finite(E5M3):
        r = decode(v)
        if r == 0:
            continue
        for mode in sf.MODES:
            assert round_rational(r, E5M3, mode).bits == v.bits


def test_round_to_odd_picks_odd_neighbor():
    # 17/16 sits between 1.0 (stored significand 00, even) and 1.25 (01, odd).
    v = round_rational(Fraction(17, 16), E4M3, RO)
    assert decode(v) == Fraction(5, 4)


def test_round_third_rd_ru_differ_by_one_ulp():
    lo = round_rational(Fraction(1, 3), BINARY64, RD)
    hi = round_rational(Fraction(1, 3), BINARY64, RU)
    assert decode(hi) - decode(lo) == ulp(lo)
    assert succ(lo).bits == hi.bits


def test_round_exact_value_every_mode():
    for fmt in (E5M3, E4M3, F5_11, BINARY64):
        for mode in sf.MODES:
            assert decode(round_rational(Fraction(2), fmt, mode)) == 2


def test_round_zero_rejected():
    with pytest.raises(ValueError):
        round_rational(Fraction(0), BINARY64, RN)


def test_succ_one_binary64():
    one = round_rational(Fraction(1), BINARY64, RN)
    assert decode(succ(one)) == 1 + Fraction(1, 1 << 52)


def test_pred_smallest_subnormal_is_zero():
    assert pred(min_subnormal(E5M3)).is_zero()


def test_neighbors_across_zero():
    # The two zeros are one ordinal position: pred of either is the negative
    # smallest subnormal, succ of either the positive one.
    for z in (zero(E5M3, 0), zero(E5M3, 1)):
        assert pred(z).bits == min_subnormal(E5M3, 1).bits
        assert succ(z).bits == min_subnormal(E5M3, 0).bits


def test_neighbors_exhaustive_total_order():
    vals = sorted(all_finite(E5M3), key=sf.order_key)
    for a, b in zip(vals, vals[1:]):
        if a.is_zero() and b.is_zero():
            continue  # -0 / +0 share the ordinal position
        s = succ(a)
        if b.is_zero():
            assert s.is_zero()
        else:
            assert s.bits == b.bits
        p = pred(b)
        if a.is_zero():
            assert p.is_zero()
        else:
            assert p.bits == a.bits
    assert succ(max_finite(E5M3)).is_inf()
    assert pred(max_finite(E5M3, 1)).is_inf()


def test_ulp_values():
    one64 = round_rational(Fraction(1), BINARY64, RN)
    assert ulp(one64) == Fraction(1, 1 << 52)
    assert ulp(succ(one64)) == ulp(one64)
    for bits in range(1, 1 << (F5_11.precision - 1)):
        assert ulp(SoftValue(F5_11, bits)) == Fraction(1, 1 << 24)


def test_sign_rules():
    assert sign(zero(BINARY64, 0)) == 0
    assert sign(zero(BINARY64, 1)) == 1
    assert sign(round_rational(Fraction(-7, 2), BINARY64, RN)) == 1
    with pytest.raises(ValueError):
        sign(sf.nan(BINARY64))


def midpoint_rationals(fmt):
    """Midpoints of every pair of adjacent finite values, plus off-center
    points; dense enough to exercise every rounding decision once."""
    vals = sorted((decode(v) for v in all_finite(fmt)), key=lambda r: r)
    out = []
    for a, b in zip(vals, vals[1:]):
        if a == b:
            continue
        out.append(a + (b - a) / 2)
        out.append(a + (b - a) / 3)
    return out


def test_faithfulness_and_bounds_on_midpoints():
    fmt = E5M3
    grid = sorted(set(decode(v) for v in all_finite(fmt)))
    for r in midpoint_rationals(fmt):
        if r == 0:
            continue
        lo = decode(round_rational(r, fmt, RD))
        hi = decode(round_rational(r, fmt, RU))
        below = max(g for g in grid if g <= r)
        above = min(g for g in grid if g >= r)
        assert lo == below  # RD is the largest t <= r
        assert hi == above  # RU is the smallest t >= r
        for mode in sf.MODES:
            got = decode(round_rational(r, fmt, mode))
            assert lo <= got <= hi
            assert got in (below, above)
            if r != 0:
                assert (got < 0) == (r < 0) or got == 0 and sign(
                    round_rational(r, fmt, mode)
                ) == (1 if r < 0 else 0)


def test_directed_rounding_monotone_on_midpoints():
    fmt = E5M3
    pts = sorted(r for r in midpoint_rationals(fmt) if r != 0)
    for mode in (RD, RU):
        prev = None
        for r in pts:
            cur = decode(round_rational(r, fmt, mode))
            if prev is not None:
                assert prev <= cur
            prev = cur


def test_negation_symmetry():
    fmt = E5M3
    for r in midpoint_rationals(fmt):
        if r == 0:
            continue
        a = round_rational(-r, fmt, RD)
        b = round_rational(r, fmt, RU)
        assert a.bits == (b.bits ^ fmt.sign_mask)


def test_overflow_saturation_rules():
    big = decode(max_finite(E5M3)) * 2
    assert round_rational(big, E5M3, RN).is_inf()
    assert round_rational(big, E5M3, RU).is_inf()
    assert round_rational(big, E5M3, RZ).bits == max_finite(E5M3).bits
    assert round_rational(big, E5M3, RD).bits == max_finite(E5M3).bits
    assert round_rational(big, E5M3, RO).bits == max_finite(E5M3).bits
    assert round_rational(-big, E5M3, RD).is_inf()
    assert round_rational(-big, E5M3, RU).bits == max_finite(E5M3, 1).bits
    # Just above max_finite but below the nearest-even threshold: RN stays finite.
    just_over = decode(max_finite(E5M3)) + ulp(max_finite(E5M3)) / 4
    assert round_rational(just_over, E5M3, RN).bits == max_finite(E5M3).bits


def test_round_to_odd_double_rounding_harmless():
    # Round-to-odd at p+2 bits, then any standard mode to p bits, matches
    # direct rounding, across a dense rational grid.
    narrow = E5M3
    wide = FloatFormat(5, 5)
    for v in all_finite(wide):
        if v.is_zero():
            continue
        r0 = decode(v)
        w = ulp(v)
        for num in (1, 7, 9, 15):
            r = r0 + w * Fraction(num, 16)
            if r == 0:
                continue
            mid = round_rational(r, wide, RO)
            for mode in sf.STANDARD_MODES:
                direct = round_rational(r, narrow, mode)
                redone = sf.convert(mid, narrow, mode)
                assert redone.bits == direct.bits, (r, mode)


def test_fp_add_zero_sign_rules():
    fmt = BINARY64
    pz, nz = zero(fmt, 0), zero(fmt, 1)
    one = round_rational(Fraction(1), fmt, RN)
    none = round_rational(Fraction(-1), fmt, RN)
    for mode in sf.STANDARD_MODES:
        assert fp_add(pz, pz, mode).bits == pz.bits
        assert fp_add(nz, nz, mode).bits == nz.bits
        expect = nz if mode == RD else pz
        assert fp_add(one, none, mode).bits == expect.bits
        assert fp_add(pz, nz, mode).bits == expect.bits


def test_fp_mul_zero_sign_rules():
    fmt = BINARY64
    pz, nz = zero(fmt, 0), zero(fmt, 1)
    two = round_rational(Fraction(2), fmt, RN)
    ntwo = round_rational(Fraction(-2), fmt, RN)
    for mode in sf.STANDARD_MODES:
        assert fp_mul(pz, two, mode).bits == pz.bits
        assert fp_mul(nz, two, mode).bits == nz.bits
        assert fp_mul(pz, ntwo, mode).bits == nz.bits
        assert fp_mul(nz, ntwo, mode).bits == pz.bits


def test_fp_ops_match_rational_arithmetic_exhaustive_small():
    fmt = E4M3
    vals = list(all_finite(fmt))
    for a, b in itertools.product(vals[::3], vals[::3]):
        ra, rb = decode(a), decode(b)
        for mode in sf.STANDARD_MODES:
            s = fp_add(a, b, mode)
            if ra + rb != 0:
                assert s.bits == round_rational(ra + rb, fmt, mode).bits
            m = fp_mul(a, b, mode)
            if ra * rb != 0:
                assert m.bits == round_rational(ra * rb, fmt, mode).bits


def test_hex_serialization():
    v = SoftValue(F5_11, 0x0001)
    assert v.to_hex() == "0001"
    assert SoftValue.from_hex(F5_11, "0001").bits == 1
    one64 = round_rational(Fraction(1), BINARY64, RN)
    assert one64.to_hex() == "3ff0000000000000"


@given(
    num=st.integers(min_value=-(10**12), max_value=10**12).filter(lambda n: n != 0),
    den=st.integers(min_value=1, max_value=10**12),
)
@settings(max_examples=300, deadline=None)
def test_round_faithful_random_rationals(num, den):
    r = Fraction(num, den)
    fmt = FloatFormat(5, 7)
    lo = round_rational(r, fmt, RD)
    hi = round_rational(r, fmt, RU)
    if lo.is_finite() and hi.is_finite():
        assert decode(lo) <= r <= decode(hi)
        if decode(lo) != r:
            assert succ(lo).bits == hi.bits
    for mode in sf.MODES:
        v = round_rational(r, fmt, mode)
        if v.is_finite() and lo.is_finite() and hi.is_finite():
            assert decode(v) in (decode(lo), decode(hi))


def test_order_key_roundtrip():
    fmt = E5M3
    for v in all_finite(fmt):
        assert sf.from_order_key(sf.order_key(v), fmt).bits == v.bits
    assert sf.order_key(zero(fmt, 1)) + 1 == sf.order_key(zero(fmt, 0))
