import pytest

from anyround import intervalgen
from anyround.bounds import eval_bounds, offset_program, scale_program
from anyround.eft import bits_to_float, float_to_bits
from anyround.intervalgen import (
    InfeasibleInputError,
    ReducedConstraint,
    group_constraints,
    reduce_interval,
    reduce_interval_single_mode,
)
from anyround.softfloat import BINARY64, FloatFormat, from_order_key, order_key_bits


def interval_around(center: float, ulps: int) -> tuple[int, int]:
    k = order_key_bits(float_to_bits(center), BINARY64)
    return (
        from_order_key(k - ulps, BINARY64).bits,
        from_order_key(k + ulps, BINARY64).bits,
    )


def test_identity_like_oc_returns_target():
    # Adding zero is exact, so the reduced interval equals the target.
    target = interval_around(1.375, 9)
    oc = offset_program(0.0)
    c = reduce_interval(0, 0.375, target, oc, lambda t: t)
    assert (c.l_prime_bits & ~(1 << 63), c.h_prime_bits) == (target[0], target[1])


def test_power_of_two_scale_is_exact():
    target = interval_around(12.0, 700)
    oc = scale_program(8.0)
    c = reduce_interval(0, 0.5, target, oc, lambda t: t / 8)
    assert bits_to_float(c.l_prime_bits) == bits_to_float(target[0]) / 8
    assert bits_to_float(c.h_prime_bits) == bits_to_float(target[1]) / 8


def test_inexact_addition_narrows_and_is_maximal():
    # y + 3 rounds, so the multi-mode interval is strictly inside the
    # single-mode one, and stepping either endpoint out breaks containment.
    target = interval_around(3.0 + 0.7162, 2000)
    oc = offset_program(3.0)
    inv = lambda t: t - 3
    c = reduce_interval(7, 0.7162, target, oc, inv)
    l, h = bits_to_float(target[0]), bits_to_float(target[1])
    env = eval_bounds(oc, bits_to_float(c.l_prime_bits), bits_to_float(c.h_prime_bits))
    assert l <= env.lo and env.hi <= h
    above = bits_to_float(from_order_key(order_key_bits(c.h_prime_bits, BINARY64) + 1, BINARY64).bits)
    below = bits_to_float(from_order_key(order_key_bits(c.l_prime_bits, BINARY64) - 1, BINARY64).bits)
    assert eval_bounds(oc, above, above).hi > h
    assert eval_bounds(oc, below, below).lo < l

    rn = reduce_interval_single_mode(7, 0.7162, target, oc, inv)
    assert order_key_bits(rn.l_prime_bits, BINARY64) <= order_key_bits(c.l_prime_bits, BINARY64)
    assert order_key_bits(c.h_prime_bits, BINARY64) <= order_key_bits(rn.h_prime_bits, BINARY64)
    # The inexact addition makes the narrowing strict on at least one side.
    assert (
        order_key_bits(rn.l_prime_bits, BINARY64) < order_key_bits(c.l_prime_bits, BINARY64)
        or order_key_bits(c.h_prime_bits, BINARY64) < order_key_bits(rn.h_prime_bits, BINARY64)
    )


def test_seed_miss_reports_infeasible():
    # When the seed's image lands outside the target the input is reported
    # infeasible; the pipeline resolves that through the special-case table.
    center = 3.0 + 0.7162
    k = order_key_bits(float_to_bits(center), BINARY64)
    target = (from_order_key(k, BINARY64).bits, from_order_key(k, BINARY64).bits)
    oc = offset_program(3.0)
    bad_invert = lambda t: t + 40  # maps far outside [l, h]
    with pytest.raises(InfeasibleInputError):
        reduce_interval(1, 0.7162, target, oc, bad_invert)


def test_group_constraints_intersects_and_reports_empty():
    a = ReducedConstraint(100, *interval_around(1.5, 10), 1)
    b = ReducedConstraint(100, *interval_around(1.5, 4), 2)
    lo3, hi3 = interval_around(2.5, 4)
    c = ReducedConstraint(200, lo3, hi3, 3)
    groups, infeasible = group_constraints([a, b, c])
    assert not infeasible
    assert len(groups) == 2
    g = next(g for g in groups if g.x_prime_bits == 100)
    assert g.input_bits == (1, 2)
    assert (g.l_prime_bits, g.h_prime_bits) == (b.l_prime_bits, b.h_prime_bits)

    # Disjoint intervals for one reduced input make the group infeasible.
    far = interval_around(1.5 + 2.0**-30, 2)
    d = ReducedConstraint(100, far[0], far[1], 4)
    narrow = interval_around(1.5 - 2.0**-30, 2)
    e = ReducedConstraint(100, narrow[0], narrow[1], 5)
    groups, infeasible = group_constraints([d, e])
    assert infeasible == [4, 5]
    assert not groups


def test_constraint_file_roundtrip(tmp_path):
    fmt = FloatFormat(5, 5)
    cs = [
        ReducedConstraint(float_to_bits(0.25), *interval_around(1.19, 33), 0x123),
        ReducedConstraint(float_to_bits(0.5), *interval_around(1.41, 21), 0x124),
    ]
    path = tmp_path / "c.txt"
    intervalgen.write_constraint_file(path, "exp2", fmt, "pow2_scale", cs)
    fn, fmt2, oc_id, got = intervalgen.read_constraint_file(path)
    assert (fn, fmt2, oc_id) == ("exp2", fmt, "pow2_scale")
    assert got == cs
