"""Reduced-interval generation.

For an input with target interval [l, h] and an output-compensation
program OC, find the maximal interval [l', h'] of polynomial outputs y'
such that the whole reachable range of OC over [l', h'] stays inside
[l, h] — so a polynomial whose value at the reduced input lands anywhere
in [l', h'] yields a correct final result under every rounding mode.

The search runs over binary64 bit-pattern order (a monotone bijection
with value order), relying only on OC being monotone nondecreasing in y',
which is asserted with explicit probes rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .bounds import ExprProgram, eval_bounds, eval_single
from .eft import bits_to_float, float_to_bits
from .softfloat import (
    BINARY64,
    RN,
    RZ,
    SoftValue,
    FloatFormat,
    fp_add,
    fp_mul,
    from_order_key,
    max_finite,
    order_key_bits,
    round_rational,
)


class InfeasibleInputError(ValueError):
    """No polynomial output maps into the target interval; the pipeline
    resolves this by special-casing the input."""


class NonMonotoneOCError(RuntimeError):
    """The output compensation failed its monotonicity probes."""


@dataclass(frozen=True)
class ReducedConstraint:
    x_prime_bits: int
    l_prime_bits: int
    h_prime_bits: int
    input_bits: int


_MAX_KEY = None


def _max_key() -> int:
    global _MAX_KEY
    if _MAX_KEY is None:
        _MAX_KEY = order_key_bits(max_finite(BINARY64).bits, BINARY64)
    return _MAX_KEY


def _min_key() -> int:
    return order_key_bits(max_finite(BINARY64, 1).bits, BINARY64)


def _value_le(a: float, b: float) -> bool:
    # Plain comparison: both zeros count as equal.
    return a <= b


def _seed(target_lo: float, target_hi: float, invert) -> float:
    mid = (Fraction(target_lo) + Fraction(target_hi)) / 2
    y = invert(mid)
    if y == 0:
        return 0.0
    return bits_to_float(round_rational(y, BINARY64, RZ).bits)


def _search_largest(key_lo: int, key_hi: int, pred) -> int:
    """Largest key in [key_lo, key_hi] satisfying pred; pred is monotone
    (true then false).  pred(key_lo) must hold."""
    lo, hi = key_lo, key_hi
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if pred(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _search_smallest(key_lo: int, key_hi: int, pred) -> int:
    lo, hi = key_lo, key_hi
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def reduce_interval(
    input_bits: int,
    x_prime: float,
    target: tuple[int, int],
    oc: ExprProgram,
    invert,
) -> ReducedConstraint:
    """Maximal [l', h'] whose OC image across all rounding modes stays in
    the target interval.

    `target` holds binary64 bit patterns (l, h); `invert` maps a Fraction
    in [l, h] to an approximate mathematical preimage under OC, used only
    to seed the search.
    """
    l = bits_to_float(target[0])
    h = bits_to_float(target[1])

    def lo_of(y: float) -> float:
        return eval_bounds(oc, y, y).lo

    def hi_of(y: float) -> float:
        return eval_bounds(oc, y, y).hi

    seed = _seed(l, h, invert)
    if not (_value_le(l, lo_of(seed)) and _value_le(hi_of(seed), h)):
        raise InfeasibleInputError(
            f"input {input_bits:#x}: seed output is outside the target interval"
        )
    seed_key = order_key_bits(float_to_bits(seed), BINARY64)
    hkey = _search_largest(
        seed_key,
        _max_key(),
        lambda k: _value_le(hi_of(bits_to_float(from_order_key(k, BINARY64).bits)), h),
    )
    lkey = _search_smallest(
        _min_key(),
        seed_key,
        lambda k: _value_le(l, lo_of(bits_to_float(from_order_key(k, BINARY64).bits))),
    )
    l_prime = from_order_key(lkey, BINARY64).bits
    h_prime = from_order_key(hkey, BINARY64).bits

    _assert_monotone(oc, l_prime, seed_key, h_prime)

    # Maximality: one step outside on either side must violate containment.
    if hkey < _max_key():
        above = bits_to_float(from_order_key(hkey + 1, BINARY64).bits)
        if _value_le(hi_of(above), h):
            raise NonMonotoneOCError("upper endpoint is not maximal")
    if lkey > _min_key():
        below = bits_to_float(from_order_key(lkey - 1, BINARY64).bits)
        if _value_le(l, lo_of(below)):
            raise NonMonotoneOCError("lower endpoint is not maximal")

    # Final re-verification over the whole reduced interval.
    env = eval_bounds(oc, bits_to_float(l_prime), bits_to_float(h_prime))
    if not (_value_le(l, env.lo) and _value_le(env.hi, h)):
        raise InfeasibleInputError(f"input {input_bits:#x}: reduced interval fails containment")
    return ReducedConstraint(float_to_bits(x_prime), l_prime, h_prime, input_bits)


def _assert_monotone(oc: ExprProgram, l_bits: int, seed_key: int, h_bits: int) -> None:
    pts = [
        bits_to_float(l_bits),
        bits_to_float(from_order_key(seed_key, BINARY64).bits),
        bits_to_float(h_bits),
    ]
    last = None
    for y in pts:
        env = eval_bounds(oc, y, y)
        if last is not None and not (_value_le(last[0], env.lo) and _value_le(last[1], env.hi)):
            raise NonMonotoneOCError("three-point probe out of order")
        last = (env.lo, env.hi)


# -- single-mode variant --------------------------------------------------------
#
# The historical pipeline evaluated output compensation under nearest-even
# only.  Kept for narrowing comparisons and as the negative control in the
# end-to-end tests; evaluation uses the bit-exact software model so results
# never depend on the host environment.


def _rn_ops():
    def add(a, b):
        va = SoftValue(BINARY64, float_to_bits(a))
        vb = SoftValue(BINARY64, float_to_bits(b))
        return bits_to_float(fp_add(va, vb, RN).bits)

    def mul(a, b):
        va = SoftValue(BINARY64, float_to_bits(a))
        vb = SoftValue(BINARY64, float_to_bits(b))
        return bits_to_float(fp_mul(va, vb, RN).bits)

    return add, mul


def reduce_interval_single_mode(
    input_bits: int,
    x_prime: float,
    target: tuple[int, int],
    oc: ExprProgram,
    invert,
) -> ReducedConstraint:
    """Maximal [l', h'] under nearest-even-only OC evaluation."""
    l = bits_to_float(target[0])
    h = bits_to_float(target[1])
    add, mul = _rn_ops()

    def image(y: float) -> float:
        return eval_single(oc, y, add, mul)

    seed = _seed(l, h, invert)
    if not (_value_le(l, image(seed)) and _value_le(image(seed), h)):
        raise InfeasibleInputError(f"input {input_bits:#x}: seed output outside target")
    seed_key = order_key_bits(float_to_bits(seed), BINARY64)
    hkey = _search_largest(
        seed_key,
        _max_key(),
        lambda k: _value_le(image(bits_to_float(from_order_key(k, BINARY64).bits)), h),
    )
    lkey = _search_smallest(
        _min_key(),
        seed_key,
        lambda k: _value_le(l, image(bits_to_float(from_order_key(k, BINARY64).bits))),
    )
    return ReducedConstraint(
        float_to_bits(x_prime),
        from_order_key(lkey, BINARY64).bits,
        from_order_key(hkey, BINARY64).bits,
        input_bits,
    )


# -- grouping -------------------------------------------------------------------


@dataclass(frozen=True)
class GroupedConstraint:
    x_prime_bits: int
    l_prime_bits: int
    h_prime_bits: int
    input_bits: tuple[int, ...]


def group_constraints(constraints) -> tuple[list[GroupedConstraint], list[int]]:
    """Intersect constraints sharing a reduced input.

    Returns (groups ordered by reduced-input value, infeasible_input_bits):
    inputs whose group intersection came up empty and must be handled by
    the special-case table.
    """
    by_x: dict[int, list[ReducedConstraint]] = {}
    for c in constraints:
        by_x.setdefault(c.x_prime_bits, []).append(c)
    groups = []
    infeasible: list[int] = []
    for xbits, items in by_x.items():
        lk = max(order_key_bits(c.l_prime_bits, BINARY64) for c in items)
        hk = min(order_key_bits(c.h_prime_bits, BINARY64) for c in items)
        sources = tuple(sorted(c.input_bits for c in items))
        if lk > hk:
            infeasible.extend(sources)
            continue
        groups.append(
            GroupedConstraint(
                xbits,
                from_order_key(lk, BINARY64).bits,
                from_order_key(hk, BINARY64).bits,
                sources,
            )
        )
    groups.sort(key=lambda g: order_key_bits(g.x_prime_bits, BINARY64))
    return groups, sorted(infeasible)


# -- constraint file format -------------------------------------------------------
#
#   header:  format eE mM fn NAME oc OCID
#   records: <x_prime_hex64> <l_prime_hex64> <h_prime_hex64> <input_hex>


def write_constraint_file(path, fn: str, fmt: FloatFormat, oc_id: str, constraints) -> None:
    with open(path, "w") as f:
        f.write(f"format e{fmt.exponent_bits} m{fmt.precision} fn {fn} oc {oc_id}\n")
        width = fmt.hex_width
        for c in constraints:
            f.write(
                f"{c.x_prime_bits:016x} {c.l_prime_bits:016x} "
                f"{c.h_prime_bits:016x} {c.input_bits:0{width}x}\n"
            )


def read_constraint_file(path):
    """Returns (fn, fmt, oc_id, constraints)."""
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 7 or header[0] != "format" or header[3] != "fn" or header[5] != "oc":
            raise ValueError(f"malformed constraint file header: {' '.join(header)!r}")
        fmt = FloatFormat.parse(f"{header[1]} {header[2]}")
        fn = header[4]
        oc_id = header[6]
        out = []
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"malformed constraint record: {line!r}")
            out.append(
                ReducedConstraint(
                    int(parts[0], 16), int(parts[1], 16), int(parts[2], 16), int(parts[3], 16)
                )
            )
    return fn, fmt, oc_id, out
