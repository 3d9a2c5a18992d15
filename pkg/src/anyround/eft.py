"""Error-free transformations over native binary64 arithmetic.

add_rz/mul_rz produce the round-toward-zero sum/product no matter which of
the four standard rounding modes the calling thread has set, without ever
touching the FP environment.  add_directed/mul_directed do the same for
round-down and round-up.  The mechanism: compute the operation natively,
recover a faithful rounding of its error with FastTwoSum (addition) or a
pair of FMA residuals (multiplication), and when the error's sign shows
the native result landed on the wrong side of the exact value, step the
result one ulp by decrementing or incrementing its bit pattern.

Preconditions throughout: operands are finite (no NaN, no infinity) and
the exact result does not overflow under any rounding mode.  Callers in
this package guarantee both.
"""

from __future__ import annotations

import ctypes
import struct

from . import fenv
from .softfloat import BINARY64, RD, RU, components

_pack = struct.Struct("<d").pack
_unpack = struct.Struct("<Q").unpack
_packq = struct.Struct("<Q").pack
_unpackd = struct.Struct("<d").unpack

SIGN_BIT = 0x8000000000000000
_ABS_MASK = 0x7FFFFFFFFFFFFFFF


def float_to_bits(x: float) -> int:
    return _unpack(_pack(x))[0]


def bits_to_float(u: int) -> float:
    return _unpackd(_packq(u))[0]


# -- fused multiply-add -------------------------------------------------------
#
# mul_rz's residual comparison needs a correctly rounded FMA; a double
# rounded emulation would defeat it.  Probe for a native one (math.fma on
# 3.13+, else libm via ctypes) and validate it on a case where a separately
# rounded multiply-then-add gives the wrong answer.  Fall back to exact
# rational evaluation plus a single rounding under the thread's mode.


def _soft_fma(a: float, b: float, c: float) -> float:
    sa, ma, ea = components(_sv(a))
    sb, mb, eb = components(_sv(b))
    sc, mc, ec = components(_sv(c))
    prod = (-ma if sa else ma) * (-mb if sb else mb)
    e0 = min(ea + eb, ec)
    total = (prod << (ea + eb - e0)) + ((-mc if sc else mc) << (ec - e0))
    if total == 0:
        return -0.0 if fenv.get_mode() is fenv.AmbientMode.RD else 0.0
    mode = fenv.get_mode().value
    neg = total < 0
    from .softfloat import _round_scaled  # bit-exact single rounding

    v = _round_scaled(neg, -total if neg else total, e0, BINARY64, mode)
    return bits_to_float(v.bits)


def _sv(x: float):
    from .softfloat import SoftValue

    return SoftValue(BINARY64, float_to_bits(x))


def _probe_fma(candidate) -> bool:
    # 1 + 2^-27 squared: the residual must come back exactly as 2^-54.
    a = 1.0 + bits_to_float(0x3E40000000000000)
    m = a * a
    if candidate(a, a, -m) != bits_to_float(0x3C90000000000000):
        return False
    # (1+2^-52)^2 - (1+2^-51) is 2^-104; a separately rounded
    # multiply-then-add collapses it to zero.
    x = bits_to_float(0x3FF0000000000001)
    c = -bits_to_float(0x3FF0000000000002)
    return candidate(x, x, c) == bits_to_float(0x3970000000000000)


def _load_fma():
    try:
        import math

        if hasattr(math, "fma") and _probe_fma(math.fma):
            return math.fma, "math.fma"
    except Exception:  # pragma: no cover
        pass
    try:
        libm = ctypes.CDLL("libm.so.6")
        libm.fma.argtypes = [ctypes.c_double] * 3
        libm.fma.restype = ctypes.c_double
        if _probe_fma(libm.fma):
            return libm.fma, "libm"
    except Exception:  # pragma: no cover
        pass
    return _soft_fma, "softfloat"  # pragma: no cover


fma, FMA_BACKEND = _load_fma()


# -- addition -----------------------------------------------------------------


def fast_two_sum(a: float, b: float) -> tuple[float, float]:
    """Dekker's three-operation sum: s is the native rounded sum, t a
    faithful rounding of the error a+b-s (exact under nearest-even).
    Operands are swapped internally so the larger magnitude comes first."""
    s = a + b
    if abs(b) > abs(a):
        a, b = b, a
    z = s - a
    t = b - z
    return s, t


def add_rz(a: float, b: float) -> float:
    """a + b rounded toward zero, under any ambient rounding mode."""
    ua = float_to_bits(a)
    ub = float_to_bits(b)
    if ua ^ ub == SIGN_BIT:
        # Exact cancellation: toward-zero yields +0 regardless of mode.
        return 0.0
    s = a + b
    if abs(b) > abs(a):
        a, b = b, a
    z = s - a
    t = b - z
    ut = float_to_bits(t)
    if (ut << 1) & 0xFFFFFFFFFFFFFFFF:  # t is not a zero: the sum was inexact
        us = float_to_bits(s)
        if (ut ^ us) & SIGN_BIT:  # error opposes s: |a+b| < |s|, step inward
            return bits_to_float(us - 1)
    return s


def mul_rz(a: float, b: float) -> float:
    """a * b rounded toward zero, under any ambient rounding mode."""
    m = a * b
    c1 = fma(a, b, -m)
    c2 = fma(-a, b, m)
    u1 = float_to_bits(c1)
    if u1 != float_to_bits(c2):  # the product was inexact (survives underflow)
        um = float_to_bits(m)
        if (u1 ^ um) & SIGN_BIT:  # |a*b| < |m|: step toward zero
            return bits_to_float(um - 1)
    return m


# -- directed emulation ------------------------------------------------------
#
# Same skeleton: the residual's sign says on which side of the exact value
# the native result sits.  Stepping toward -inf from a positive (or +0)
# pattern is bits-1, from a negative (or -0) pattern bits+1; mirrored for
# +inf.  Zero crossings cannot occur: a nonzero exact sum has magnitude at
# least one subnormal quantum, and an underflowing product steps between
# the zero and the smallest subnormal of the correct sign only.


def _step_down(u: int) -> int:
    # one value toward -inf
    if u & SIGN_BIT:
        return u + 1
    assert u != 0, "stepping below +0 would need a -subnormal crossing"
    return u - 1


def _step_up(u: int) -> int:
    # one value toward +inf
    if u & SIGN_BIT:
        assert u != SIGN_BIT, "stepping above -0 would need a +subnormal crossing"
        return u - 1
    return u + 1


def add_directed(a: float, b: float, direction: str) -> float:
    """a + b rounded down (direction=RD) or up (RU), under any ambient mode."""
    ua = float_to_bits(a)
    ub = float_to_bits(b)
    if ua ^ ub == SIGN_BIT:
        return -0.0 if direction == RD else 0.0
    s = a + b
    if abs(b) > abs(a):
        a, b = b, a
    z = s - a
    t = b - z
    ut = float_to_bits(t)
    if (ut << 1) & 0xFFFFFFFFFFFFFFFF:
        us = float_to_bits(s)
        if direction == RD:
            if ut & SIGN_BIT:  # exact sum below s
                return bits_to_float(_step_down(us))
        elif direction == RU:
            if not ut & SIGN_BIT:  # exact sum above s
                return bits_to_float(_step_up(us))
        else:
            raise ValueError(f"direction must be {RD!r} or {RU!r}")
    elif direction not in (RD, RU):
        raise ValueError(f"direction must be {RD!r} or {RU!r}")
    return s


def mul_directed(a: float, b: float, direction: str) -> float:
    """a * b rounded down (direction=RD) or up (RU), under any ambient mode."""
    m = a * b
    c1 = fma(a, b, -m)
    c2 = fma(-a, b, m)
    u1 = float_to_bits(c1)
    if u1 != float_to_bits(c2):
        um = float_to_bits(m)
        if direction == RD:
            if u1 & SIGN_BIT:  # exact product below m
                return bits_to_float(_step_down(um))
        elif direction == RU:
            if not u1 & SIGN_BIT:  # exact product above m
                return bits_to_float(_step_up(um))
        else:
            raise ValueError(f"direction must be {RD!r} or {RU!r}")
    elif direction not in (RD, RU):
        raise ValueError(f"direction must be {RD!r} or {RU!r}")
    return m
