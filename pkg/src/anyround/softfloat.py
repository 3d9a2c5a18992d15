"""Parametric software binary floating-point formats.

Bit-exact encode/decode, the five rounding functions (nearest-even, toward
zero, down, up, to-odd), neighbor/ulp/sign machinery, and rounded add/mul
with IEEE signed-zero semantics.  Everything here is pure integer
arithmetic: no host float operation is ever executed, so results never
depend on the thread's floating-point environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

# Rounding mode identifiers.  RO (round-to-odd) returns exact values
# exactly and otherwise the neighbor whose significand bit pattern is odd.
RN = "rn"
RZ = "rz"
RD = "rd"
RU = "ru"
RO = "ro"

MODES = (RN, RZ, RD, RU, RO)
STANDARD_MODES = (RN, RZ, RD, RU)


class NotFiniteError(ValueError):
    """Operation applied to NaN or an infinity where finite input is required."""


@dataclass(frozen=True)
class FloatFormat:
    """A binary interchange format: 1 sign bit, `exponent_bits`, `precision`-1
    stored significand bits (the leading significand bit is implicit).

    Derived layout values are materialized once; equality and hashing use
    only the two defining fields."""

    exponent_bits: int
    precision: int
    total_bits: int = field(init=False, compare=False, repr=False)
    bias: int = field(init=False, compare=False, repr=False)
    e_min: int = field(init=False, compare=False, repr=False)
    e_max: int = field(init=False, compare=False, repr=False)
    sign_mask: int = field(init=False, compare=False, repr=False)
    frac_mask: int = field(init=False, compare=False, repr=False)
    exp_field_max: int = field(init=False, compare=False, repr=False)
    hex_width: int = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.exponent_bits < 2:
            raise ValueError("need at least 2 exponent bits")
        if self.precision < 2:
            raise ValueError("need at least 2 significand bits")
        total = 1 + self.exponent_bits + self.precision - 1
        if total > 64:
            raise ValueError("formats wider than 64 bits are not supported")
        bias = (1 << (self.exponent_bits - 1)) - 1
        set_ = object.__setattr__
        set_(self, "total_bits", total)
        set_(self, "bias", bias)
        set_(self, "e_min", 1 - bias)
        set_(self, "e_max", bias)
        set_(self, "sign_mask", 1 << (total - 1))
        set_(self, "frac_mask", (1 << (self.precision - 1)) - 1)
        set_(self, "exp_field_max", (1 << self.exponent_bits) - 1)
        set_(self, "hex_width", -(-total // 4))

    def spec_string(self) -> str:
        return f"e{self.exponent_bits} m{self.precision}"

    @classmethod
    def parse(cls, text: str) -> "FloatFormat":
        """Parse an "eE mM" format string, e.g. "e8 m24"."""
        parts = text.replace(",", " ").split()
        if len(parts) != 2 or not parts[0].startswith("e") or not parts[1].startswith("m"):
            raise ValueError(f"bad format string {text!r}; expected like 'e5 m7'")
        return cls(int(parts[0][1:]), int(parts[1][1:]))


BINARY64 = FloatFormat(11, 53)


@dataclass(frozen=True)
class SoftValue:
    """A bit pattern in a given format.  `bits` always fits `fmt.total_bits`."""

    fmt: FloatFormat
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.fmt.total_bits):
            raise ValueError("bit pattern out of range for format")

    # -- classification ----------------------------------------------------

    @property
    def sign_bit(self) -> int:
        return self.bits >> (self.fmt.total_bits - 1)

    @property
    def exp_field(self) -> int:
        return (self.bits >> (self.fmt.precision - 1)) & self.fmt.exp_field_max

    @property
    def frac_field(self) -> int:
        return self.bits & self.fmt.frac_mask

    def is_nan(self) -> bool:
        return self.exp_field == self.fmt.exp_field_max and self.frac_field != 0

    def is_inf(self) -> bool:
        return self.exp_field == self.fmt.exp_field_max and self.frac_field == 0

    def is_finite(self) -> bool:
        return self.exp_field != self.fmt.exp_field_max

    def is_zero(self) -> bool:
        return self.exp_field == 0 and self.frac_field == 0

    def to_hex(self) -> str:
        return format(self.bits, f"0{self.fmt.hex_width}x")

    @classmethod
    def from_hex(cls, fmt: FloatFormat, text: str) -> "SoftValue":
        return cls(fmt, int(text, 16))


# -- constructors -----------------------------------------------------------


def zero(fmt: FloatFormat, sign: int = 0) -> SoftValue:
    return SoftValue(fmt, fmt.sign_mask if sign else 0)


def infinity(fmt: FloatFormat, sign: int = 0) -> SoftValue:
    bits = fmt.exp_field_max << (fmt.precision - 1)
    return SoftValue(fmt, bits | (fmt.sign_mask if sign else 0))


def nan(fmt: FloatFormat) -> SoftValue:
    # The one canonical NaN: quiet bit set, zero payload, positive sign.
    bits = (fmt.exp_field_max << (fmt.precision - 1)) | (1 << (fmt.precision - 2))
    return SoftValue(fmt, bits)


def min_subnormal(fmt: FloatFormat, sign: int = 0) -> SoftValue:
    return SoftValue(fmt, 1 | (fmt.sign_mask if sign else 0))


def max_finite(fmt: FloatFormat, sign: int = 0) -> SoftValue:
    bits = ((fmt.exp_field_max - 1) << (fmt.precision - 1)) | fmt.frac_mask
    return SoftValue(fmt, bits | (fmt.sign_mask if sign else 0))


# -- decode -----------------------------------------------------------------


def components(v: SoftValue) -> tuple[int, int, int]:
    """Finite value as (sign, significand_integer, exponent_of_lsb) with
    value = (-1)^sign * significand * 2^exp.  Zeros give significand 0."""
    if not v.is_finite():
        raise NotFiniteError("components() requires a finite value")
    fmt = v.fmt
    e_field = v.exp_field
    frac = v.frac_field
    if e_field == 0:
        return v.sign_bit, frac, fmt.e_min - (fmt.precision - 1)
    sig = frac | (1 << (fmt.precision - 1))
    return v.sign_bit, sig, e_field - fmt.bias - (fmt.precision - 1)


def decode(v: SoftValue) -> Fraction:
    """Exact rational value of a finite SoftValue.  Both zeros map to
    Fraction(0); recover the zero's sign with sign(v).  NaN and infinities
    raise NotFiniteError."""
    s, sig, exp = components(v)
    mag = Fraction(sig << exp) if exp >= 0 else Fraction(sig, 1 << -exp)
    return -mag if s else mag


def sign(v: SoftValue) -> int:
    """0 for positive values and +0, 1 for negative values and -0."""
    if v.is_nan():
        raise ValueError("sign of NaN is undefined")
    return v.sign_bit


def ulp(v: SoftValue) -> Fraction:
    """2^(e-p+1) with e the value's exponent (e_min throughout the
    subnormal range)."""
    if not v.is_finite() or v.is_zero():
        raise ValueError("ulp requires a finite nonzero value")
    fmt = v.fmt
    e_field = v.exp_field
    e = fmt.e_min if e_field == 0 else e_field - fmt.bias
    shift = e - fmt.precision + 1
    return Fraction(1 << shift) if shift >= 0 else Fraction(1, 1 << -shift)


# -- neighbors ----------------------------------------------------------------
#
# The two zeros occupy a single ordinal position in the neighbor order
#   ..., -min_subnormal, (-0 / +0), +min_subnormal, ...
# so pred of either zero is -min_subnormal and succ of either zero is
# +min_subnormal.  succ(-min_subnormal) lands on the zero position and
# is reported as -0 (pred(+min_subnormal) as +0).


def succ(v: SoftValue) -> SoftValue:
    """Next value in ascending order.  succ(max_finite) is +inf."""
    if v.is_nan():
        raise ValueError("succ of NaN is undefined")
    fmt = v.fmt
    if v.is_inf():
        if v.sign_bit:
            return SoftValue(fmt, max_finite(fmt, 1).bits)
        raise ValueError("succ of +inf is undefined")
    if v.is_zero():
        return min_subnormal(fmt, 0)
    if v.sign_bit:
        return SoftValue(fmt, v.bits - 1)
    return SoftValue(fmt, v.bits + 1)


def pred(v: SoftValue) -> SoftValue:
    """Previous value in ascending order.  pred(-max_finite) is -inf."""
    if v.is_nan():
        raise ValueError("pred of NaN is undefined")
    fmt = v.fmt
    if v.is_inf():
        if v.sign_bit:
            raise ValueError("pred of -inf is undefined")
        return SoftValue(fmt, max_finite(fmt, 0).bits)
    if v.is_zero():
        return min_subnormal(fmt, 1)
    if v.sign_bit:
        return SoftValue(fmt, v.bits + 1)
    return SoftValue(fmt, v.bits - 1)


def order_key(v: SoftValue) -> int:
    """Monotone map from bit pattern to an integer whose natural order is
    the value order, with -0 immediately below +0."""
    if v.is_nan():
        raise ValueError("NaN is unordered")
    return order_key_bits(v.bits, v.fmt)


def order_key_bits(bits: int, fmt: FloatFormat) -> int:
    mask = fmt.sign_mask
    if bits & mask:
        return (~bits) & ((1 << fmt.total_bits) - 1)
    return bits | mask


def from_order_key(key: int, fmt: FloatFormat) -> SoftValue:
    mask = fmt.sign_mask
    if key & mask:
        return SoftValue(fmt, key ^ mask)
    return SoftValue(fmt, (~key) & ((1 << fmt.total_bits) - 1))


# -- rounding -----------------------------------------------------------------


def _overflow(fmt: FloatFormat, neg: bool, mode: str) -> SoftValue:
    # RN overflows to infinity; RZ and the inward directed mode saturate
    # to the largest finite magnitude.  RO saturates as well: max_finite
    # has an all-ones significand, so its bit pattern is always odd.
    if mode == RN:
        return infinity(fmt, 1 if neg else 0)
    if mode == RU:
        return max_finite(fmt, 1) if neg else infinity(fmt, 0)
    if mode == RD:
        return infinity(fmt, 1) if neg else max_finite(fmt, 0)
    return max_finite(fmt, 1 if neg else 0)


def _round_scaled(neg: bool, mag: int, exp: int, fmt: FloatFormat, mode: str) -> SoftValue:
    """Round the nonzero magnitude mag * 2^exp to the format.  Core of all
    rounding paths; mag > 0."""
    p = fmt.precision
    e = mag.bit_length() - 1 + exp
    if e > fmt.e_max:
        return _overflow(fmt, neg, mode)
    ee = e if e >= fmt.e_min else fmt.e_min
    # One extra bit below the target significand for the nearest-even tie.
    shift = p - ee + exp  # == (p - 1 - ee) - exp + 1 positions to move the LSB
    if shift >= 0:
        q2 = mag << shift
        sticky = 0
    else:
        q2 = mag >> -shift
        sticky = mag & ((1 << -shift) - 1)
    sig = q2 >> 1
    guard = q2 & 1
    inexact = guard or sticky
    if mode == RN:
        if guard and (sticky or (sig & 1)):
            sig += 1
    elif mode == RD:
        if neg and inexact:
            sig += 1
    elif mode == RU:
        if not neg and inexact:
            sig += 1
    elif mode == RO:
        if inexact:
            sig |= 1
    elif mode != RZ:
        raise ValueError(f"unknown rounding mode {mode!r}")
    if sig >> p:
        sig >>= 1
        ee += 1
        if ee > fmt.e_max:
            return _overflow(fmt, neg, mode)
    return _encode_sig(fmt, neg, sig, ee)


def _encode_sig(fmt: FloatFormat, neg: bool, sig: int, ee: int) -> SoftValue:
    sbit = fmt.sign_mask if neg else 0
    if sig == 0:
        return SoftValue(fmt, sbit)
    if sig < (1 << (fmt.precision - 1)):
        # Subnormal; only reachable with ee == e_min.
        return SoftValue(fmt, sbit | sig)
    biased = ee + fmt.bias
    return SoftValue(fmt, sbit | (biased << (fmt.precision - 1)) | (sig & fmt.frac_mask))


def round_rational(r, fmt: FloatFormat, mode: str) -> SoftValue:
    """Round a nonzero rational to the format under the given mode.

    Accepts a Fraction or int.  The sign rules for zero *results* of
    rounded arithmetic live in fp_add/fp_mul, so a zero argument is a
    caller error here.
    """
    if isinstance(r, int):
        num, den = r, 1
    else:
        num, den = r.numerator, r.denominator
    if num == 0:
        raise ValueError("round_rational is defined on nonzero rationals only")
    neg = num < 0
    a = -num if neg else num
    if den & (den - 1) == 0:
        return _round_scaled(neg, a, -(den.bit_length() - 1), fmt, mode)
    # General denominator: pull out p+2 quotient bits plus a sticky bit.
    p = fmt.precision
    e = a.bit_length() - den.bit_length()
    if e >= 0:
        if a < (den << e):
            e -= 1
    else:
        if (a << -e) < den:
            e -= 1
    ee = e if e >= fmt.e_min else fmt.e_min
    shift = p - ee  # one extra low bit
    if shift >= 0:
        q2, rem = divmod(a << shift, den)
    else:
        q2, rem = divmod(a, den << -shift)
    if rem:
        # Carry the nonzero remainder as a sticky low bit.
        return _round_scaled(neg, (q2 << 1) | 1, ee - p - 1, fmt, mode)
    return _round_scaled(neg, q2, ee - p, fmt, mode)


def convert(v: SoftValue, fmt: FloatFormat, mode: str) -> SoftValue:
    """Re-round a value into another format.  NaN maps to the canonical
    NaN, infinities and zeros keep their sign."""
    if v.is_nan():
        return nan(fmt)
    if v.is_inf():
        return infinity(fmt, v.sign_bit)
    if v.is_zero():
        return zero(fmt, v.sign_bit)
    s, sig, exp = components(v)
    return _round_scaled(bool(s), sig, exp, fmt, mode)


# -- rounded arithmetic -------------------------------------------------------


def _require_finite(v: SoftValue) -> None:
    if not v.is_finite():
        raise NotFiniteError("operands must be finite (NaN/inf excluded)")


def fp_add(a: SoftValue, b: SoftValue, mode: str) -> SoftValue:
    """Rounded addition with IEEE signed-zero semantics: (+0)+(+0) is +0,
    (-0)+(-0) is -0, and an exactly cancelling sum is -0 under RD and +0
    under every other mode."""
    _require_finite(a)
    _require_finite(b)
    fmt = a.fmt
    if fmt != b.fmt:
        raise ValueError("operand formats differ")
    sa, ma, ea = components(a)
    sb, mb, eb = components(b)
    if ma == 0 and mb == 0:
        if sa == sb:
            return zero(fmt, sa)
        return zero(fmt, 1 if mode == RD else 0)
    e0 = min(ea, eb)
    total = ((-ma if sa else ma) << (ea - e0)) + ((-mb if sb else mb) << (eb - e0))
    if total == 0:
        return zero(fmt, 1 if mode == RD else 0)
    neg = total < 0
    return _round_scaled(neg, -total if neg else total, e0, fmt, mode)


def fp_mul(a: SoftValue, b: SoftValue, mode: str) -> SoftValue:
    """Rounded multiplication; a zero operand yields the zero whose sign is
    the XOR of the operand signs, under every mode."""
    _require_finite(a)
    _require_finite(b)
    fmt = a.fmt
    if fmt != b.fmt:
        raise ValueError("operand formats differ")
    sa, ma, ea = components(a)
    sb, mb, eb = components(b)
    s = sa ^ sb
    if ma == 0 or mb == 0:
        return zero(fmt, s)
    return _round_scaled(bool(s), ma * mb, ea + eb, fmt, mode)
