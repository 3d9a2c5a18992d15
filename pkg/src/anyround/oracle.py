"""Rigorous evaluation of exp2/log2 on rational inputs.

Every value is computed as an exact rational enclosure [lo, hi] that is
guaranteed to contain the true result: series are summed in scaled-integer
arithmetic with one-sided rounding and explicit tail bounds.  From the
enclosure we derive, per input of a small float format,

  * the round-to-odd result in the format widened by two significand bits
    (exactness is detected algebraically, so refinement always terminates
    for the remaining irrational cases, with a hard precision cap as a
    guard), and

  * the binary64 rounding interval [l, h]: exactly the binary64 values
    whose round-to-odd rounding in the widened format reproduces that
    result.  Any value in [l, h], re-rounded to any narrower format under
    any standard mode, matches rounding the true result directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .softfloat import (
    BINARY64,
    RO,
    FloatFormat,
    SoftValue,
    convert,
    decode,
    infinity,
    nan,
    order_key,
    pred,
    round_rational,
    succ,
    zero,
)

FUNCTIONS = ("exp2", "log2")

PRECISION_CAP_BITS = 4096


class UndecidedError(ArithmeticError):
    """Enclosure refinement hit the precision cap without separating the
    value from a rounding boundary."""


class DomainError(ValueError):
    """Input outside the function's domain."""


@dataclass(frozen=True)
class RationalInterval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("interval endpoints out of order")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo


def ro_format(fmt: FloatFormat) -> FloatFormat:
    """The oracle format: same exponent range, two extra significand bits."""
    return FloatFormat(fmt.exponent_bits, fmt.precision + 2)


# -- scaled-integer series ----------------------------------------------------
#
# An enclosure of a positive real v at working precision W is a pair of
# integers (lo, hi) with lo * 2^-W <= v <= hi * 2^-W.


def _div_down(a: int, b: int) -> int:
    return a // b


def _div_up(a: int, b: int) -> int:
    return -((-a) // b)


_LN2_CACHE: dict[int, tuple[int, int]] = {}


def _ln2_scaled(w: int) -> tuple[int, int]:
    """ln 2 = 2 atanh(1/3): all-positive series, geometric tail bound."""
    if w in _LN2_CACHE:
        return _LN2_CACHE[w]
    one = 1 << w
    term_lo = _div_down(2 * one, 3)  # 2 * (1/3)^(2k+1), k = 0
    term_hi = _div_up(2 * one, 3)
    lo = term_lo
    hi = term_hi
    k = 1
    while term_hi > 2:
        term_lo = _div_down(term_lo, 9)
        term_hi = _div_up(term_hi, 9)
        lo += _div_down(term_lo, 2 * k + 1)
        hi += _div_up(term_hi, 2 * k + 1)
        k += 1
    # Remaining tail: sum_{j>k} term_j/(2j+1) <= term_k * (1/9)/(1 - 1/9).
    hi += _div_up(term_hi, 8) + 1
    _LN2_CACHE[w] = (lo, hi)
    return lo, hi


def _exp_enclosure(u_lo: int, u_hi: int, w: int) -> tuple[int, int]:
    """e^u for u in [u_lo, u_hi] * 2^-W with 0 <= u < ln 2: Taylor series;
    the dropped tail after the u^k/k! term is below (u^k/k!) * u/(1-u)."""
    one = 1 << w
    lo = one
    hi = one
    term_lo = one
    term_hi = one
    k = 1
    while True:
        term_lo = _div_down(term_lo * u_lo, one * k)
        term_hi = _div_up(term_hi * u_hi, one * k)
        lo += term_lo
        hi += term_hi
        k += 1
        if term_hi <= 2:
            break
        if k > 4 * w:  # series must have converged long before
            raise UndecidedError("exp series failed to converge")
    # u/(1-u) < 7/3 for u < ln 2.
    hi += _div_up(term_hi * 7, 3) + 1
    return lo, hi


def _atanh_enclosure(t_lo: int, t_hi: int, w: int) -> tuple[int, int]:
    """atanh(t) for t in [t_lo, t_hi] * 2^-W with 0 <= t < 1/3: odd series
    t + t^3/3 + ...; the dropped tail is below t^(2k+1) * t^2/(1 - t^2)."""
    one = 1 << w
    t2_lo = _div_down(t_lo * t_lo, one)
    t2_hi = _div_up(t_hi * t_hi, one)
    lo = t_lo
    hi = t_hi
    pow_lo, pow_hi = t_lo, t_hi  # t^(2k+1)
    k = 1
    while pow_hi > 2:
        pow_lo = _div_down(pow_lo * t2_lo, one)
        pow_hi = _div_up(pow_hi * t2_hi, one)
        lo += _div_down(pow_lo, 2 * k + 1)
        hi += _div_up(pow_hi, 2 * k + 1)
        k += 1
        if k > 4 * w:
            raise UndecidedError("atanh series failed to converge")
    # t^2/(1 - t^2) < 1/8 for t < 1/3.
    hi += _div_up(pow_hi, 8) + 1
    return lo, hi


def _frac_parts(x: Fraction) -> tuple[int, int, int]:
    """floor(x) plus the fractional part as a (num, den) pair."""
    n = x.numerator // x.denominator
    r = x - n
    return n, r.numerator, r.denominator


def _exp2_enclosure(x: Fraction, w: int) -> RationalInterval:
    n, rnum, rden = _frac_parts(x)
    scale = Fraction(1 << n) if n >= 0 else Fraction(1, 1 << -n)
    if rnum == 0:
        return RationalInterval(scale, scale)
    ln2_lo, ln2_hi = _ln2_scaled(w)
    # u = r * ln2, r in (0, 1)
    u_lo = _div_down(rnum * ln2_lo, rden)
    u_hi = _div_up(rnum * ln2_hi, rden)
    e_lo, e_hi = _exp_enclosure(u_lo, u_hi, w)
    return RationalInterval(Fraction(e_lo, 1 << w) * scale, Fraction(e_hi, 1 << w) * scale)


def _log2_enclosure(x: Fraction, w: int) -> RationalInterval:
    if x <= 0:
        raise DomainError("log2 requires a positive input")
    num, den = x.numerator, x.denominator
    k = num.bit_length() - den.bit_length()
    if k >= 0:
        if num < (den << k):
            k -= 1
    else:
        if (num << -k) < den:
            k -= 1
    # m = x / 2^k in [1, 2)
    mnum, mden = num, den
    if k >= 0:
        mden <<= k
    else:
        mnum <<= -k
    if mnum == mden:
        return RationalInterval(Fraction(k), Fraction(k))
    # ln m = 2 atanh((m-1)/(m+1)), t in (0, 1/3)
    tnum = mnum - mden
    tden = mnum + mden
    t_lo = _div_down(tnum << w, tden)
    t_hi = _div_up(tnum << w, tden)
    a_lo, a_hi = _atanh_enclosure(t_lo, t_hi, w)
    ln2_lo, ln2_hi = _ln2_scaled(w)
    # log2(m) = 2 atanh(t)/ln 2, all positive
    q_lo = _div_down(2 * a_lo << w, ln2_hi)
    q_hi = _div_up(2 * a_hi << w, ln2_lo)
    return RationalInterval(k + Fraction(q_lo, 1 << w), k + Fraction(q_hi, 1 << w))


_ENCLOSURES = {"exp2": _exp2_enclosure, "log2": _log2_enclosure}


def exact_value(fn: str, x: Fraction) -> Fraction | None:
    """The exact rational result, when one exists.

    exp2 is rational exactly at integers; log2 exactly at powers of two.
    Everywhere else the value is irrational, so rounding decisions are
    always decidable by refinement.
    """
    if fn == "exp2":
        if x.denominator == 1:
            n = x.numerator
            return Fraction(1 << n) if n >= 0 else Fraction(1, 1 << -n)
        return None
    if fn == "log2":
        if x <= 0:
            raise DomainError("log2 requires a positive input")
        num, den = x.numerator, x.denominator
        if num & (num - 1) == 0 and den & (den - 1) == 0:
            return Fraction(num.bit_length() - den.bit_length())
        return None
    raise ValueError(f"unknown function {fn!r}")


def eval_fn(fn: str, x: Fraction, target_gap: Fraction) -> RationalInterval:
    """Enclosure of fn(x) with width below target_gap."""
    if fn not in _ENCLOSURES:
        raise ValueError(f"unknown function {fn!r}")
    if target_gap <= 0:
        raise ValueError("target_gap must be positive")
    exact = exact_value(fn, x)
    if exact is not None:
        return RationalInterval(exact, exact)
    w = 64
    while True:
        enc = _ENCLOSURES[fn](x, w)
        if enc.width < target_gap:
            return enc
        if w >= PRECISION_CAP_BITS:
            raise UndecidedError(f"no enclosure of width {target_gap} within {PRECISION_CAP_BITS} bits")
        w *= 2


def _round_agrees(enc: RationalInterval, fmt: FloatFormat, mode: str) -> SoftValue | None:
    if enc.lo == 0 or enc.hi == 0 or (enc.lo < 0) != (enc.hi < 0):
        return None  # sign not yet separated; refine
    lo = round_rational(enc.lo, fmt, mode)
    hi = round_rational(enc.hi, fmt, mode)
    if lo.bits == hi.bits:
        return lo
    return None


def oracle_ro(fn: str, x: SoftValue) -> SoftValue:
    """Round-to-odd result of fn at a finite input, in the widened format."""
    if not x.is_finite():
        raise NotImplementedError("special inputs are classified separately")
    ofmt = ro_format(x.fmt)
    r = decode(x)
    if fn == "log2" and r <= 0:
        raise DomainError("log2 requires a positive input")
    exact = exact_value(fn, r)
    if exact is not None:
        if exact == 0:
            return zero(ofmt, 0)
        return round_rational(exact, ofmt, RO)
    w = 64
    while w <= PRECISION_CAP_BITS:
        v = _round_agrees(_ENCLOSURES[fn](r, w), ofmt, RO)
        if v is not None:
            return v
        w *= 2
    raise UndecidedError(f"round-to-odd of {fn} at {r} undecided at {PRECISION_CAP_BITS} bits")


@dataclass(frozen=True)
class RoundingInterval:
    """Closed binary64 interval [l, h]: exactly the values whose
    round-to-odd rounding in the widened format equals the oracle value."""

    l_bits: int
    h_bits: int


def rounding_interval(v: SoftValue) -> RoundingInterval:
    """Interval for an oracle value in the widened format.

    Odd significand patterns arise only from inexact values, so every
    binary64 value strictly between the two neighbors re-rounds to v; even
    patterns only from exact ones, so the interval degenerates to v itself.
    """
    if not v.is_finite():
        raise ValueError("rounding intervals exist for finite oracle values only")
    if v.bits & 1 == 0:
        b = convert(v, BINARY64, RO)  # exact: any mode gives the same bits
        return RoundingInterval(b.bits, b.bits)
    below = pred(v)
    above = succ(v)
    l64 = succ(convert(below, BINARY64, RO))
    h64 = pred(convert(above, BINARY64, RO))
    return RoundingInterval(l64.bits, h64.bits)


# -- per-format input classification -------------------------------------------


def special_result(fn: str, x: SoftValue) -> SoftValue | None:
    """Fixed binary64 result for inputs outside the oracle's domain
    (NaN, infinities, and log2 at nonpositive arguments); None when the
    input goes through the rational oracle."""
    if x.is_nan():
        return nan(BINARY64)
    if fn == "exp2":
        if x.is_inf():
            return infinity(BINARY64, 0) if x.sign_bit == 0 else zero(BINARY64, 0)
        return None
    if fn == "log2":
        if x.is_inf():
            return infinity(BINARY64, 0) if x.sign_bit == 0 else nan(BINARY64)
        if x.is_zero():
            return infinity(BINARY64, 1)
        if x.sign_bit:
            return nan(BINARY64)
        return None
    raise ValueError(f"unknown function {fn!r}")


@dataclass(frozen=True)
class OracleRecord:
    input_bits: int
    ro_value: SoftValue
    interval: RoundingInterval


def oracle_records(fn: str, fmt: FloatFormat):
    """Classify every input bit pattern of the format.

    Returns (specials, records): specials maps input bits to fixed binary64
    result bits; records carry the round-to-odd oracle value and rounding
    interval for every remaining input, ordered by input value.
    """
    specials: dict[int, int] = {}
    records: list[OracleRecord] = []
    ordered = []
    for bits in range(1 << fmt.total_bits):
        x = SoftValue(fmt, bits)
        s = special_result(fn, x)
        if s is not None:
            specials[bits] = s.bits
            continue
        ordered.append((order_key(x), bits, x))
    ordered.sort()
    for _, bits, x in ordered:
        v = oracle_ro(fn, x)
        records.append(OracleRecord(bits, v, rounding_interval(v)))
    return specials, records


# -- interval file format -------------------------------------------------------
#
# Text, one record per oracle-carrying input:
#   header:  format eE mM fn NAME ro_bits K
#   records: <input_hex> <l_hex64> <h_hex64>


def write_interval_file(path, fn: str, fmt: FloatFormat, records) -> None:
    ofmt = ro_format(fmt)
    with open(path, "w") as f:
        f.write(f"format e{fmt.exponent_bits} m{fmt.precision} fn {fn} ro_bits {ofmt.total_bits}\n")
        width = fmt.hex_width
        for rec in records:
            f.write(
                f"{rec.input_bits:0{width}x} {rec.interval.l_bits:016x} {rec.interval.h_bits:016x}\n"
            )


def read_interval_file(path):
    """Returns (fn, fmt, rows) with rows as (input_bits, l_bits, h_bits)."""
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 7 or header[0] != "format" or header[3] != "fn" or header[5] != "ro_bits":
            raise ValueError(f"malformed interval file header: {' '.join(header)!r}")
        fmt = FloatFormat.parse(f"{header[1]} {header[2]}")
        fn = header[4]
        ro_bits = int(header[6])
        if ro_bits != ro_format(fmt).total_bits:
            raise ValueError("ro_bits does not match the widened format")
        rows = []
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ValueError(f"malformed interval record: {line!r}")
            rows.append((int(parts[0], 16), int(parts[1], 16), int(parts[2], 16)))
    return fn, fmt, rows


# -- independent expected values ------------------------------------------------


def expected_results(fn: str, x: SoftValue, targets, modes) -> dict:
    """round(fn(x), target, mode) for every (target, mode) pair, computed
    from the rational enclosure directly (never through the widened
    format, so verification does not assume the double-rounding property
    it is checking)."""
    s = special_result(fn, x)
    out = {}
    if s is not None:
        for tf in targets:
            c = convert(s, tf, RO)  # specials convert mode-independently
            for m in modes:
                out[(tf, m)] = c.bits
        return out
    r = decode(x)
    exact = exact_value(fn, r)
    if exact is not None:
        for tf in targets:
            v = zero(tf, 0) if exact == 0 else None
            for m in modes:
                out[(tf, m)] = (v or round_rational(exact, tf, m)).bits
        return out
    w = 64
    while w <= PRECISION_CAP_BITS:
        enc = _ENCLOSURES[fn](r, w)
        done = {}
        for tf in targets:
            for m in modes:
                v = _round_agrees(enc, tf, m)
                if v is None:
                    done = None
                    break
                done[(tf, m)] = v.bits
            if done is None:
                break
        if done is not None:
            return done
        w *= 2
    raise UndecidedError(f"expected values for {fn} undecided at cap")
