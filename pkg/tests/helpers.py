"""Shared test machinery: softfloat-based reference evaluation of
expression programs under arbitrary per-operation rounding assignments."""

import itertools
from fractions import Fraction

from anyround.bounds import ADD, ExprProgram
from anyround.eft import bits_to_float, float_to_bits
from anyround.softfloat import BINARY64, RO, STANDARD_MODES, SoftValue, fp_add, fp_mul


def _sv(x: float) -> SoftValue:
    return SoftValue(BINARY64, float_to_bits(x))


def soft_op(kind: str, a: float, b: float, mode: str) -> float:
    f = fp_add if kind == ADD else fp_mul
    return bits_to_float(f(_sv(a), _sv(b), mode).bits)


def enumerate_assignments(prog: ExprProgram, x: float, modes=STANDARD_MODES):
    """Final values over every per-op rounding assignment, by literal
    product enumeration.  Exponential in op count; keep programs short."""
    out = set()
    for assignment in itertools.product(modes, repeat=prog.n_ops):
        results = []
        for (kind, left, right), mode in zip(prog.ops, assignment):
            def val(ref):
                if ref[0] == "const":
                    return prog.consts[ref[1]]
                if ref[0] == "var":
                    return x
                return results[ref[1]]
            results.append(soft_op(kind, val(left), val(right), mode))
        out.add(float_to_bits(results[-1]))
    return out


def reachable_values(prog: ExprProgram, x: float, modes=STANDARD_MODES):
    """Exact set of final values over all per-op assignments, computed by
    forward reachable-set propagation.  Valid because programs here are
    trees: every op result feeds exactly one later op, so subresults vary
    independently."""
    uses = {}
    for kind, left, right in prog.ops:
        for ref in (left, right):
            if ref[0] == "op":
                uses[ref[1]] = uses.get(ref[1], 0) + 1
    assert all(n == 1 for n in uses.values()), "reachable-set method needs a tree"

    results: list[set[int]] = []
    xbits = float_to_bits(x)

    def vals(ref):
        if ref[0] == "const":
            return {float_to_bits(prog.consts[ref[1]])}
        if ref[0] == "var":
            return {xbits}
        return results[ref[1]]

    for kind, left, right in prog.ops:
        acc = set()
        f = fp_add if kind == ADD else fp_mul
        for ua in vals(left):
            va = SoftValue(BINARY64, ua)
            for ub in vals(right):
                vb = SoftValue(BINARY64, ub)
                for mode in modes:
                    acc.add(f(va, vb, mode).bits)
        results.append(acc)
    return results[-1]


def eval_round_to_odd(prog: ExprProgram, x: float) -> float:
    """Evaluate with every operation rounded to odd (a faithful mode
    outside the four standard ones)."""
    if not prog.ops:
        return prog.consts[0]
    results = []
    for kind, left, right in prog.ops:
        def val(ref):
            if ref[0] == "const":
                return prog.consts[ref[1]]
            if ref[0] == "var":
                return x
            return results[ref[1]]
        results.append(soft_op(kind, val(left), val(right), RO))
    return results[-1]


def value_key(bits: int) -> int:
    if bits >> 63:
        return ~bits & 0xFFFFFFFFFFFFFFFF
    return bits | (1 << 63)


def frac(x: float) -> Fraction:
    return Fraction(x)


# -- flat bulk reference rounding ------------------------------------------------
#
# The acceptance corpora need millions of expected values.  These flat
# functions compute the toward-zero / down / up roundings of an exact sum
# or product straight from bit patterns; test_helpers_cross_validation
# pins them bit-for-bit against the softfloat module.

_M52 = (1 << 52) - 1
_IMPLICIT = 1 << 52
_SIGN = 1 << 63
_POS_INF = 0x7FF0000000000000
_NEG_INF = 0xFFF0000000000000
_MAX_FIN = 0x7FEFFFFFFFFFFFFF


def _decode64(u: int):
    s = u >> 63
    e = (u >> 52) & 0x7FF
    m = u & _M52
    if e:
        return s, m | _IMPLICIT, e - 1075
    return s, m, -1074


def _encode_three(neg: int, m: int, x0: int):
    """(rz, rd, ru) of the nonzero exact value ±m * 2^x0."""
    length = m.bit_length()
    e = length - 1 + x0
    lsb = max(e, -1022) - 52  # exponent of the target LSB
    drop = lsb - x0
    if drop <= 0:
        sig = m << -drop
        inexact = False
    else:
        sig = m >> drop
        inexact = bool(m & ((1 << drop) - 1))
    outs = []
    for bump in (
        0,  # rz
        1 if (neg and inexact) else 0,  # rd
        1 if (not neg and inexact) else 0,  # ru
    ):
        s2 = sig + bump
        t2 = lsb
        if s2 >> 53:
            s2 >>= 1
            t2 += 1
        ee = t2 + 52
        if ee > 1023:
            outs.append((_NEG_INF if neg else _POS_INF) if bump else ((_SIGN | _MAX_FIN) if neg else _MAX_FIN))
            continue
        sbit = _SIGN if neg else 0
        if s2 < _IMPLICIT:
            outs.append(sbit | s2)
        else:
            outs.append(sbit | ((ee + 1023) << 52) | (s2 & _M52))
    return tuple(outs)


def add_triples(a: int, b: int):
    """(rz, rd, ru) bit patterns of the exact binary64 sum; finite,
    non-overflowing operands only."""
    sa, ma, xa = _decode64(a)
    sb, mb, xb = _decode64(b)
    if ma == 0 and mb == 0:
        if sa == sb:
            z = _SIGN if sa else 0
            return z, z, z
        return 0, _SIGN, 0
    x0 = xa if xa < xb else xb
    total = ((-ma if sa else ma) << (xa - x0)) + ((-mb if sb else mb) << (xb - x0))
    if total == 0:
        return 0, _SIGN, 0
    if total < 0:
        return _encode_three(1, -total, x0)
    return _encode_three(0, total, x0)


def mul_triples(a: int, b: int):
    """(rz, rd, ru) bit patterns of the exact binary64 product."""
    sa, ma, xa = _decode64(a)
    sb, mb, xb = _decode64(b)
    s = sa ^ sb
    if ma == 0 or mb == 0:
        z = _SIGN if s else 0
        return z, z, z
    return _encode_three(s, ma * mb, xa + xb)
