"""Rounding-invariant interval evaluation of FP expression programs.

A program's result under a fixed evaluation order still depends on the
rounding mode of every individual operation.  eval_bounds computes the
exact envelope [lo, hi] of all results reachable when each add/mul may use
any faithful rounding mode: the lower endpoint composes round-down ops,
the upper round-up ops, with the four-corner rule for products.  The
directed ops come from the EFT emulation layer, so the computation itself
is deterministic and independent of the thread's rounding mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .eft import SIGN_BIT, add_directed, float_to_bits, mul_directed
from .softfloat import RD, RU


class BoundsOverflowError(ArithmeticError):
    """An intermediate bound left the finite binary64 range."""


def _key(x: float) -> int:
    """Value order on binary64 with -0 below +0."""
    u = float_to_bits(x)
    if u & SIGN_BIT:
        return ~u & 0xFFFFFFFFFFFFFFFF
    return u | SIGN_BIT


@dataclass(frozen=True)
class BoundedValue:
    """The closed range of binary64 results reachable across rounding modes."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("NaN bound")
        if _key(self.lo) > _key(self.hi):
            raise ValueError("bounds out of order")

    @classmethod
    def point(cls, x: float) -> "BoundedValue":
        return cls(x, x)


def _check_finite(x: float) -> float:
    if math.isinf(x):
        raise BoundsOverflowError("bound overflowed to infinity")
    return x


def bv_add(a: BoundedValue, b: BoundedValue) -> BoundedValue:
    lo = _check_finite(add_directed(a.lo, b.lo, RD))
    hi = _check_finite(add_directed(a.hi, b.hi, RU))
    return BoundedValue(lo, hi)


def bv_mul(a: BoundedValue, b: BoundedValue) -> BoundedValue:
    los = (
        mul_directed(a.lo, b.lo, RD),
        mul_directed(a.lo, b.hi, RD),
        mul_directed(a.hi, b.lo, RD),
        mul_directed(a.hi, b.hi, RD),
    )
    his = (
        mul_directed(a.lo, b.lo, RU),
        mul_directed(a.lo, b.hi, RU),
        mul_directed(a.hi, b.lo, RU),
        mul_directed(a.hi, b.hi, RU),
    )
    lo = _check_finite(min(los, key=_key))
    hi = _check_finite(max(his, key=_key))
    return BoundedValue(lo, hi)


# -- expression programs ------------------------------------------------------
#
# Straight-line SSA over one variable slot: each step is ADD or MUL of two
# references.  References: ("const", i) into the constant pool, ("var",)
# for the program input (a polynomial's x' or an output compensation's
# y'), ("op", i) for an earlier step.  The last step is the result.

ADD = "add"
MUL = "mul"

Ref = tuple


@dataclass(frozen=True)
class ExprProgram:
    consts: tuple[float, ...]
    ops: tuple[tuple[str, Ref, Ref], ...]

    def __post_init__(self):
        if not self.ops and len(self.consts) != 1:
            raise ValueError("a program without operations must be a single constant")
        for i, (kind, left, right) in enumerate(self.ops):
            if kind not in (ADD, MUL):
                raise ValueError(f"op {i}: unknown kind {kind!r}")
            for ref in (left, right):
                if ref[0] == "const":
                    if not 0 <= ref[1] < len(self.consts):
                        raise ValueError(f"op {i}: constant ref out of range")
                elif ref[0] == "op":
                    if not 0 <= ref[1] < i:
                        raise ValueError(f"op {i}: forward or self reference")
                elif ref[0] != "var":
                    raise ValueError(f"op {i}: unknown ref kind {ref[0]!r}")

    @property
    def n_ops(self) -> int:
        return len(self.ops)


def horner_program(coefficients: list[float]) -> ExprProgram:
    """Horner evaluation of sum(c_i * x^i); coefficients listed from degree
    0 upward.  A degree-d polynomial compiles to 2d operations."""
    if not coefficients:
        raise ValueError("need at least one coefficient")
    consts = tuple(coefficients)
    d = len(coefficients) - 1
    ops: list[tuple[str, Ref, Ref]] = []
    if d == 0:
        return ExprProgram(consts=consts, ops=())
    acc: Ref = ("const", d)
    for i in range(d - 1, -1, -1):
        ops.append((MUL, acc, ("var",)))
        acc = ("op", len(ops) - 1)
        ops.append((ADD, acc, ("const", i)))
        acc = ("op", len(ops) - 1)
    return ExprProgram(consts=consts, ops=tuple(ops))


def scale_program(factor: float) -> ExprProgram:
    """Output compensation: multiply the variable by a constant factor."""
    return ExprProgram(consts=(factor,), ops=((MUL, ("var",), ("const", 0)),))


def offset_program(offset: float) -> ExprProgram:
    """Output compensation: add a constant offset to the variable."""
    return ExprProgram(consts=(offset,), ops=((ADD, ("var",), ("const", 0)),))


def eval_bounds(prog: ExprProgram, var_lo: float, var_hi: float) -> BoundedValue:
    """Fold bv_add/bv_mul over the program.  With var_lo == var_hi this is
    the reachable range of the program at a point input; with an interval
    it additionally ranges over every variable value inside."""
    if not prog.ops:
        return BoundedValue.point(prog.consts[0])
    var = BoundedValue(var_lo, var_hi)
    results: list[BoundedValue] = []

    def resolve(ref: Ref) -> BoundedValue:
        if ref[0] == "const":
            return BoundedValue.point(prog.consts[ref[1]])
        if ref[0] == "var":
            return var
        return results[ref[1]]

    for kind, left, right in prog.ops:
        a = resolve(left)
        b = resolve(right)
        results.append(bv_add(a, b) if kind == ADD else bv_mul(a, b))
    return results[-1]


def eval_single(prog: ExprProgram, var: float, add, mul) -> float:
    """Evaluate the program with caller-supplied scalar add/mul (used for
    the toward-zero and single-mode evaluations in the generators)."""
    if not prog.ops:
        return prog.consts[0]
    results: list[float] = []

    def resolve(ref: Ref) -> float:
        if ref[0] == "const":
            return prog.consts[ref[1]]
        if ref[0] == "var":
            return var
        return results[ref[1]]

    for kind, left, right in prog.ops:
        a = resolve(left)
        b = resolve(right)
        results.append(add(a, b) if kind == ADD else mul(a, b))
    return results[-1]
