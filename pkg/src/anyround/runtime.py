"""Generated-kernel artifacts and their evaluator.

A KernelArtifact fully describes one generated implementation: the
special-case table, constant-approximation regions, range reduction id,
polynomial coefficients (bit-exact), and output-compensation id, plus the
flavor:

  rio   every rounding-sensitive add/mul runs through the toward-zero
        emulation, so the kernel returns bit-identical results under all
        ambient modes;
  riib  the kernel uses plain native arithmetic; its constraints were
        generated against worst-case directed-rounding envelopes, so the
        result may vary with the ambient mode but always stays inside the
        input's rounding interval.

eval() never reads or writes the rounding mode.
"""

from __future__ import annotations

import hashlib
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

from .bounds import ExprProgram, offset_program, scale_program
from .eft import add_rz, bits_to_float, mul_rz
from .softfloat import FloatFormat, SoftValue, components, decode, order_key_bits

FLAVORS = ("rio", "riib")


class ArtifactError(ValueError):
    pass


class ArtifactDigestError(ArtifactError):
    """Stored digest does not match the payload."""


@dataclass(frozen=True)
class CandidatePoly:
    degree: int
    terms: tuple[int, ...]
    coeff_bits: tuple[int, ...]

    def __post_init__(self):
        if self.terms != tuple(range(self.degree + 1)):
            raise ArtifactError("only dense power bases are supported")
        if len(self.coeff_bits) != len(self.terms):
            raise ArtifactError("coefficient count does not match terms")

    def coefficients(self) -> list[float]:
        return [bits_to_float(b) for b in self.coeff_bits]


@dataclass(frozen=True)
class KernelArtifact:
    fn: str
    input_format: FloatFormat
    ro_bits: int
    flavor: str
    special: tuple[tuple[int, int], ...]  # (input bits, output bits64), sorted
    constant_regions: tuple[tuple[int, int, int], ...]  # (lo bits, hi bits, out bits64)
    range_reduction: str
    output_compensation: str
    poly: CandidatePoly

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ArtifactError(f"unknown flavor {self.flavor!r}")
        if self.ro_bits != self.input_format.total_bits + 2:
            raise ArtifactError("ro_bits must be the input width plus two")


# -- range reduction and output compensation -----------------------------------
#
# exp2: x = N + r with integer N and r in [0, 1); the compensation scales
#       by 2^N, which is exact in binary64 for the formats handled here.
# log2: x = 2^k * m with m in [1, 2); the reduced input is m - 1 (exact by
#       Sterbenz) and the compensation adds k, an inexact addition in
#       general -- the rounding-sensitive step the flavors exist for.


def range_reduce(fn: str, x: float) -> tuple[float, dict]:
    if fn == "exp2":
        n = math.floor(x)
        return x - n, {"n": n}
    if fn == "log2":
        m, e = math.frexp(x)
        return 2.0 * m - 1.0, {"k": e - 1}
    raise ArtifactError(f"unknown function {fn!r}")


def oc_program(fn: str, params: dict) -> ExprProgram:
    if fn == "exp2":
        return scale_program(math.ldexp(1.0, params["n"]))
    if fn == "log2":
        return offset_program(float(params["k"]))
    raise ArtifactError(f"unknown function {fn!r}")


def oc_invert(fn: str, params: dict):
    """Exact mathematical inverse of the compensation, for search seeding."""
    if fn == "exp2":
        scale = Fraction(2) ** params["n"]
        return lambda target: target / scale
    if fn == "log2":
        k = params["k"]
        return lambda target: target - k
    raise ArtifactError(f"unknown function {fn!r}")


OC_IDS = {"exp2": "pow2_scale", "log2": "add_exponent"}
RR_IDS = {"exp2": "exp2_split", "log2": "log2_split"}


def assert_exact_reduction(fn: str, fmt: FloatFormat) -> None:
    """Exhaustively confirm that range reduction is exact in binary64 for
    every finite input of the format (so the reduced input is the same
    under every rounding mode)."""
    for bits in range(1 << fmt.total_bits):
        v = SoftValue(fmt, bits)
        if not v.is_finite() or v.is_zero():
            continue
        r = decode(v)
        if fn == "log2" and r <= 0:
            continue
        x = decode_input_float(bits, fmt)
        x_prime, params = range_reduce(fn, x)
        if fn == "exp2":
            n = params["n"]
            if Fraction(x_prime) != r - n:
                raise ArtifactError(f"inexact reduction at input {bits:#x}")
        else:
            k = params["k"]
            m = r / Fraction(2) ** k
            if not 1 <= m < 2:
                raise ArtifactError(f"bad normalization at input {bits:#x}")
            if Fraction(x_prime) != m - 1:
                raise ArtifactError(f"inexact reduction at input {bits:#x}")


def decode_input_float(bits: int, fmt: FloatFormat) -> float:
    """Exact binary64 value of a finite small-format pattern."""
    v = SoftValue(fmt, bits)
    s, sig, exp = components(v)
    if sig == 0:
        return -0.0 if s else 0.0
    x = math.ldexp(float(sig), exp)
    return -x if s else x


# -- evaluation -----------------------------------------------------------------


def make_evaluator(art: KernelArtifact):
    """Compile the artifact into a closure mapping input bits to the
    binary64 result.  The closure performs no FP-environment access."""
    fmt = art.input_format
    special = {b: bits_to_float(o) for b, o in art.special}
    region_keys = []
    region_ends = []
    region_vals = []
    for lo_b, hi_b, out_b in art.constant_regions:
        region_keys.append(order_key_bits(lo_b, fmt))
        region_ends.append(order_key_bits(hi_b, fmt))
        region_vals.append(bits_to_float(out_b))
    coeffs = art.poly.coefficients()
    rev = list(reversed(coeffs))
    fn = art.fn
    rio = art.flavor == "rio"
    floor = math.floor
    frexp = math.frexp
    ldexp = math.ldexp

    def evaluate(x_bits: int) -> float:
        out = special.get(x_bits)
        if out is not None:
            return out
        key = order_key_bits(x_bits, fmt)
        if region_keys:
            i = bisect_right(region_keys, key) - 1
            if i >= 0 and key <= region_ends[i]:
                return region_vals[i]
        x = decode_input_float(x_bits, fmt)
        if fn == "exp2":
            n = floor(x)
            r = x - n
            scale = ldexp(1.0, n)
            if rio:
                acc = rev[0]
                for c in rev[1:]:
                    acc = add_rz(mul_rz(acc, r), c)
                return mul_rz(acc, scale)
            acc = rev[0]
            for c in rev[1:]:
                acc = acc * r + c
            return acc * scale
        else:  # log2
            m, e = frexp(x)
            t = 2.0 * m - 1.0
            kf = float(e - 1)
            if rio:
                acc = rev[0]
                for c in rev[1:]:
                    acc = add_rz(mul_rz(acc, t), c)
                return add_rz(acc, kf)
            acc = rev[0]
            for c in rev[1:]:
                acc = acc * t + c
            return acc + kf

    return evaluate


def eval_kernel(art: KernelArtifact, x_bits: int) -> float:
    return make_evaluator(art)(x_bits)


# -- serialization --------------------------------------------------------------


def _payload(art: KernelArtifact) -> dict:
    fmt = art.input_format
    w = fmt.hex_width
    return {
        "fn": art.fn,
        "format": fmt.spec_string(),
        "ro_bits": art.ro_bits,
        "flavor": art.flavor,
        "range_reduction": art.range_reduction,
        "output_compensation": art.output_compensation,
        "special": [[f"{b:0{w}x}", f"{o:016x}"] for b, o in art.special],
        "constant_regions": [
            [f"{lo:0{w}x}", f"{hi:0{w}x}", f"{o:016x}"] for lo, hi, o in art.constant_regions
        ],
        "poly": {
            "degree": art.poly.degree,
            "terms": list(art.poly.terms),
            "coefficients": [f"{c:016x}" for c in art.poly.coeff_bits],
            "scheme": "horner",
        },
    }


def _digest(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def to_json(art: KernelArtifact) -> str:
    payload = _payload(art)
    payload["digest"] = _digest(_payload(art))
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def from_json(text: str, check_digest: bool = True) -> KernelArtifact:
    data = json.loads(text)
    stored = data.pop("digest", None)
    if check_digest:
        if stored is None:
            raise ArtifactDigestError("artifact carries no digest")
        if stored != _digest(data):
            raise ArtifactDigestError("artifact digest mismatch; refusing to load")
    fmt = FloatFormat.parse(data["format"])
    poly = data["poly"]
    if poly.get("scheme", "horner") != "horner":
        raise ArtifactError("unknown evaluation scheme")
    return KernelArtifact(
        fn=data["fn"],
        input_format=fmt,
        ro_bits=int(data["ro_bits"]),
        flavor=data["flavor"],
        special=tuple((int(a, 16), int(b, 16)) for a, b in data["special"]),
        constant_regions=tuple(
            (int(a, 16), int(b, 16), int(c, 16)) for a, b, c in data["constant_regions"]
        ),
        range_reduction=data["range_reduction"],
        output_compensation=data["output_compensation"],
        poly=CandidatePoly(
            degree=int(poly["degree"]),
            terms=tuple(int(t) for t in poly["terms"]),
            coeff_bits=tuple(int(c, 16) for c in poly["coefficients"]),
        ),
    )
