"""Control of the host thread's floating-point rounding mode.

Used only by tests and the benchmark harness: the generated kernels never
touch the environment.  The rounding mode is thread-local state; a thread
must own its FP environment for the duration of any set_mode/with_mode
use, and nested mode changes are not supported by convention (tests
iterate modes at their outermost loop only).

Probe computations below are built from runtime values (math.ldexp), never
from constant expressions, because CPython folds constant arithmetic at
compile time under whatever mode the compiler thread happened to have.
"""

from __future__ import annotations

import ctypes
import enum
import math
import platform
from contextlib import contextmanager


class AmbientMode(enum.Enum):
    RN = "rn"
    RZ = "rz"
    RD = "rd"
    RU = "ru"

    @classmethod
    def coerce(cls, value) -> "AmbientMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class FloatEnvError(RuntimeError):
    """The platform refused a rounding-mode change, or is unsupported."""


_MACHINE = platform.machine()

# fesetround argument values per architecture (glibc).
_FE_CONSTANTS = {
    "x86_64": {AmbientMode.RN: 0x0, AmbientMode.RD: 0x400, AmbientMode.RU: 0x800, AmbientMode.RZ: 0xC00},
    "aarch64": {AmbientMode.RN: 0x0, AmbientMode.RU: 0x400000, AmbientMode.RD: 0x800000, AmbientMode.RZ: 0xC00000},
}

try:
    _libm = ctypes.CDLL("libm.so.6")
except OSError:  # pragma: no cover
    _libm = None
else:
    _libm.fesetround.argtypes = [ctypes.c_int]
    _libm.fesetround.restype = ctypes.c_int
    _libm.fegetround.argtypes = []
    _libm.fegetround.restype = ctypes.c_int


def _constants() -> dict:
    if _libm is None:
        raise FloatEnvError("libm is not available; cannot control the FP environment")
    table = _FE_CONSTANTS.get(_MACHINE)
    if table is None:
        raise FloatEnvError(f"no fesetround constants known for machine {_MACHINE!r}")
    return table


def get_mode() -> AmbientMode:
    table = _constants()
    raw = _libm.fegetround()
    for mode, value in table.items():
        if value == raw:
            return mode
    raise FloatEnvError(f"fegetround returned unknown value {raw:#x}")


def set_mode(mode) -> AmbientMode:
    """Set the thread's rounding mode; returns the previous mode."""
    mode = AmbientMode.coerce(mode)
    table = _constants()
    prev = get_mode()
    rc = _libm.fesetround(table[mode])
    if rc != 0:
        raise FloatEnvError(f"fesetround({table[mode]:#x}) failed with status {rc}")
    return prev


@contextmanager
def with_mode(mode):
    """Scope guard: save, set, run, restore (also on unwind)."""
    prev = set_mode(mode)
    try:
        yield
    finally:
        set_mode(prev)


def probe_mode() -> AmbientMode:
    """Infer the active rounding mode from arithmetic alone."""
    one = math.ldexp(1.0, 0)
    tiny = math.ldexp(1.0, -60)
    eps = math.ldexp(1.0, -52)
    up = (one + tiny) == one + eps
    down = (-one - tiny) == -(one + eps)
    if up and not down:
        return AmbientMode.RU
    if down and not up:
        return AmbientMode.RD
    # Separate RN from RZ with a value just above the halfway point.
    half_plus = math.ldexp(1.0, -53) + math.ldexp(1.0, -60)
    if (one + half_plus) == one + eps:
        return AmbientMode.RN
    return AmbientMode.RZ


# -- x86-64 fast paths --------------------------------------------------------
#
# Direct MXCSR writes skip fesetround's validation and its x87 update, at
# the cost of desynchronizing fegetround.  Machine code is placed in an
# anonymous executable mapping:
#   stmxcsr [rdi]; ret     ldmxcsr [rdi]; ret     rdtsc; shl rdx,32; or rax,rdx; ret

_X86_CODE = bytes(
    [0x0F, 0xAE, 0x1F, 0xC3]
    + [0x0F, 0xAE, 0x17, 0xC3]
    + [0x0F, 0x31, 0x48, 0xC1, 0xE2, 0x20, 0x48, 0x09, 0xD0, 0xC3]
)

_x86 = None


class _X86Helpers:
    def __init__(self):
        import mmap

        if _MACHINE != "x86_64":
            raise FloatEnvError(f"x86-64 only; running on {_MACHINE!r}")
        self._buf = mmap.mmap(-1, len(_X86_CODE), prot=mmap.PROT_READ | mmap.PROT_WRITE | mmap.PROT_EXEC)
        self._buf.write(_X86_CODE)
        base = ctypes.addressof(ctypes.c_char.from_buffer(self._buf))
        ptr = ctypes.POINTER(ctypes.c_uint32)
        self._stmxcsr = ctypes.CFUNCTYPE(None, ptr)(base)
        self._ldmxcsr = ctypes.CFUNCTYPE(None, ptr)(base + 4)
        self.rdtsc = ctypes.CFUNCTYPE(ctypes.c_uint64)(base + 8)
        self._cell = ctypes.c_uint32(0)
        self._cellref = ctypes.byref(self._cell)

    def get_mxcsr(self) -> int:
        self._stmxcsr(self._cellref)
        return self._cell.value

    def set_mxcsr(self, value: int) -> None:
        self._cell.value = value
        self._ldmxcsr(self._cellref)


def _x86_helpers() -> _X86Helpers:
    global _x86
    if _x86 is None:
        _x86 = _X86Helpers()
    return _x86


# MXCSR rounding-control field is bits 13..14; the values match the
# fesetround constants shifted right by 7.
_MXCSR_RC_SHIFT = 13
_MXCSR_RC_MASK = 0x6000
_MXCSR_RC = {AmbientMode.RN: 0b00, AmbientMode.RD: 0b01, AmbientMode.RU: 0b10, AmbientMode.RZ: 0b11}


def fast_set_mode(mode) -> None:
    """Bench-only: set the SSE rounding field directly via ldmxcsr.

    Leaves the x87 control word alone, so fegetround may disagree until the
    next full set_mode.  Raises FloatEnvError off x86-64.
    """
    mode = AmbientMode.coerce(mode)
    h = _x86_helpers()
    csr = h.get_mxcsr()
    h.set_mxcsr((csr & ~_MXCSR_RC_MASK) | (_MXCSR_RC[mode] << _MXCSR_RC_SHIFT))


def has_fast_mode() -> bool:
    return _MACHINE == "x86_64"


def rdtsc() -> int:
    """Raw cycle counter; x86-64 only."""
    return int(_x86_helpers().rdtsc())


def has_rdtsc() -> bool:
    return _MACHINE == "x86_64"
