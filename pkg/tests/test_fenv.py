import math

import pytest

from anyround import fenv
from anyround.fenv import AmbientMode


@pytest.fixture(autouse=True)
def restore_rounding():
    prev = fenv.get_mode()
    yield
    fenv.set_mode(prev)
    assert fenv.get_mode() is prev


def test_default_mode_is_rn():
    assert fenv.get_mode() is AmbientMode.RN


def test_set_rz_truncates_native_sum():
    one = math.ldexp(1.0, 0)
    tiny = math.ldexp(1.0, -60)
    prev = fenv.set_mode(AmbientMode.RZ)
    try:
        assert one + tiny == one
        assert -(one + tiny) == -one
    finally:
        fenv.set_mode(prev)


def test_set_ru_bumps_native_sum():
    one = math.ldexp(1.0, 0)
    tiny = math.ldexp(1.0, -60)
    eps = math.ldexp(1.0, -52)
    prev = fenv.set_mode(AmbientMode.RU)
    try:
        assert one + tiny == one + eps
    finally:
        fenv.set_mode(prev)


def test_set_rd_native_sums():
    one = math.ldexp(1.0, 0)
    tiny = math.ldexp(1.0, -60)
    eps = math.ldexp(1.0, -52)
    prev = fenv.set_mode(AmbientMode.RD)
    try:
        assert one + tiny == one
        assert (-one) + (-tiny) == -(one + eps)
    finally:
        fenv.set_mode(prev)


def test_set_get_roundtrip_is_noop():
    for mode in AmbientMode:
        fenv.set_mode(mode)
        assert fenv.get_mode() is mode
        fenv.set_mode(fenv.get_mode())
        assert fenv.get_mode() is mode
    fenv.set_mode(AmbientMode.RN)


def test_with_mode_restores_on_exit_and_unwind():
    assert fenv.get_mode() is AmbientMode.RN
    with fenv.with_mode(AmbientMode.RU):
        assert fenv.get_mode() is AmbientMode.RU
        assert fenv.probe_mode() is AmbientMode.RU
    assert fenv.get_mode() is AmbientMode.RN
    assert fenv.probe_mode() is AmbientMode.RN
    with pytest.raises(RuntimeError, match="boom"):
        with fenv.with_mode(AmbientMode.RD):
            raise RuntimeError("boom")
    assert fenv.get_mode() is AmbientMode.RN


def test_probe_mode_detects_all_modes():
    for mode in AmbientMode:
        with fenv.with_mode(mode):
            assert fenv.probe_mode() is mode


@pytest.mark.skipif(not fenv.has_fast_mode(), reason="x86-64 only")
def test_fast_set_mode_affects_arithmetic():
    one = math.ldexp(1.0, 0)
    tiny = math.ldexp(1.0, -60)
    eps = math.ldexp(1.0, -52)
    try:
        fenv.fast_set_mode(AmbientMode.RU)
        assert one + tiny == one + eps
        fenv.fast_set_mode(AmbientMode.RZ)
        assert one + tiny == one
    finally:
        fenv.fast_set_mode(AmbientMode.RN)
        fenv.set_mode(AmbientMode.RN)  # resync the full environment
    assert fenv.probe_mode() is AmbientMode.RN


@pytest.mark.skipif(not fenv.has_rdtsc(), reason="x86-64 only")
def test_rdtsc_monotone():
    a = fenv.rdtsc()
    b = fenv.rdtsc()
    assert b > a
