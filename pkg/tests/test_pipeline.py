import json

import pytest

from anyround import runtime
from anyround.oracle import OracleRecord, RoundingInterval
from anyround.pipeline import (
    build_artifact,
    bench_artifact,
    detect_constant_regions,
    negative_control_artifact,
    prepare_pipeline,
    target_formats,
    verify_artifact,
)
from anyround.softfloat import BINARY64, FloatFormat, from_order_key, order_key_bits

E5M5 = FloatFormat(5, 5)


@pytest.fixture(scope="module")
def e5m5_artifacts():
    out = {}
    for fn in ("exp2", "log2"):
        prepared = prepare_pipeline(fn, E5M5)
        for flavor in ("rio", "riib"):
            art, stats = build_artifact(fn, E5M5, flavor, prepared=prepared)
            out[(fn, flavor)] = (art, stats)
    return out


def rec(input_bits, lo_key, hi_key):
    return OracleRecord(
        input_bits,
        None,
        RoundingInterval(
            from_order_key(lo_key, BINARY64).bits, from_order_key(hi_key, BINARY64).bits
        ),
    )


def test_detect_constant_regions_synthetic():
    base = 0x43E0000000000000
    records = [rec(i, base + 10, base + 40) for i in range(10)]
    records += [rec(10, base + 100, base + 120)]
    records += [rec(11 + i, base + 200 + i * 50, base + 210 + i * 50) for i in range(5)]
    regions, covered = detect_constant_regions(records, min_run=8)
    assert len(regions) == 1
    lo_in, hi_in, out_bits = regions[0]
    assert (lo_in, hi_in) == (0, 9)
    assert covered == set(range(10))
    # The representative output lies in the run's common intersection.
    k = order_key_bits(out_bits, BINARY64)
    assert base + 10 <= k <= base + 40


def test_every_input_is_covered(e5m5_artifacts):
    # Specials, constant-region inputs, and polynomial inputs partition the
    # whole input space.
    for (fn, flavor), (art, stats) in e5m5_artifacts.items():
        assert stats.inputs == 1 << E5M5.total_bits
        assert stats.specials + stats.constant_inputs + stats.poly_inputs == stats.inputs


def test_verify_clean_artifacts(e5m5_artifacts):
    for (fn, flavor), (art, _) in e5m5_artifacts.items():
        report = verify_artifact(art)
        assert report.total_mismatches == 0, (fn, flavor)
        assert report.mode_preserved
        data = report.to_dict()
        assert data["mismatches"]["rn"]["10"]["rz"] == 0


def test_verify_detects_corruption(e5m5_artifacts):
    art, _ = e5m5_artifacts[("exp2", "riib")]
    doc = json.loads(runtime.to_json(art))
    coeffs = doc["poly"]["coefficients"]
    coeffs[-1] = f"{int(coeffs[-1], 16) ^ (1 << 44):016x}"
    doc["digest"] = None
    doc.pop("digest")
    corrupted = runtime.from_json(json.dumps(doc), check_digest=False)
    report = verify_artifact(corrupted, ambient_modes=["rn"])
    assert report.total_mismatches > 0
    assert report.examples


def test_verify_target_width_filter(e5m5_artifacts):
    art, _ = e5m5_artifacts[("log2", "riib")]
    report = verify_artifact(art, ambient_modes=["rz"], target_widths=[8, 10])
    assert report.target_widths == [8, 10]
    assert report.total_mismatches == 0


def test_negative_control_fails_off_rn():
    # The nearest-even-only pipeline stays correct under rn but produces
    # wrong results under some directed mode.
    art, _ = negative_control_artifact("log2", E5M5)
    rn_report = verify_artifact(art, ambient_modes=["rn"])
    assert rn_report.total_mismatches == 0
    off = verify_artifact(art, ambient_modes=["rz", "rd", "ru"])
    assert off.total_mismatches > 0


def test_bench_reports_speedup(e5m5_artifacts):
    art, _ = e5m5_artifacts[("exp2", "riib")]
    report = bench_artifact(art, baseline="fesetround", calls=60000)
    assert report.speedup > 1.0
    assert report.kernel_ns > 0
    d = report.to_dict()
    assert d["baseline"] == "fesetround"
    none = bench_artifact(art, baseline="none", calls=30000)
    assert 0.5 < none.speedup < 2.0  # same path, timing noise only


def test_target_formats():
    fmts = target_formats(E5M5)
    assert [f.total_bits for f in fmts] == [7, 8, 9, 10]
    fmts = target_formats(E5M5, widths=[8, 10])
    assert [f.total_bits for f in fmts] == [8, 10]
