"""End-to-end pipeline: oracle -> reduced intervals -> LP -> kernel, plus
the exhaustive verifier and the benchmark harness."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

from . import fenv, intervalgen, oracle, polygen, runtime
from .eft import float_to_bits
from .fenv import AmbientMode
from .intervalgen import InfeasibleInputError, ReducedConstraint
from .oracle import OracleRecord, ro_format
from .runtime import KernelArtifact, decode_input_float, make_evaluator
from .softfloat import (
    BINARY64,
    STANDARD_MODES,
    FloatFormat,
    SoftValue,
    convert,
    from_order_key,
    order_key_bits,
)

MIN_CONSTANT_RUN = 8


@dataclass
class BuildStats:
    inputs: int = 0
    specials: int = 0
    constant_regions: int = 0
    constant_inputs: int = 0
    poly_inputs: int = 0
    constraint_groups: int = 0
    degree: int = 0
    elapsed_s: float = 0.0


def detect_constant_regions(records: list[OracleRecord], min_run: int = MIN_CONSTANT_RUN):
    """Greedy scan for maximal runs of consecutive inputs whose rounding
    intervals share a common value; runs of at least min_run become
    constant regions."""
    regions = []
    covered: set[int] = set()
    i = 0
    n = len(records)
    while i < n:
        lo_k = order_key_bits(records[i].interval.l_bits, BINARY64)
        hi_k = order_key_bits(records[i].interval.h_bits, BINARY64)
        j = i + 1
        while j < n:
            l2 = order_key_bits(records[j].interval.l_bits, BINARY64)
            h2 = order_key_bits(records[j].interval.h_bits, BINARY64)
            if max(lo_k, l2) > min(hi_k, h2):
                break
            lo_k = max(lo_k, l2)
            hi_k = min(hi_k, h2)
            j += 1
        if j - i >= min_run:
            out_bits = from_order_key((lo_k + hi_k) // 2, BINARY64).bits
            regions.append((records[i].input_bits, records[j - 1].input_bits, out_bits))
            covered.update(rec.input_bits for rec in records[i:j])
        i = j if j > i else i + 1
    return regions, covered


def _exp2_scale_ok(n: int) -> bool:
    # The compensation multiplies by 2^n; products stay exact only while
    # the result cannot go subnormal and the scale is representable.
    return -1021 <= n <= 1023


def build_constraints(fn: str, fmt: FloatFormat, records, single_mode: bool = False):
    """Per-input reduced constraints for the polynomial path.

    Returns (constraints, extra_special): inputs whose interval generation
    is infeasible (or whose compensation cannot be exact) fall back to the
    special table with any value from their own rounding interval.
    """
    constraints: list[ReducedConstraint] = []
    extra_special: dict[int, int] = {}
    reduce = (
        intervalgen.reduce_interval_single_mode if single_mode else intervalgen.reduce_interval
    )
    for rec in records:
        x = decode_input_float(rec.input_bits, fmt)
        x_prime, params = runtime.range_reduce(fn, x)
        if fn == "exp2" and not _exp2_scale_ok(params["n"]):
            extra_special[rec.input_bits] = rec.interval.l_bits
            continue
        oc = runtime.oc_program(fn, params)
        invert = runtime.oc_invert(fn, params)
        target = (rec.interval.l_bits, rec.interval.h_bits)
        try:
            constraints.append(reduce(rec.input_bits, x_prime, target, oc, invert))
        except InfeasibleInputError:
            extra_special[rec.input_bits] = rec.interval.l_bits
    return constraints, extra_special


@dataclass
class PreparedPipeline:
    """Oracle and reduced-interval stages, shared by every flavor."""

    fn: str
    fmt: FloatFormat
    specials: dict
    regions: tuple
    groups: list
    constant_inputs: int


def prepare_pipeline(fn: str, fmt: FloatFormat, single_mode: bool = False) -> PreparedPipeline:
    specials, records = oracle.oracle_records(fn, fmt)

    # Exact results (even oracle patterns) are table entries.
    exact = {}
    rest = []
    for rec in records:
        if rec.ro_value.bits & 1 == 0:
            exact[rec.input_bits] = rec.interval.l_bits
        else:
            rest.append(rec)
    specials = dict(specials)
    specials.update(exact)

    regions, covered = detect_constant_regions(rest)
    poly_records = [rec for rec in rest if rec.input_bits not in covered]

    constraints, extra_special = build_constraints(fn, fmt, poly_records, single_mode=single_mode)
    specials.update(extra_special)

    groups, infeasible = intervalgen.group_constraints(constraints)
    for bits in infeasible:
        rec = next(r for r in poly_records if r.input_bits == bits)
        specials[bits] = rec.interval.l_bits
    groups = [g for g in groups if not any(b in specials for b in g.input_bits)]
    return PreparedPipeline(
        fn=fn,
        fmt=fmt,
        specials=specials,
        regions=tuple(regions),
        groups=groups,
        constant_inputs=len(covered),
    )


def build_artifact(
    fn: str,
    fmt: FloatFormat,
    flavor: str,
    policy: polygen.DegreePolicy | None = None,
    single_mode_constraints: bool = False,
    lp_flavor: str | None = None,
    prepared: PreparedPipeline | None = None,
) -> tuple[KernelArtifact, BuildStats]:
    """Run the full generation pipeline.

    single_mode_constraints + lp_flavor="rn-single" reproduce the
    historical nearest-even-only generator (used as a negative control);
    the resulting artifact still evaluates as a plain kernel.
    """
    t0 = time.perf_counter()
    stats = BuildStats()
    if prepared is None:
        prepared = prepare_pipeline(fn, fmt, single_mode=single_mode_constraints)
    stats.inputs = 1 << fmt.total_bits
    stats.constant_regions = len(prepared.regions)
    stats.constant_inputs = prepared.constant_inputs
    stats.poly_inputs = sum(len(g.input_bits) for g in prepared.groups)
    stats.constraint_groups = len(prepared.groups)

    if policy is None:
        policy = polygen.DegreePolicy.for_precision(fmt.precision)
    poly = polygen.generate(prepared.groups, lp_flavor or flavor, policy)
    stats.degree = poly.degree
    stats.specials = len(prepared.specials)

    art = KernelArtifact(
        fn=fn,
        input_format=fmt,
        ro_bits=ro_format(fmt).total_bits,
        flavor=flavor,
        special=tuple(sorted(prepared.specials.items())),
        constant_regions=tuple(prepared.regions),
        range_reduction=runtime.RR_IDS[fn],
        output_compensation=runtime.OC_IDS[fn],
        poly=poly,
    )
    stats.elapsed_s = time.perf_counter() - t0
    return art, stats


def negative_control_artifact(fn: str, fmt: FloatFormat):
    """Plain kernel generated the single-mode way: constraints and the LP
    candidate both assume nearest-even everywhere."""
    return build_artifact(
        fn, fmt, flavor="riib", single_mode_constraints=True, lp_flavor="rn-single"
    )


# -- verification ----------------------------------------------------------------


def target_formats(fmt: FloatFormat, widths=None) -> list[FloatFormat]:
    """Target formats: same exponent field, every precision from 2 up to
    the input's.  `widths` optionally restricts total widths."""
    out = []
    for p in range(2, fmt.precision + 1):
        tf = FloatFormat(fmt.exponent_bits, p)
        if widths is None or tf.total_bits in widths:
            out.append(tf)
    return out


@dataclass
class VerifyReport:
    fn: str
    format: str
    flavor: str
    inputs: int
    target_widths: list[int]
    ambient_modes: list[str]
    final_modes: list[str]
    counts: dict = field(default_factory=dict)  # ambient -> width -> final -> n
    examples: list = field(default_factory=list)
    total_mismatches: int = 0
    mode_preserved: bool = True
    elapsed_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "fn": self.fn,
            "format": self.format,
            "flavor": self.flavor,
            "inputs": self.inputs,
            "target_widths": self.target_widths,
            "ambient_modes": self.ambient_modes,
            "final_modes": self.final_modes,
            "mismatches": self.counts,
            "total_mismatches": self.total_mismatches,
            "mode_preserved": self.mode_preserved,
            "examples": self.examples,
            "elapsed_s": round(self.elapsed_s, 3),
        }

    def summary_lines(self) -> list[str]:
        lines = [
            f"verify {self.fn} {self.format} flavor={self.flavor}: "
            f"{self.inputs} inputs x {len(self.ambient_modes)} ambient modes x "
            f"{len(self.target_widths)} target widths x {len(self.final_modes)} final modes"
        ]
        for amb in self.ambient_modes:
            n = sum(sum(per.values()) for per in self.counts[amb].values())
            mark = "ok" if n == 0 else f"{n} wrong"
            lines.append(f"  ambient {amb}: {mark}")
        lines.append(
            f"  mode preserved: {'yes' if self.mode_preserved else 'NO'}; "
            f"total mismatches: {self.total_mismatches}; {self.elapsed_s:.1f}s"
        )
        return lines


def expected_table(fn: str, fmt: FloatFormat, targets, modes):
    table = {}
    for bits in range(1 << fmt.total_bits):
        table[bits] = oracle.expected_results(fn, SoftValue(fmt, bits), targets, modes)
    return table


def verify_artifact(
    art: KernelArtifact,
    ambient_modes=None,
    target_widths=None,
    max_examples: int = 16,
    expected=None,
) -> VerifyReport:
    fmt = art.input_format
    targets = target_formats(fmt, target_widths)
    final_modes = list(STANDARD_MODES)
    ambients = [AmbientMode.coerce(m) for m in (ambient_modes or list(AmbientMode))]
    if expected is None:
        expected = expected_table(art.fn, fmt, targets, final_modes)
    evaluator = make_evaluator(art)
    report = VerifyReport(
        fn=art.fn,
        format=fmt.spec_string(),
        flavor=art.flavor,
        inputs=1 << fmt.total_bits,
        target_widths=[tf.total_bits for tf in targets],
        ambient_modes=[m.value for m in ambients],
        final_modes=final_modes,
    )
    t0 = time.perf_counter()
    for amb in ambients:
        per_amb = {tf.total_bits: {m: 0 for m in final_modes} for tf in targets}
        with fenv.with_mode(amb):
            before = fenv.probe_mode()
            for bits in range(1 << fmt.total_bits):
                w = evaluator(bits)
                wv = SoftValue(BINARY64, float_to_bits(w))
                exp_row = expected[bits]
                for tf in targets:
                    for m in final_modes:
                        got = convert(wv, tf, m).bits
                        want = exp_row[(tf, m)]
                        if got != want:
                            per_amb[tf.total_bits][m] += 1
                            report.total_mismatches += 1
                            if len(report.examples) < max_examples:
                                report.examples.append(
                                    {
                                        "ambient": amb.value,
                                        "input": f"{bits:0{fmt.hex_width}x}",
                                        "width": tf.total_bits,
                                        "final_mode": m,
                                        "got": f"{got:0{tf.hex_width}x}",
                                        "want": f"{want:0{tf.hex_width}x}",
                                    }
                                )
            after = fenv.probe_mode()
            if before is not amb or after is not amb:
                report.mode_preserved = False
        report.counts[amb.value] = {str(w): per_amb[w] for w in sorted(per_amb)}
    report.elapsed_s = time.perf_counter() - t0
    return report


# -- benchmark -------------------------------------------------------------------


@dataclass
class BenchReport:
    fn: str
    format: str
    flavor: str
    baseline: str
    calls: int
    kernel_ns: float
    baseline_ns: float
    speedup: float
    mode_switch_ns: float
    rdtsc_available: bool
    kernel_cycles: float | None
    seed: int

    def to_dict(self) -> dict:
        return {
            "fn": self.fn,
            "format": self.format,
            "flavor": self.flavor,
            "baseline": self.baseline,
            "calls": self.calls,
            "kernel_ns_median": round(self.kernel_ns, 1),
            "baseline_ns_median": round(self.baseline_ns, 1),
            "speedup": round(self.speedup, 3),
            "mode_switch_ns": round(self.mode_switch_ns, 1),
            "rdtsc_available": self.rdtsc_available,
            "kernel_cycles_median": None if self.kernel_cycles is None else round(self.kernel_cycles, 1),
            "seed": self.seed,
        }


def _finite_inputs(fmt: FloatFormat) -> list[int]:
    out = []
    for bits in range(1 << fmt.total_bits):
        if SoftValue(fmt, bits).is_finite():
            out.append(bits)
    return out


def _median_batch_ns(fn_call, inputs, calls: int, batch: int = 2048) -> float:
    per_batch = []
    done = 0
    n = len(inputs)
    idx = 0
    while done < calls:
        t0 = time.perf_counter_ns()
        for _ in range(batch):
            fn_call(inputs[idx])
            idx += 1
            if idx == n:
                idx = 0
        t1 = time.perf_counter_ns()
        per_batch.append((t1 - t0) / batch)
        done += batch
    # Two warmup batches discarded (interpreter caches, branch warmup).
    trimmed = per_batch[2:] if len(per_batch) > 4 else per_batch
    return statistics.median(trimmed)


def bench_artifact(
    art: KernelArtifact,
    baseline: str = "fesetround",
    calls: int = 1_000_000,
    seed: int = 12345,
) -> BenchReport:
    import random

    if baseline not in ("fesetround", "fastmxcsr", "none"):
        raise ValueError(f"unknown baseline {baseline!r}")
    evaluator = make_evaluator(art)
    rng = random.Random(seed)
    inputs = _finite_inputs(art.input_format)
    rng.shuffle(inputs)

    kernel_ns = _median_batch_ns(evaluator, inputs, calls)

    rn = AmbientMode.RN
    if baseline == "fesetround":
        def wrapped(bits):
            prev = fenv.set_mode(rn)
            out = evaluator(bits)
            fenv.set_mode(prev)
            return out
    elif baseline == "fastmxcsr":
        if not fenv.has_fast_mode():
            raise fenv.FloatEnvError("fastmxcsr baseline requires x86-64")
        fast = fenv.fast_set_mode
        def wrapped(bits):
            fast(rn)
            out = evaluator(bits)
            fast(rn)
            return out
    else:
        wrapped = evaluator
    baseline_ns = _median_batch_ns(wrapped, inputs, calls)

    t0 = time.perf_counter_ns()
    reps = 20000
    for _ in range(reps):
        prev = fenv.set_mode(rn)
        fenv.set_mode(prev)
    switch_ns = (time.perf_counter_ns() - t0) / (2 * reps)

    cycles = None
    if fenv.has_rdtsc():
        samples = []
        for _ in range(2000):
            bits = inputs[rng.randrange(len(inputs))]
            c0 = fenv.rdtsc()
            evaluator(bits)
            samples.append(fenv.rdtsc() - c0)
        cycles = float(statistics.median(samples))

    return BenchReport(
        fn=art.fn,
        format=art.input_format.spec_string(),
        flavor=art.flavor,
        baseline=baseline,
        calls=calls,
        kernel_ns=kernel_ns,
        baseline_ns=baseline_ns,
        speedup=baseline_ns / kernel_ns if kernel_ns else float("inf"),
        mode_switch_ns=switch_ns,
        rdtsc_available=fenv.has_rdtsc(),
        kernel_cycles=cycles,
        seed=seed,
    )
