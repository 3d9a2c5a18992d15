"""HTTP service exposing the kernel-generation pipeline.

Build, verification, and benchmark requests are coarse-grained: the
request carries whole pipeline files (interval/constraint/artifact
documents) as text, and responses return the produced document plus
summary statistics.  The CLI is a thin client of these endpoints.

Rounding-mode ownership: verification switches the rounding mode of the
worker thread it runs on and always restores it; threads hold independent
FP environments, so concurrent verifies are safe.  Benchmarks additionally
serialize on a lock to keep timings meaningful.
"""

from __future__ import annotations

import tempfile
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import eft, fenv, intervalgen, oracle, pipeline, polygen, runtime
from .polygen import DegreePolicy, UngeneratableError
from .runtime import ArtifactDigestError, ArtifactError
from .softfloat import FloatFormat

app = FastAPI(
    title="anyround",
    description="Correctly rounded exp2/log2 kernels that never touch the rounding mode",
)

_bench_lock = threading.Lock()


def _parse_format(text: str) -> FloatFormat:
    try:
        return FloatFormat.parse(text)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))


def _check_fn(fn: str) -> str:
    if fn not in oracle.FUNCTIONS:
        raise HTTPException(status_code=422, detail=f"unknown function {fn!r}; have {oracle.FUNCTIONS}")
    return fn


def _load_artifact(text: str) -> runtime.KernelArtifact:
    try:
        return runtime.from_json(text)
    except ArtifactDigestError as e:
        raise HTTPException(status_code=409, detail=str(e))
    except (ArtifactError, KeyError, ValueError) as e:
        raise HTTPException(status_code=422, detail=f"malformed artifact: {e}")


class Health(BaseModel):
    status: str
    machine_has_fast_paths: bool
    fma_backend: str


@app.get("/healthz", response_model=Health)
def healthz():
    return Health(
        status="ok",
        machine_has_fast_paths=fenv.has_fast_mode(),
        fma_backend=eft.FMA_BACKEND,
    )


class OracleRequest(BaseModel):
    fn: str
    format: str


class OracleResponse(BaseModel):
    content: str
    records: int
    specials: int


@app.post("/oracle", response_model=OracleResponse)
def oracle_endpoint(req: OracleRequest):
    fn = _check_fn(req.fn)
    fmt = _parse_format(req.format)
    specials, records = oracle.oracle_records(fn, fmt)
    with tempfile.NamedTemporaryFile("w+", suffix=".intervals") as tmp:
        oracle.write_interval_file(tmp.name, fn, fmt, records)
        content = Path(tmp.name).read_text()
    return OracleResponse(content=content, records=len(records), specials=len(specials))


class IntervalsRequest(BaseModel):
    oracle: str = Field(description="interval file content")
    oc: str = Field(description="output compensation id, e.g. pow2_scale")
    single_mode: bool = False


class IntervalsResponse(BaseModel):
    content: str
    constraints: int
    infeasible_inputs: list[str]


@app.post("/intervals", response_model=IntervalsResponse)
def intervals_endpoint(req: IntervalsRequest):
    with tempfile.NamedTemporaryFile("w+", suffix=".intervals") as tmp:
        tmp.write(req.oracle)
        tmp.flush()
        try:
            fn, fmt, rows = oracle.read_interval_file(tmp.name)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
    _check_fn(fn)
    if req.oc != runtime.OC_IDS[fn]:
        raise HTTPException(
            status_code=422,
            detail=f"function {fn} uses output compensation {runtime.OC_IDS[fn]!r}, not {req.oc!r}",
        )
    records = [
        oracle.OracleRecord(ib, None, oracle.RoundingInterval(lb, hb)) for ib, lb, hb in rows
    ]
    # Exact results and constant runs never reach the polynomial; drop them
    # the same way the build pipeline does (degenerate intervals are exact).
    poly_records = [r for r in records if r.interval.l_bits != r.interval.h_bits]
    _, covered = pipeline.detect_constant_regions(poly_records)
    poly_records = [r for r in poly_records if r.input_bits not in covered]
    constraints, infeasible = pipeline.build_constraints(
        fn, fmt, poly_records, single_mode=req.single_mode
    )
    with tempfile.NamedTemporaryFile("w+", suffix=".constraints") as tmp:
        intervalgen.write_constraint_file(tmp.name, fn, fmt, runtime.OC_IDS[fn], constraints)
        content = Path(tmp.name).read_text()
    return IntervalsResponse(
        content=content,
        constraints=len(constraints),
        infeasible_inputs=[f"{b:0{fmt.hex_width}x}" for b in sorted(infeasible)],
    )


class PolygenRequest(BaseModel):
    constraints: str = Field(description="constraint file content")
    flavor: str
    degree_start: int | None = None
    degree_cap: int | None = None


class PolygenResponse(BaseModel):
    poly_block: dict
    degree: int
    groups: int


@app.post("/polygen", response_model=PolygenResponse)
def polygen_endpoint(req: PolygenRequest):
    if req.flavor not in ("rio", "riib"):
        raise HTTPException(status_code=422, detail="flavor must be rio or riib")
    with tempfile.NamedTemporaryFile("w+", suffix=".constraints") as tmp:
        tmp.write(req.constraints)
        tmp.flush()
        try:
            fn, fmt, oc_id, constraints = intervalgen.read_constraint_file(tmp.name)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
    groups, infeasible = intervalgen.group_constraints(constraints)
    if infeasible:
        raise HTTPException(
            status_code=422,
            detail=f"{len(infeasible)} inputs have empty grouped intervals; "
            f"first: {infeasible[0]:0{fmt.hex_width}x} (special-case them via build)",
        )
    policy = _policy(req.degree_start, req.degree_cap, fmt)
    try:
        poly = polygen.generate(groups, req.flavor, policy)
    except UngeneratableError as e:
        raise HTTPException(
            status_code=422,
            detail=f"{e}; violating inputs: "
            + ",".join(f"{b:0{fmt.hex_width}x}" for b in e.violating_inputs[:8]),
        )
    return PolygenResponse(
        poly_block={
            "fn": fn,
            "format": fmt.spec_string(),
            "flavor": req.flavor,
            "oc": oc_id,
            "poly": {
                "degree": poly.degree,
                "terms": list(poly.terms),
                "coefficients": [f"{c:016x}" for c in poly.coeff_bits],
                "scheme": "horner",
            },
        },
        degree=poly.degree,
        groups=len(groups),
    )


def _policy(start, cap, fmt) -> DegreePolicy:
    default = DegreePolicy.for_precision(fmt.precision)
    return DegreePolicy(
        start=default.start if start is None else start,
        cap=default.cap if cap is None else cap,
    )


class BuildRequest(BaseModel):
    fn: str
    format: str
    flavor: str
    degree_start: int | None = None
    degree_cap: int | None = None


class BuildResponse(BaseModel):
    artifact: str
    stats: dict


@app.post("/build", response_model=BuildResponse)
def build_endpoint(req: BuildRequest):
    fn = _check_fn(req.fn)
    fmt = _parse_format(req.format)
    if req.flavor not in ("rio", "riib"):
        raise HTTPException(status_code=422, detail="flavor must be rio or riib")
    policy = _policy(req.degree_start, req.degree_cap, fmt)
    try:
        art, stats = pipeline.build_artifact(fn, fmt, req.flavor, policy=policy)
    except UngeneratableError as e:
        raise HTTPException(
            status_code=422,
            detail=f"{e}; violating inputs: "
            + ",".join(f"{b:0{fmt.hex_width}x}" for b in e.violating_inputs[:8]),
        )
    return BuildResponse(artifact=runtime.to_json(art), stats=vars(stats))


class VerifyRequest(BaseModel):
    artifact: str
    ambient_modes: list[str] | None = None
    target_widths: list[int] | None = None
    max_examples: int = 16


class VerifyResponse(BaseModel):
    report: dict
    summary: list[str]


@app.post("/verify", response_model=VerifyResponse)
def verify_endpoint(req: VerifyRequest):
    art = _load_artifact(req.artifact)
    try:
        report = pipeline.verify_artifact(
            art,
            ambient_modes=req.ambient_modes,
            target_widths=req.target_widths,
            max_examples=req.max_examples,
        )
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return VerifyResponse(report=report.to_dict(), summary=report.summary_lines())


class BenchRequest(BaseModel):
    artifact: str
    baseline: str = "fesetround"
    calls: int = 1_000_000
    seed: int = 12345


class BenchResponse(BaseModel):
    report: dict


@app.post("/bench", response_model=BenchResponse)
def bench_endpoint(req: BenchRequest):
    art = _load_artifact(req.artifact)
    with _bench_lock:
        try:
            report = pipeline.bench_artifact(
                art, baseline=req.baseline, calls=req.calls, seed=req.seed
            )
        except (ValueError, fenv.FloatEnvError) as e:
            raise HTTPException(status_code=422, detail=str(e))
    return BenchResponse(report=report.to_dict())


class EvalRequest(BaseModel):
    artifact: str
    inputs: list[str] = Field(description="input bit patterns, hex")


class EvalResponse(BaseModel):
    outputs: list[str] = Field(description="binary64 bit patterns, hex")


@app.post("/eval", response_model=EvalResponse)
def eval_endpoint(req: EvalRequest):
    art = _load_artifact(req.artifact)
    evaluator = runtime.make_evaluator(art)
    limit = 1 << art.input_format.total_bits
    outs = []
    for text in req.inputs:
        try:
            bits = int(text, 16)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"bad input hex {text!r}")
        if not 0 <= bits < limit:
            raise HTTPException(status_code=422, detail=f"input {text!r} out of range for format")
        outs.append(f"{eft.float_to_bits(evaluator(bits)):016x}")
    return EvalResponse(outputs=outs)
