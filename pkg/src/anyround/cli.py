"""Command-line client for the kernel-generation service.

Every subcommand is a thin wrapper over the HTTP API: by default the
requests run against an in-process instance of the app, and --server
redirects them to a running deployment unchanged.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx


def _post(args, path: str, payload: dict) -> dict:
    if args.server:
        with httpx.Client(base_url=args.server.rstrip("/"), timeout=None) as client:
            resp = client.post(path, json=payload)
    else:
        # No server given: run the request against an in-process app.
        import asyncio

        from .service import app

        async def go():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://anyround", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(go())
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        print(f"error ({resp.status_code}): {detail}", file=sys.stderr)
        raise SystemExit(2)
    return resp.json()


def _parse_widths(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.replace(",", " ").split()]


def _parse_modes(text: str) -> list[str] | None:
    if text == "all":
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def cmd_oracle(args):
    data = _post(args, "/oracle", {"fn": args.fn, "format": args.format})
    with open(args.out, "w") as f:
        f.write(data["content"])
    print(f"{args.out}: {data['records']} interval records ({data['specials']} special inputs)")


def cmd_intervals(args):
    with open(args.oracle) as f:
        oracle_content = f.read()
    data = _post(
        args,
        "/intervals",
        {"oracle": oracle_content, "oc": args.oc, "single_mode": args.single_mode},
    )
    with open(args.out, "w") as f:
        f.write(data["content"])
    msg = f"{args.out}: {data['constraints']} reduced constraints"
    if data["infeasible_inputs"]:
        msg += f"; infeasible inputs: {','.join(data['infeasible_inputs'][:8])}"
    print(msg)


def cmd_polygen(args):
    with open(args.constraints) as f:
        content = f.read()
    data = _post(
        args,
        "/polygen",
        {
            "constraints": content,
            "flavor": args.flavor,
            "degree_start": args.degree_start,
            "degree_cap": args.degree_cap,
        },
    )
    with open(args.out, "w") as f:
        json.dump(data["poly_block"], f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"{args.out}: degree {data['degree']} polynomial over {data['groups']} constraint groups")


def cmd_build(args):
    data = _post(
        args,
        "/build",
        {
            "fn": args.fn,
            "format": args.format,
            "flavor": args.flavor,
            "degree_start": args.degree_start,
            "degree_cap": args.degree_cap,
        },
    )
    with open(args.out, "w") as f:
        f.write(data["artifact"])
    s = data["stats"]
    print(
        f"{args.out}: {args.fn} {args.format} {args.flavor}: degree {s['degree']}, "
        f"{s['specials']} special entries, {s['constant_regions']} constant regions, "
        f"{s['poly_inputs']} polynomial inputs ({s['elapsed_s']:.1f}s)"
    )


def cmd_verify(args):
    with open(args.artifact) as f:
        artifact = f.read()
    payload = {"artifact": artifact}
    if args.modes:
        modes = _parse_modes(args.modes)
        if modes is not None:
            payload["ambient_modes"] = modes
    if args.targets:
        payload["target_widths"] = _parse_widths(args.targets)
    data = _post(args, "/verify", payload)
    for line in data["summary"]:
        print(line)
    if args.json:
        with open(args.json, "w") as f:
            json.dump(data["report"], f, indent=1, sort_keys=True)
            f.write("\n")
    report = data["report"]
    if report["total_mismatches"] or not report["mode_preserved"]:
        for ex in report["examples"]:
            print(
                f"  mismatch: ambient={ex['ambient']} input={ex['input']} "
                f"width={ex['width']} final={ex['final_mode']} got={ex['got']} want={ex['want']}"
            )
        raise SystemExit(1)


def cmd_bench(args):
    with open(args.artifact) as f:
        artifact = f.read()
    data = _post(
        args,
        "/bench",
        {"artifact": artifact, "baseline": args.baseline, "calls": args.calls, "seed": args.seed},
    )
    r = data["report"]
    print(f"bench {r['fn']} {r['format']} flavor={r['flavor']} seed={r['seed']}")
    print(f"  kernel:   {r['kernel_ns_median']:9.1f} ns/call (median of {r['calls']} calls)")
    print(f"  baseline: {r['baseline_ns_median']:9.1f} ns/call ({r['baseline']})")
    print(f"  speedup:  {r['speedup']:.2f}x")
    print(f"  mode switch latency: {r['mode_switch_ns']:.0f} ns")
    if r["kernel_cycles_median"] is not None:
        print(f"  kernel cycles (rdtsc median): {r['kernel_cycles_median']:.0f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(r, f, indent=1, sort_keys=True)
            f.write("\n")


def cmd_eval(args):
    with open(args.artifact) as f:
        artifact = f.read()
    inputs = [t.strip() for t in args.inputs.split(",") if t.strip()]
    data = _post(args, "/eval", {"artifact": artifact, "inputs": inputs})
    for i, o in zip(inputs, data["outputs"]):
        print(f"{i} -> {o}")


def cmd_serve(args):
    import uvicorn

    uvicorn.run("anyround.service:app", host=args.host, port=args.port)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="anyround",
        description="Generate and check correctly rounded exp2/log2 kernels "
        "that work under any ambient rounding mode.",
    )
    parser.add_argument("--server", help="URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="compute rounding intervals for every input")
    p.add_argument("--fn", required=True, choices=["exp2", "log2"])
    p.add_argument("--format", required=True, help="input format, e.g. 'e5 m7'")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("intervals", help="reduce rounding intervals through output compensation")
    p.add_argument("--oracle", required=True, help="interval file from the oracle stage")
    p.add_argument("--oc", required=True, help="output compensation id (pow2_scale | add_exponent)")
    p.add_argument("--single-mode", action="store_true", help="nearest-even-only reduction (legacy comparison)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_intervals)

    p = sub.add_parser("polygen", help="solve for polynomial coefficients")
    p.add_argument("--constraints", required=True)
    p.add_argument("--flavor", required=True, choices=["rio", "riib"])
    p.add_argument("--degree-start", type=int)
    p.add_argument("--degree-cap", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_polygen)

    p = sub.add_parser("build", help="run oracle, intervals, and polygen end to end")
    p.add_argument("--fn", required=True, choices=["exp2", "log2"])
    p.add_argument("--format", required=True)
    p.add_argument("--flavor", required=True, choices=["rio", "riib"])
    p.add_argument("--degree-start", type=int)
    p.add_argument("--degree-cap", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="exhaustive correctness check of an artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--modes", default="all", help="'all' or comma list of rn,rz,rd,ru")
    p.add_argument("--targets", help="target widths, e.g. '8..12' or '10,12'")
    p.add_argument("--json", help="write the machine-readable report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="median call latency vs a mode-switching baseline")
    p.add_argument("--artifact", required=True)
    p.add_argument("--baseline", default="fesetround", choices=["fesetround", "fastmxcsr", "none"])
    p.add_argument("--calls", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--json", help="write the machine-readable report here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="evaluate an artifact on input bit patterns")
    p.add_argument("--artifact", required=True)
    p.add_argument("--inputs", required=True, help="comma-separated input hex patterns")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
