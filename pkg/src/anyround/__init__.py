"""Correctly rounded exp2/log2 kernels that stay correct under any ambient
IEEE rounding mode, without ever switching it.

Modules: softfloat (parametric bit-exact formats and rounding), eft
(round-to-zero and directed-rounding emulation over native binary64), fenv
(test/bench-only rounding-mode control), oracle (rigorous rational
enclosures and round-to-odd oracles), bounds (worst-case rounding
envelopes of expression programs), intervalgen/polygen (reduced intervals
and exact-LP coefficient generation), runtime (kernel artifacts and their
evaluator), pipeline (build/verify/bench), service (HTTP API), cli.
"""

__version__ = "0.1.0"
