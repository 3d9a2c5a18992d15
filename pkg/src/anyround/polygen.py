"""Polynomial generation by exact rational linear programming.

solve_lp decides feasibility of  lo_i <= sum_j c_j x_i^j <= hi_i  exactly:
no floating point enters the solver, so identical inputs give bit-identical
results on any host.  The polytope lives in few dimensions (degree+1 <= 9)
with many constraints, so the solver works on a Farkas-style dual with one
row per coefficient: simplex tableaus stay tiny no matter how many
constraints are sampled.

generate() wraps the solver in the sample / round-to-binary64 / verify /
refine loop: a violated constraint joins the active set with its bound
pulled in by one binary64 ulp on the violated side, and the degree
escalates when the LP itself becomes infeasible.  Emission is verify-gated:
every returned polynomial has passed full verification under its flavor's
evaluator, never just the sampled LP.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .bounds import eval_bounds, horner_program
from .eft import add_rz, bits_to_float, float_to_bits, mul_rz
from .intervalgen import GroupedConstraint
from .runtime import CandidatePoly
from .softfloat import (
    BINARY64,
    RN,
    SoftValue,
    decode,
    fp_add,
    fp_mul,
    from_order_key,
    order_key_bits,
    round_rational,
)

FLAVOR_EVALUATORS = ("rio", "riib", "rn-single")

DEGREE_CAP = 8
MAX_REFINE_ROUNDS = 60


class UngeneratableError(RuntimeError):
    def __init__(self, message: str, violating_inputs: list[int]):
        super().__init__(message)
        self.violating_inputs = violating_inputs


@dataclass(frozen=True)
class LPRow:
    x: Fraction
    lo: Fraction
    hi: Fraction


# -- exact simplex --------------------------------------------------------------


def _simplex(a_rows: list[list[Fraction]], b: list[Fraction], costs: list[Fraction]):
    """min costs . mu  s.t.  A mu = b, mu >= 0, by two-phase tableau simplex
    with Bland's rule.  Returns (status, mu, duals): status in {"optimal",
    "infeasible", "unbounded"}; duals solve B^T y = c_B for the final basis.
    """
    m = len(a_rows)
    n = len(a_rows[0]) if m else 0
    # Normalize to b >= 0.
    rows = []
    rhs = []
    for i in range(m):
        if b[i] < 0:
            rows.append([-v for v in a_rows[i]])
            rhs.append(-b[i])
        else:
            rows.append(list(a_rows[i]))
            rhs.append(b[i])
    # Tableau columns: n structural + m artificial.
    total = n + m
    t = [rows[i] + [Fraction(1) if j == i else Fraction(0) for j in range(m)] + [rhs[i]] for i in range(m)]
    basis = list(range(n, n + m))

    def pivot(row: int, col: int) -> None:
        pr = t[row]
        inv = 1 / pr[col]
        t[row] = [v * inv for v in pr]
        pr = t[row]
        for i in range(m):
            if i != row:
                f = t[i][col]
                if f:
                    t[i] = [v - f * p for v, p in zip(t[i], pr)]
        basis[row] = col

    def run_phase(cost_vec: list[Fraction], allowed) -> str:
        while True:
            # Reduced costs from the basis: r_j = c_j - y . A_j with
            # y solving B^T y = c_B; using the tableau, r_j = c_j - c_B . T_j.
            cb = [cost_vec[basis[i]] for i in range(m)]
            entering = -1
            for j in range(total):
                if j in allowed and j not in basis:
                    r = cost_vec[j]
                    for i in range(m):
                        if cb[i]:
                            r -= cb[i] * t[i][j]
                    if r < 0:
                        entering = j
                        break  # Bland: first eligible index
            if entering < 0:
                return "optimal"
            leaving = -1
            best = None
            for i in range(m):
                coef = t[i][entering]
                if coef > 0:
                    ratio = t[i][-1] / coef
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leaving]):
                        best = ratio
                        leaving = i
            if leaving < 0:
                return "unbounded"
            pivot(leaving, entering)

    # Phase 1: drive artificials out.
    art_cost = [Fraction(0)] * n + [Fraction(1)] * m
    allowed = set(range(total))
    status = run_phase(art_cost, allowed)
    assert status == "optimal", "phase 1 is always bounded"
    if sum(t[i][-1] * art_cost[basis[i]] for i in range(m)) > 0:
        return "infeasible", None, None
    # Pivot any lingering artificial out of the basis where possible.
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if t[i][j] != 0:
                    pivot(i, j)
                    break
    # Phase 2 over structural columns only.
    full_cost = list(costs) + [Fraction(0)] * m
    status = run_phase(full_cost, set(range(n)))
    if status == "unbounded":
        return "unbounded", None, None
    mu = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            mu[basis[i]] = t[i][-1]
    duals = _solve_duals(a_rows, b, costs, basis, n)
    return "optimal", mu, duals


def _solve_duals(a_rows, b, costs, basis, n):
    """Solve B^T y = c_B for the final basis (artificial columns are unit
    vectors with cost zero in phase 2)."""
    m = len(a_rows)
    mat = []
    rhs = []
    for i in range(m):
        j = basis[i]
        if j < n:
            col = [a_rows[r][j] for r in range(m)]
            c = costs[j]
        else:
            k = j - n
            sign = Fraction(-1) if b[k] < 0 else Fraction(1)
            col = [sign if r == k else Fraction(0) for r in range(m)]
            c = Fraction(0)
        mat.append(col)
        rhs.append(c)
    # mat rows are B columns transposed: solve mat * y = rhs.
    return _gauss(mat, rhs)


def _gauss(mat, rhs):
    m = len(mat)
    a = [list(row) + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(m):
        piv = next((r for r in range(col, m) if a[r][col] != 0), None)
        if piv is None:
            raise ArithmeticError("singular basis")
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(m):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [v - f * p for v, p in zip(a[r], a[col])]
    return [a[r][m] for r in range(m)]


def _inequality_system(rows: list[LPRow], degree: int):
    """(G, h) with G x <= h over coefficient variables, rows scaled to
    integers to keep tableau arithmetic small."""
    g = []
    h = []
    for row in rows:
        powers = [row.x**j for j in range(degree + 1)]
        den = 1
        for p in powers:
            den = den * p.denominator // _gcd(den, p.denominator)
        hi_den = row.hi.denominator
        lo_den = row.lo.denominator
        s_hi = den * hi_den
        s_lo = den * lo_den
        g.append([p * s_hi for p in powers])
        h.append(row.hi * s_hi)
        g.append([-(p * s_lo) for p in powers])
        h.append(-(row.lo * s_lo))
    return g, h


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def solve_lp(rows: list[LPRow], degree: int, vertex: bool = False):
    """A point satisfying every two-sided constraint, or None if the system
    is infeasible (decided exactly).

    The default point maximizes the worst slack, which tolerates the later
    rounding of coefficients to binary64; vertex=True instead returns a
    vertex of the polytope (the historical generator's behavior).
    """
    if not rows:
        raise ValueError("need at least one constraint")
    v = degree + 1
    g, h = _inequality_system(rows, degree)
    m = len(g)
    if vertex:
        # min f.x over the polytope; dual: min h.mu s.t. G^T mu = -f, mu >= 0.
        f = [Fraction(1, 2 * j + 3) for j in range(v)]
        a_rows = [[g[i][r] for i in range(m)] for r in range(v)]
        b = [-f[r] for r in range(v)]
        status, _, duals = _simplex(a_rows, b, h)
        if status == "unbounded":
            return None  # primal infeasible
        if status == "infeasible":
            raise ArithmeticError("unbounded polytope; sampled constraints too degenerate")
        x = duals
    else:
        # max margin: min h.mu s.t. G^T mu = 0, sum mu = 1, mu >= 0;
        # optimal value < 0 certifies infeasibility of the primal.
        a_rows = [[g[i][r] for i in range(m)] for r in range(v)]
        a_rows.append([Fraction(1)] * m)
        b = [Fraction(0)] * v + [Fraction(1)]
        status, _, duals = _simplex(a_rows, b, h)
        assert status == "optimal", "the dual feasible set is a simplex"
        x = duals[:v]
        # The last dual equals the optimal worst slack; negative slack is a
        # Farkas certificate that the primal is infeasible.
        if duals[v] < 0:
            return None
    # Exact feasibility of the extracted point guards the solver itself.
    for i in range(m):
        lhs = sum(g[i][j] * x[j] for j in range(v))
        if lhs > h[i]:
            raise AssertionError("simplex returned an infeasible point")
    return x


# -- candidate verification -------------------------------------------------------


def _coeff_to_bits(c: Fraction) -> int:
    if c == 0:
        return 0
    return round_rational(c, BINARY64, RN).bits


def _value_le(a: float, b: float) -> bool:
    return a <= b


def _eval_rz(coeffs: list[float], x: float) -> float:
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = add_rz(mul_rz(acc, x), c)
    return acc


def _eval_rn_soft(coeffs: list[float], x: float) -> float:
    xv = SoftValue(BINARY64, float_to_bits(x))
    acc = SoftValue(BINARY64, float_to_bits(coeffs[-1]))
    for c in reversed(coeffs[:-1]):
        cv = SoftValue(BINARY64, float_to_bits(c))
        acc = fp_add(fp_mul(acc, xv, RN), cv, RN)
    return bits_to_float(acc.bits)


def check_constraint(coeffs: list[float], flavor: str, group: GroupedConstraint):
    """Returns the violated side ('lo'/'hi') or None."""
    x = bits_to_float(group.x_prime_bits)
    lo = bits_to_float(group.l_prime_bits)
    hi = bits_to_float(group.h_prime_bits)
    if flavor == "riib":
        env = eval_bounds(horner_program(coeffs), x, x)
        if not _value_le(lo, env.lo):
            return "lo"
        if not _value_le(env.hi, hi):
            return "hi"
        return None
    if flavor == "rio":
        y = _eval_rz(coeffs, x)
    elif flavor == "rn-single":
        y = _eval_rn_soft(coeffs, x)
    else:
        raise ValueError(f"unknown flavor {flavor!r}")
    if not _value_le(lo, y):
        return "lo"
    if not _value_le(y, hi):
        return "hi"
    return None


# -- generation loop --------------------------------------------------------------


@dataclass(frozen=True)
class DegreePolicy:
    start: int
    cap: int = DEGREE_CAP

    @classmethod
    def for_precision(cls, precision: int) -> "DegreePolicy":
        # One free coefficient per two bits of target precision to start.
        return cls(start=max(1, -(-precision // 2) - 1))


def _initial_active(n: int, k: int) -> list[int]:
    if k >= n:
        return list(range(n))
    if k == 1:
        return [0]
    step = (n - 1) / (k - 1)
    return sorted({round(i * step) for i in range(k)})


def _interval_width(g: GroupedConstraint) -> Fraction:
    lo = Fraction(bits_to_float(g.l_prime_bits))
    hi = Fraction(bits_to_float(g.h_prime_bits))
    return hi - lo


def generate(
    groups: list[GroupedConstraint],
    flavor: str,
    policy: DegreePolicy,
    verbose: bool = False,
):
    """A polynomial passing full verification under the flavor's evaluator.

    Raises UngeneratableError when the degree cap is exhausted; the error
    carries the inputs of the constraints still violated at the cap.
    """
    if not groups:
        raise ValueError("need at least one constraint group")
    if flavor not in FLAVOR_EVALUATORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    last_violations: list[int] = []
    for degree in range(policy.start, policy.cap + 1):
        result = _try_degree(groups, flavor, degree, vertex=(flavor == "rn-single"))
        if isinstance(result, tuple):
            coeff_bits = result
            return CandidatePoly(
                degree=degree, terms=tuple(range(degree + 1)), coeff_bits=coeff_bits
            )
        last_violations = result
    raise UngeneratableError(
        f"no generatable polynomial up to degree {policy.cap} for flavor {flavor}",
        sorted({b for i in last_violations for b in groups[i].input_bits}),
    )


def _try_degree(groups, flavor: str, degree: int, vertex: bool):
    """Either the rounded coefficient bit patterns (success) or the list of
    group indices still violated (degree exhausted)."""
    n = len(groups)
    k = min(n, max(2 * (degree + 1), 64))
    active = set(_initial_active(n, k))
    # Working copies of LP bounds, shrinkable by one binary64 ulp per round.
    lp_lo = {}
    lp_hi = {}

    def lp_rows():
        rows = []
        for i in sorted(active):
            g = groups[i]
            lo_b = lp_lo.get(i, g.l_prime_bits)
            hi_b = lp_hi.get(i, g.h_prime_bits)
            rows.append(
                LPRow(
                    x=decode(SoftValue(BINARY64, g.x_prime_bits)),
                    lo=decode(SoftValue(BINARY64, lo_b)),
                    hi=decode(SoftValue(BINARY64, hi_b)),
                )
            )
        return rows

    stall = 0
    prev_count = None
    for _ in range(MAX_REFINE_ROUNDS):
        sol = solve_lp(lp_rows(), degree, vertex=vertex)
        if sol is None:
            return list(range(n))  # infeasible at this degree
        coeff_bits = tuple(_coeff_to_bits(c) for c in sol)
        coeffs = [bits_to_float(b) for b in coeff_bits]
        violations = []
        for i, g in enumerate(groups):
            side = check_constraint(coeffs, flavor, g)
            if side is not None:
                violations.append((i, side))
        if not violations:
            return coeff_bits
        if prev_count is not None and len(violations) >= prev_count:
            stall += 1
            if stall >= 4:
                return [i for i, _ in violations]
        else:
            stall = 0
        prev_count = len(violations)
        if len(violations) > max(16, n // 8):
            k2 = min(n, 2 * max(len(active), 1))
            active.update(_initial_active(n, k2))
        # Hardest (narrowest) constraints first, bounded batch.
        violations.sort(key=lambda iv: (_interval_width(groups[iv[0]]), iv[0]))
        for i, side in violations[:64]:
            g = groups[i]
            active.add(i)
            if side == "lo":
                cur = lp_lo.get(i, g.l_prime_bits)
                nxt = from_order_key(order_key_bits(cur, BINARY64) + 1, BINARY64).bits
                lp_lo[i] = nxt
            else:
                cur = lp_hi.get(i, g.h_prime_bits)
                nxt = from_order_key(order_key_bits(cur, BINARY64) - 1, BINARY64).bits
                lp_hi[i] = nxt
            if order_key_bits(lp_lo.get(i, g.l_prime_bits), BINARY64) > order_key_bits(
                lp_hi.get(i, g.h_prime_bits), BINARY64
            ):
                return [i]  # constraint squeezed empty: degree hopeless
    return [i for i, _ in violations]
