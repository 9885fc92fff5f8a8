"""Analytic lower bounds for almost disjunctive list-decoding codes.

For a code of strength s, list size L and relative column weight Q this
module evaluates, for the constant-weight random ensemble:

- the large-deviation rate function A(s, Q, q) of the union size of s random
  weight-QN columns, in the parametric form driven by the root y of
  q = Q * (1 - y^s) / (1 - y);
- the per-weight capacity C(s, Q) = h(Q) - (1-(1-Q)^s) * h(Q / (1-(1-Q)^s))
  and its maximum over Q;
- the rate bound A_L(s, Q) / (s + L - 1) with A_L the minimum of
  A(s, Q, q) + L * (h(Q) - q*h(Q/q)) over q, available in closed form from
  the stationarity equation y = 1 - Q + Q y^s (1 - ((y-y^s)/(1-y^s))^L);
- the error-probability exponent E_L(s, R, Q), its piecewise closed form in
  R (straight line of slope -L up to a critical rate, then the rate function
  along the constraint h(Q) - q h(Q/q) = R, then zero beyond C(s, Q)), and
  its maximization over Q;
- the reference table of optimized bounds for s, L in 2..10.

Everything is a pure function; the small internal caches only memoize root
solves keyed by their exact float arguments.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

from .numerics import (
    BracketError,
    ConvergenceError,
    DomainError,
    binary_entropy,
    find_root,
    kl_div,
    maximize_scalar,
    positive_part,
    xlog2,
)

# Width tolerance for the internal y/q root solves.  Tighter than the public
# default so that round-trips through q_of_y stay below 1e-12.
_Y_WIDTH = 1e-14
# Q-maximizations run on a clipped interval: the entropy terms are defined by
# limits at 0 and 1 and every optimum of interest is interior.
_Q_LO = 1e-6
_Q_HI = 1.0 - 1e-6
# Proximity window for the piecewise-branch agreement check.
_BREAK_EPS = 1e-9


@dataclass(frozen=True)
class CodeParams:
    """Strength, list size, column weight and rate of one bound evaluation."""

    s: int
    L: int
    Q: float
    R: float = 0.0

    def __post_init__(self) -> None:
        if self.s < 1:
            raise DomainError(f"CodeParams: s={self.s} must be >= 1")
        if self.L < 1:
            raise DomainError(f"CodeParams: L={self.L} must be >= 1")
        if not 0.0 < self.Q < 1.0:
            raise DomainError(f"CodeParams: Q={self.Q!r} outside (0, 1)")
        if self.R < 0.0:
            raise DomainError(f"CodeParams: R={self.R!r} must be >= 0")


@dataclass(frozen=True)
class ParametricPoint:
    """A point (y, q) linked by q = Q * (1 - y^s) / (1 - y)."""

    y: float
    q: float


@dataclass(frozen=True)
class BoundResult:
    """A bound value together with the inner solutions that produced it."""

    value: float
    q_or_y_root: float | None = None
    argmax_Q: float | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ExponentCurve:
    """Sampled exponent-vs-rate curve at fixed column weight Q."""

    s: int
    L: int
    Q: float
    r_critical: float
    capacity: float
    samples: tuple[tuple[float, float], ...]


def _check_slq(s: int, L: int, Q: float) -> None:
    if s < 1:
        raise DomainError(f"s={s} must be >= 1")
    if L < 1:
        raise DomainError(f"L={L} must be >= 1")
    if not 0.0 < Q < 1.0:
        raise DomainError(f"Q={Q!r} outside (0, 1)")


def q_of_y(s: int, Q: float, y: float) -> float:
    """Q * (1 + y + ... + y^(s-1)), the union-size fraction at parameter y."""
    if s < 1:
        raise DomainError(f"s={s} must be >= 1")
    if not 0.0 < Q < 1.0:
        raise DomainError(f"Q={Q!r} outside (0, 1)")
    if not 0.0 < y < 1.0:
        raise DomainError(f"y={y!r} outside (0, 1)")
    total = 0.0
    power = 1.0
    for _ in range(s):
        total += power
        power *= y
    return Q * total


def y_of_q(s: int, Q: float, q: float) -> ParametricPoint:
    """Invert q_of_y on y in (0, 1); q must lie strictly inside (Q, min(1, sQ))."""
    _check_slq(s, 1, Q)
    q_hi = min(1.0, s * Q)
    if not Q < q < q_hi:
        raise DomainError(f"y_of_q: q={q!r} outside ({Q!r}, {q_hi!r})")
    root = find_root(lambda y: q_of_y(s, Q, y) - q, 1e-15, 1.0 - 1e-15, tol=_Y_WIDTH)
    return ParametricPoint(y=root.x, q=q)


def _rate_A_at_y(s: int, Q: float, y: float) -> float:
    """Rate function value at parameter y (q implied by q_of_y)."""
    q = q_of_y(s, Q, y)
    ys = y**s
    return (
        xlog2(1.0 - q)
        + q * math.log2(Q * ys / (1.0 - y))
        + s * Q * math.log2((1.0 - y) / y)
        + s * binary_entropy(Q)
    )


def rate_function_A(s: int, Q: float, q: float) -> float:
    """Union-size rate function A(s, Q, q) for q in [Q, min(1, sQ)], in bits.

    Convex in q, zero exactly at q = 1 - (1-Q)^s.  The closed form is
    parametric and only valid for interior q; the endpoints are the limits
    A -> (s-1) h(Q) as q -> Q, and continuity just below q = min(1, sQ).
    """
    _check_slq(s, 1, Q)
    q_hi = min(1.0, s * Q)
    if not Q <= q <= q_hi:
        raise DomainError(f"rate_function_A: q={q!r} outside [{Q!r}, {q_hi!r}]")
    if q <= Q or s == 1:
        return (s - 1) * binary_entropy(Q)
    if q >= q_hi:
        q = q_hi - 1e-9
        if q <= Q:  # degenerate window, can only happen for s == 1
            return (s - 1) * binary_entropy(Q)
    return _rate_A_at_y(s, Q, y_of_q(s, Q, q).y)


def capacity_at_Q(s: int, Q: float) -> float:
    """C(s, Q) = h(Q) - (1-(1-Q)^s) * h(Q / (1-(1-Q)^s)), in bits."""
    _check_slq(s, 1, Q)
    q0 = 1.0 - (1.0 - Q) ** s
    return binary_entropy(Q) - q0 * binary_entropy(Q / q0)


def capacity_at_Q_alt(s: int, Q: float) -> float:
    """Algebraically equivalent expansion of capacity_at_Q, for cross-checks.

    (1-Q-(1-Q)^s) log2(1 - Q(1-Q)^(s-1)/(1-(1-Q)^s))
      - Q log2(1-(1-Q)^s) - (1-Q)^s log2(1-Q)
    """
    _check_slq(s, 1, Q)
    one_m = 1.0 - Q
    pow_s = one_m**s
    q0 = 1.0 - pow_s
    lead = 1.0 - Q - pow_s
    inner = 1.0 - Q * one_m ** (s - 1) / q0
    first = lead * math.log2(inner) if lead != 0.0 else 0.0
    return first - Q * math.log2(q0) - pow_s * math.log2(one_m)


def capacity(s: int, opt_tol: float = 1e-10, grid: int = 256) -> BoundResult:
    """Capacity lower bound max over Q in (0, 1) of capacity_at_Q."""
    if s < 1:
        raise DomainError(f"s={s} must be >= 1")
    res = maximize_scalar(lambda Q: capacity_at_Q(s, Q), _Q_LO, _Q_HI, tol=opt_tol, grid=grid)
    return BoundResult(
        value=res.f_star,
        argmax_Q=res.x_star,
        diagnostics={"evaluations": float(res.evaluations)},
    )


@lru_cache(maxsize=200_000)
def _y_root_cached(s: int, L: int, Q: float) -> tuple[float, int, float]:
    """Root y in [1-Q, 1) of y = 1 - Q + Q y^s (1 - ((y-y^s)/(1-y^s))^L).

    Solved as the sign change of g(y) = y - RHS.  g(1-Q) <= 0 always; the
    bracket includes its left endpoint because the root collapses onto 1-Q
    (at distance about Q(1-Q)^s) when Q approaches 1.
    """

    def g(y: float) -> float:
        ys = y**s
        r = (y - ys) / (1.0 - ys)
        return y - (1.0 - Q) - Q * ys * (1.0 - r**L)

    root = find_root(g, 1.0 - Q, 1.0 - 1e-13, tol=_Y_WIDTH)
    return root.x, root.iterations, root.residual


def y_root_theorem1(s: int, L: int, Q: float) -> float:
    """The y-parameter at which the list-penalized rate function is minimal.

    For s == 1 the defining equation degenerates (the penalty bracket is
    identically 1) and the left endpoint y = 1 - Q is returned by continuity.
    """
    _check_slq(s, L, Q)
    if s == 1:
        return 1.0 - Q
    return _y_root_cached(s, L, Q)[0]


def q2_minimizer(s: int, L: int, Q: float) -> ParametricPoint:
    """Location (y2, q2) of the minimum of A(s,Q,q) + L*(h(Q) - q h(Q/q)).

    q2 exceeds 1 - (1-Q)^s strictly for s >= 2; when s*Q > 1 the stationary
    point can land beyond the admissible window q <= 1, in which case it is
    clamped to the boundary q = 1.
    """
    _check_slq(s, L, Q)
    if s == 1:
        return ParametricPoint(y=1.0 - Q, q=Q)
    y2 = y_root_theorem1(s, L, Q)
    q2 = q_of_y(s, Q, y2)
    if q2 > 1.0:
        y2 = find_root(lambda y: q_of_y(s, Q, y) - 1.0, 1e-15, 1.0 - 1e-15, tol=_Y_WIDTH).x
        q2 = 1.0
    q_floor = 1.0 - (1.0 - Q) ** s
    if q2 <= q_floor:
        raise ConvergenceError(
            f"q2_minimizer: q2={q2!r} not above 1-(1-Q)^s={q_floor!r} (solver bug)"
        )
    return ParametricPoint(y=y2, q=q2)


def exponent_A_L(s: int, L: int, Q: float) -> float:
    """Optimized numerator A_L(s, Q) of the rate bound, in bits.

    Closed form log2(Q/(1-y)) - s K(Q, 1-y) - L K(Q, (1-y)/(1-y^s)) at the
    root y of y_root_theorem1; equals the minimum over q of
    A(s, Q, q) + L * (h(Q) - q h(Q/q)).  For s == 1 that minimization window
    collapses to the single point q = Q, where the value is L * h(Q).
    """
    _check_slq(s, L, Q)
    if s == 1:
        return L * binary_entropy(Q)
    pt = q2_minimizer(s, L, Q)
    if pt.q >= 1.0:  # clamped: the penalty h(Q) - q h(Q/q) vanishes at q = 1
        return rate_function_A(s, Q, 1.0)
    y = pt.y
    ys = y**s
    return (
        math.log2(Q / (1.0 - y))
        - s * kl_div(Q, 1.0 - y)
        - L * kl_div(Q, (1.0 - y) / (1.0 - ys))
    )


def rate_rc(s: int, L: int, opt_tol: float = 1e-10, grid: int = 256) -> BoundResult:
    """Random-coding rate bound max over Q of A_L(s, Q) / (s + L - 1)."""
    if s < 1 or L < 1:
        raise DomainError(f"rate_rc: s={s}, L={L} must be >= 1")
    res = maximize_scalar(
        lambda Q: exponent_A_L(s, L, Q), _Q_LO, _Q_HI, tol=opt_tol, grid=grid
    )
    y2 = y_root_theorem1(s, L, res.x_star)
    return BoundResult(
        value=res.f_star / (s + L - 1),
        q_or_y_root=y2,
        argmax_Q=res.x_star,
        diagnostics={"evaluations": float(res.evaluations), "A_L": res.f_star},
    )


def rate_rc_inf(s: int) -> float:
    """Large-list limit of the rate bound: log2((s-1)^(s-1)/s^s + 1).

    Uses the convention 0^0 = 1 at s = 1, where the value is exactly 1 bit.
    """
    if s < 1:
        raise DomainError(f"rate_rc_inf: s={s} must be >= 1")
    if s == 1:
        return 1.0
    ratio = math.exp((s - 1) * math.log(s - 1.0) - s * math.log(float(s)))
    return math.log2(1.0 + ratio)


def r_critical_at_Q(s: int, L: int, Q: float) -> float:
    """Critical rate h(Q) - q2 h(Q/q2) at fixed Q, the knee of the exponent."""
    pt = q2_minimizer(s, L, Q)
    return binary_entropy(Q) - pt.q * binary_entropy(Q / pt.q)


def q1_of_R(R: float, Q: float) -> float:
    """Solve h(Q) - q h(Q/q) = R for q in (Q, 1).

    The left side strictly decreases from h(Q) to 0 as q runs from Q to 1,
    so a root exists iff 0 < R < h(Q).
    """
    if not 0.0 < Q < 1.0:
        raise DomainError(f"q1_of_R: Q={Q!r} outside (0, 1)")
    hq = binary_entropy(Q)
    if not 0.0 < R < hq:
        raise DomainError(f"q1_of_R: R={R!r} outside (0, h(Q)={hq!r})")

    def g(q: float) -> float:
        return hq - q * binary_entropy(Q / q) - R

    return find_root(g, Q + 1e-13, 1.0 - 1e-13, tol=_Y_WIDTH).x


def _middle_branch_value(s: int, L: int, R: float, Q: float) -> float:
    # Between the critical rate and capacity the binding constraint is
    # h(Q) - q h(Q/q) = R; the exponent is the rate function there.
    return rate_function_A(s, Q, q1_of_R(max(R, 1e-15), Q))


def exponent_at_Q(s: int, L: int, R: float, Q: float) -> float:
    """Error-probability exponent E_L(s, R, Q), piecewise closed form in R.

    A_L(s,Q) - L*R up to the critical rate, then the rate function along
    h(Q) - q h(Q/q) = R, then 0 from C(s, Q) on.  Within 1e-9 of a
    breakpoint both adjacent branches are evaluated, must agree to 1e-9,
    and the left one is returned.
    """
    _check_slq(s, L, Q)
    if R < 0.0:
        raise DomainError(f"exponent_at_Q: R={R!r} must be >= 0")
    r_cr = r_critical_at_Q(s, L, Q)
    cap = capacity_at_Q(s, Q)
    line = exponent_A_L(s, L, Q) - L * R
    if R < r_cr - _BREAK_EPS:
        return line
    if R <= r_cr + _BREAK_EPS:
        middle = _middle_branch_value(s, L, R, Q)
        if abs(line - middle) > 1e-9:
            raise ConvergenceError(
                f"exponent_at_Q: branch mismatch {line!r} vs {middle!r} at R={R!r}"
            )
        return line
    if R < cap - _BREAK_EPS:
        return _middle_branch_value(s, L, R, Q)
    if R <= cap + _BREAK_EPS:
        middle = _middle_branch_value(s, L, R, Q) if R < binary_entropy(Q) else 0.0
        if abs(middle) > 1e-9:
            raise ConvergenceError(
                f"exponent_at_Q: nonzero value {middle!r} at capacity breakpoint"
            )
        return middle
    return 0.0


def exponent(s: int, L: int, R: float, opt_tol: float = 1e-10, grid: int = 256) -> BoundResult:
    """Exponent lower bound max over Q in (0, 1) of exponent_at_Q."""
    if s < 1 or L < 1:
        raise DomainError(f"exponent: s={s}, L={L} must be >= 1")
    if R < 0.0:
        raise DomainError(f"exponent: R={R!r} must be >= 0")
    res = maximize_scalar(
        lambda Q: exponent_at_Q(s, L, R, Q), _Q_LO, _Q_HI, tol=opt_tol, grid=grid
    )
    return BoundResult(
        value=res.f_star,
        argmax_Q=res.x_star,
        diagnostics={"evaluations": float(res.evaluations)},
    )


def exponent_derivative_at_Q(s: int, L: int, R: float, Q: float) -> float:
    """Closed-form dE/dR on the active branch of exponent_at_Q.

    -L on the straight segment, 0 beyond capacity, and on the middle branch
    log2(Q y^s / (1-Q-y+Q y^s)) / log2((q-Q)/q) with q solving
    h(Q) - q h(Q/q) = R.  Raises within 1e-9 of a breakpoint, where the
    one-sided derivatives meet but the branch is ambiguous.
    """
    _check_slq(s, L, Q)
    if R < 0.0:
        raise DomainError(f"exponent_derivative_at_Q: R={R!r} must be >= 0")
    r_cr = r_critical_at_Q(s, L, Q)
    cap = capacity_at_Q(s, Q)
    if abs(R - r_cr) <= _BREAK_EPS or abs(R - cap) <= _BREAK_EPS:
        raise DomainError(
            f"exponent_derivative_at_Q: R={R!r} within {_BREAK_EPS} of a breakpoint"
        )
    if R < r_cr:
        return -float(L)
    if R > cap:
        return 0.0
    q = q1_of_R(R, Q)
    y = y_of_q(s, Q, q).y
    ys = y**s
    numer = math.log2(Q * ys / (1.0 - Q - y + Q * ys))
    denom = math.log2((q - Q) / q)
    return numer / denom


def r_critical(s: int, L: int, opt_tol: float = 1e-8, grid: int = 128) -> float:
    """Largest R at which the optimized exponent still sits on the line
    (s+L-1) * rate_rc - L*R, located by bisection on [0, capacity].
    """
    rr = rate_rc(s, L)
    a_star = rr.value * (s + L - 1)
    cap = capacity(s).value

    def on_line(R: float) -> bool:
        e = exponent(s, L, R, opt_tol=1e-9, grid=grid).value
        return abs(e - (a_star - L * R)) <= 1e-8

    lo, hi = 0.0, cap
    if not on_line(lo):
        return 0.0
    while hi - lo > opt_tol:
        mid = 0.5 * (lo + hi)
        if on_line(mid):
            lo = mid
        else:
            hi = mid
    return lo


def exponent_curve(
    s: int, L: int, Q: float, r_lo: float, r_hi: float, n: int
) -> ExponentCurve:
    """Sample the fixed-Q exponent on n equispaced rates in [r_lo, r_hi]."""
    _check_slq(s, L, Q)
    if not (0.0 <= r_lo < r_hi) or n < 2:
        raise DomainError(f"exponent_curve: bad grid ({r_lo!r}, {r_hi!r}, {n})")
    rs = [r_lo + (r_hi - r_lo) * i / (n - 1) for i in range(n)]
    samples = tuple((R, exponent_at_Q(s, L, R, Q)) for R in rs)
    return ExponentCurve(
        s=s,
        L=L,
        Q=Q,
        r_critical=r_critical_at_Q(s, L, Q),
        capacity=capacity_at_Q(s, Q),
        samples=samples,
    )


# ---------------------------------------------------------------------------
# Reference table
# ---------------------------------------------------------------------------

#: (s, L) cells that require an external bound and are excluded from the table.
EXCLUDED_CELLS = frozenset((s, 2) for s in range(7, 11))

TABLE_S_RANGE = range(2, 11)
TABLE_L_RANGE = range(2, 11)


@dataclass(frozen=True)
class Table1Cell:
    s: int
    L: int
    Q: float | None
    rate: float | None
    r_cr: float | None
    excluded: bool = False


@dataclass(frozen=True)
class Table1Bottom:
    s: int
    capacity: float
    Q: float
    r_cr_1: float


@dataclass(frozen=True)
class Table1Report:
    cells: tuple[Table1Cell, ...]
    bottom: tuple[Table1Bottom, ...]


def _table_cell(s: int, L: int) -> Table1Cell:
    if (s, L) in EXCLUDED_CELLS:
        return Table1Cell(s=s, L=L, Q=None, rate=None, r_cr=None, excluded=True)
    rr = rate_rc(s, L)
    # The tabulated critical rate is the fixed-Q knee at the rate-optimal Q.
    r_cr = r_critical_at_Q(s, L, rr.argmax_Q)
    return Table1Cell(s=s, L=L, Q=rr.argmax_Q, rate=rr.value, r_cr=r_cr)


def _table_bottom(s: int) -> Table1Bottom:
    cap = capacity(s)
    rr1 = rate_rc(s, 1)
    # Bottom-row critical rate: list size 1 at the rate-optimal Q for L = 1.
    r_cr_1 = r_critical_at_Q(s, 1, rr1.argmax_Q)
    return Table1Bottom(s=s, capacity=cap.value, Q=cap.argmax_Q, r_cr_1=r_cr_1)


def table1(
    cells: list[tuple[int, int]] | None = None,
    s_values: list[int] | None = None,
    threads: int = 1,
) -> Table1Report:
    """Compute the optimized-bound table: per-cell (Q_L, rate, critical rate)
    for s, L in 2..10 (externally-bounded cells emitted as excluded markers)
    plus the capacity block for s in 2..10.
    """
    want_cells = cells if cells is not None else [
        (s, L) for s in TABLE_S_RANGE for L in TABLE_L_RANGE
    ]
    want_bottom = s_values if s_values is not None else list(TABLE_S_RANGE)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cell_rows = list(pool.map(lambda c: _table_cell(*c), want_cells))
            bottom_rows = list(pool.map(_table_bottom, want_bottom))
    else:
        cell_rows = [_table_cell(s, L) for (s, L) in want_cells]
        bottom_rows = [_table_bottom(s) for s in want_bottom]
    return Table1Report(cells=tuple(cell_rows), bottom=tuple(bottom_rows))
