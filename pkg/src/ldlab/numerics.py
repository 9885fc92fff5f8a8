"""Scalar special functions and bracketed 1-D solvers.

Everything downstream is built on the few primitives in this module, so the
conventions are fixed here once:

- all logarithms are base 2 (results are in bits),
- 0*log2(0) = 0 (continuous extension at the boundary),
- root finding is plain bisection on a verified sign-change bracket,
- maximization is a coarse grid scan followed by golden-section refinement,
  which stays robust if the objective is not perfectly unimodal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

LN2 = math.log(2.0)

DEFAULT_ROOT_TOL = 1e-12   # absolute tolerance on the bracket width
DEFAULT_OPT_TOL = 1e-10    # absolute tolerance on the argmax
DEFAULT_GRID = 256         # coarse scan points for maximize_scalar
MAX_ITERATIONS = 200

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


class ConvergenceError(RuntimeError):
    """The iteration cap was reached before the requested tolerance."""


class NonFiniteError(ArithmeticError):
    """A function evaluation returned NaN or an infinity."""


@dataclass(frozen=True)
class BracketedRoot:
    """Result of a bracketed root solve."""

    x: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class MaximizerResult:
    """Result of a scalar maximization."""

    x_star: float
    f_star: float
    evaluations: int


def positive_part(x: float) -> float:
    """max(x, 0)."""
    return x if x > 0.0 else 0.0


def xlog2(x: float) -> float:
    """x * log2(x), extended with 0 * log2(0) = 0."""
    if x == 0.0:
        return 0.0
    return x * math.log2(x)


def binary_entropy(a: float) -> float:
    """Binary entropy -a*log2(a) - (1-a)*log2(1-a) on [0, 1], in bits."""
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"binary_entropy: a={a!r} outside [0, 1]")
    return -xlog2(a) - xlog2(1.0 - a)


def kl_div(a: float, b: float) -> float:
    """Binary KL divergence a*log2(a/b) + (1-a)*log2((1-a)/(1-b)), in bits.

    Both arguments must be strictly inside (0, 1); the divergence is
    nonnegative and vanishes exactly on the diagonal a == b.
    """
    if not 0.0 < a < 1.0:
        raise DomainError(f"kl_div: a={a!r} outside (0, 1)")
    if not 0.0 < b < 1.0:
        raise DomainError(f"kl_div: b={b!r} outside (0, 1)")
    return a * math.log2(a / b) + (1.0 - a) * math.log2((1.0 - a) / (1.0 - b))


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_ROOT_TOL,
    max_iter: int = MAX_ITERATIONS,
) -> BracketedRoot:
    """Bisection root of f on [lo, hi].

    Requires f(lo) and f(hi) of opposite sign (an endpoint that is exactly
    zero is accepted as the root).  Stops once the bracket width drops to
    `tol` or an iterate evaluates to exactly zero; raises ConvergenceError if
    `max_iter` bisection steps are not enough.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise DomainError(f"find_root: invalid bracket [{lo!r}, {hi!r}]")
    if tol <= 0.0:
        raise DomainError("find_root: tol must be positive")
    flo = f(lo)
    fhi = f(hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)):
        raise NonFiniteError("find_root: non-finite value at a bracket endpoint")
    if flo == 0.0:
        return BracketedRoot(lo, 0, 0.0)
    if fhi == 0.0:
        return BracketedRoot(hi, 0, 0.0)
    if (flo < 0.0) == (fhi < 0.0):
        raise BracketError(
            f"find_root: no sign change on [{lo!r}, {hi!r}] (f={flo!r}, {fhi!r})"
        )
    iterations = 0
    while hi - lo > tol:
        if iterations >= max_iter:
            raise ConvergenceError(
                f"find_root: width {hi - lo!r} > tol {tol!r} after {max_iter} steps"
            )
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # bracket is at float resolution
        fmid = f(mid)
        if not math.isfinite(fmid):
            raise NonFiniteError(f"find_root: f({mid!r}) is not finite")
        iterations += 1
        if fmid == 0.0:
            return BracketedRoot(mid, iterations, 0.0)
        if (fmid < 0.0) == (flo < 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    return BracketedRoot(x, iterations, f(x))


def maximize_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_OPT_TOL,
    grid: int = DEFAULT_GRID,
) -> MaximizerResult:
    """Maximize f on [lo, hi]: coarse grid scan, then golden-section refinement.

    The scan brackets the best grid cell, so a unimodality assumption is only
    needed within one cell; `tol` is the final uncertainty on the argmax.
    """
    if not lo < hi:
        raise DomainError(f"maximize_scalar: empty interval [{lo!r}, {hi!r}]")
    if tol <= 0.0:
        raise DomainError("maximize_scalar: tol must be positive")
    grid = max(int(grid), 3)

    def eval_checked(x: float) -> float:
        v = f(x)
        if not math.isfinite(v):
            raise NonFiniteError(f"maximize_scalar: f({x!r}) is not finite")
        return v

    step = (hi - lo) / (grid - 1)
    xs = [lo + i * step for i in range(grid - 1)] + [hi]
    fs = [eval_checked(x) for x in xs]
    evaluations = grid
    i_best = max(range(grid), key=fs.__getitem__)
    best_x, best_f = xs[i_best], fs[i_best]

    a = xs[max(0, i_best - 1)]
    b = xs[min(grid - 1, i_best + 1)]
    c = b - (b - a) * _INV_PHI
    d = a + (b - a) * _INV_PHI
    fc = eval_checked(c)
    fd = eval_checked(d)
    evaluations += 2
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * _INV_PHI
            fc = eval_checked(c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * _INV_PHI
            fd = eval_checked(d)
        evaluations += 1
    for x, v in ((c, fc), (d, fd), (0.5 * (a + b), eval_checked(0.5 * (a + b)))):
        if v > best_f:
            best_x, best_f = x, v
    evaluations += 1
    return MaximizerResult(best_x, best_f, evaluations)
