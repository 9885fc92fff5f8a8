"""Exact and Monte Carlo evaluation of the constant-weight random ensemble.

The ensemble {N, t, Q} draws t columns independently and uniformly from the
binomial(N, w) weight-w columns, w = floor(Q*N).  For s fixed columns the
size k of their union determines everything else: conditioned on the union
support, each remaining column is covered independently with probability
C(k, w) / C(N, w).  The probability that a given s-subset is bad (covers at
least L of the other t - s columns) is therefore an exact mixture of
binomial upper tails over the union-size distribution, which this module
computes by enumerating column types in log space.

All combinatorial quantities go through cached log-factorials and log-sum-exp
accumulation; C(400, 100)-sized numbers never materialize.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .numerics import DomainError
from .verifier import BinaryCode

#: hard ceiling on the strength for exact type enumeration
MAX_ENUM_S = 5
#: default per-strength ceiling on N for exact enumeration
DEFAULT_N_BUDGET = {1: 10_000, 2: 400, 3: 400, 4: 80, 5: 80}


class EnumerationBudgetError(RuntimeError):
    """Exact enumeration was requested beyond the configured budget."""


_LOG_FACT: list[float] = [0.0]


def _log_factorial(n: int) -> float:
    """ln(n!) from a growing cache (exact lgamma values, appended once)."""
    if n < 0:
        raise DomainError(f"log_factorial: n={n} must be >= 0")
    while len(_LOG_FACT) <= n:
        _LOG_FACT.append(math.lgamma(len(_LOG_FACT) + 1.0))
    return _LOG_FACT[n]


def _log_choose(n: int, k: int) -> float:
    if k < 0 or k > n:
        return float("-inf")
    if n < 10_000:
        return _log_factorial(n) - _log_factorial(k) - _log_factorial(n - k)
    if k <= 64:
        # falling-factorial form keeps full precision for huge n, small k
        return sum(math.log(n - i) for i in range(k)) - _log_factorial(k)
    return (
        math.lgamma(n + 1.0) - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0)
    )


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of one constant-weight ensemble {N, t, Q}."""

    N: int
    t: int
    Q: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.N < 2:
            raise DomainError(f"EnsembleSpec: N={self.N} must be >= 2")
        if self.t < 1:
            raise DomainError(f"EnsembleSpec: t={self.t} must be >= 1")
        if not 0.0 < self.Q < 1.0:
            raise DomainError(f"EnsembleSpec: Q={self.Q!r} outside (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"EnsembleSpec: seed={self.seed} not a 64-bit value")
        w = int(self.Q * self.N)
        if w < 1 or w > self.N - 1:
            raise DomainError(
                f"EnsembleSpec: floor(Q*N)={w} outside [1, N-1]; "
                "column weight would be degenerate"
            )

    @property
    def w(self) -> int:
        """Column weight floor(Q * N)."""
        return int(self.Q * self.N)


@dataclass(frozen=True)
class TypeDistribution:
    """Counts n(a) of the row patterns a in {0,1}^s across the N rows."""

    s: int
    N: int
    counts: Mapping[tuple[int, ...], int]

    def tau(self, a: tuple[int, ...]) -> float:
        """Normalized frequency n(a) / N."""
        return self.counts[a] / self.N

    def log_multinomial(self) -> float:
        """ln of N! / prod_a n(a)!."""
        total = _log_factorial(self.N)
        for n in self.counts.values():
            total -= _log_factorial(n)
        return total


@dataclass(frozen=True)
class UnionSizePmf:
    """Distribution of the union size k of s independent weight-w columns."""

    s: int
    N: int
    w: int
    p: Mapping[int, float]

    def support(self) -> tuple[int, ...]:
        return tuple(self.p.keys())


@dataclass(frozen=True)
class MonteCarloEstimate:
    """A hit-frequency estimate with its binomial standard error."""

    trials: int
    hits: int
    seed: int
    estimate: float = field(init=False)
    stderr: float = field(init=False)

    def __post_init__(self) -> None:
        est = self.hits / self.trials
        object.__setattr__(self, "estimate", est)
        object.__setattr__(
            self, "stderr", math.sqrt(est * (1.0 - est) / self.trials)
        )


def _patterns(s: int) -> list[tuple[int, ...]]:
    """All nonzero patterns of {0,1}^s in ascending lexicographic order."""
    return list(itertools.product((0, 1), repeat=s))[1:]


def enumerate_types(s: int, N: int, w: int, k: int) -> Iterator[TypeDistribution]:
    """Yield every composition {n(a)} with n(0) = N - k and all s column
    marginals equal to w, in lexicographic order of the count vector over
    the nonzero patterns (patterns themselves ordered lexicographically).

    An infeasible (s, N, w, k) yields nothing; it is not an error.
    """
    if s < 1 or s > MAX_ENUM_S:
        raise DomainError(f"enumerate_types: s={s} outside [1, {MAX_ENUM_S}]")
    if N < 1 or not 0 <= w <= N:
        raise DomainError(f"enumerate_types: bad N={N}, w={w}")
    if k < w or k > min(N, s * w):
        return
    pats = _patterns(s)
    n_pats = len(pats)
    weights = [sum(p) for p in pats]
    # suffix aggregates for pruning
    suf_min = [0] * (n_pats + 1)
    suf_max = [0] * (n_pats + 1)
    suf_cover = [0] * (n_pats + 1)  # bitmask of coordinates touched by suffix
    for i in range(n_pats - 1, -1, -1):
        suf_min[i] = min(weights[i:])
        suf_max[i] = max(weights[i:])
        mask = 0
        for j, bit in enumerate(pats[i]):
            if bit:
                mask |= 1 << j
        suf_cover[i] = suf_cover[i + 1] | mask

    counts = [0] * n_pats
    marg = [w] * s

    def feasible(idx: int, rem: int) -> bool:
        # every still-required marginal must be reachable by the suffix
        total_marg = 0
        for i in range(s):
            m = marg[i]
            if m < 0 or m > rem:
                return False
            if m > 0 and not suf_cover[idx] >> i & 1:
                return False
            total_marg += m
        return suf_min[idx] * rem <= total_marg <= suf_max[idx] * rem

    def rec(idx: int, rem: int) -> Iterator[TypeDistribution]:
        if idx == n_pats - 1:
            pat = pats[idx]
            if all(marg[i] == rem * pat[i] for i in range(s)):
                counts[idx] = rem
                full = {(0,) * s: N - k}
                full.update({pats[i]: counts[i] for i in range(n_pats)})
                yield TypeDistribution(s=s, N=N, counts=full)
                counts[idx] = 0
            return
        pat = pats[idx]
        bits = [i for i in range(s) if pat[i]]
        hi = min([rem] + [marg[i] for i in bits])
        for n in range(hi + 1):
            counts[idx] = n
            for i in bits:
                marg[i] -= n
            if feasible(idx + 1, rem - n):
                yield from rec(idx + 1, rem - n)
            for i in bits:
                marg[i] += n
        counts[idx] = 0

    yield from rec(0, k)


def union_size_pmf(
    s: int, N: int, w: int, n_budget: Mapping[int, int] | None = None
) -> UnionSizePmf:
    """Exact distribution of |union of s random weight-w columns|.

    Computed from the type enumeration: p_k is the log-sum-exp of the
    multinomial weights of all types with n(0) = N - k, divided by
    C(N, w)^s.  Raises EnumerationBudgetError past the configured N budget.
    """
    if s < 1 or s > MAX_ENUM_S:
        raise DomainError(f"union_size_pmf: s={s} outside [1, {MAX_ENUM_S}]")
    if not 1 <= w <= N - 1:
        raise DomainError(f"union_size_pmf: w={w} outside [1, N-1]")
    budget = (n_budget or DEFAULT_N_BUDGET).get(s, 0)
    if N > budget:
        raise EnumerationBudgetError(
            f"union_size_pmf: N={N} exceeds enumeration budget {budget} for s={s}"
        )
    if s == 1:
        return UnionSizePmf(s=1, N=N, w=w, p={w: 1.0})
    log_norm = s * _log_choose(N, w)
    probs: dict[int, float] = {}
    for k in range(w, min(N, s * w) + 1):
        logs = [td.log_multinomial() for td in enumerate_types(s, N, w, k)]
        if logs:
            m = max(logs)
            probs[k] = math.exp(m - log_norm) * math.fsum(
                math.exp(v - m) for v in logs
            )
    total = math.fsum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise ArithmeticError(f"union_size_pmf: mass {total!r} != 1")
    return UnionSizePmf(s=s, N=N, w=w, p=probs)


def cover_prob(N: int, w: int, k: int) -> float:
    """C(k, w) / C(N, w): chance a fresh weight-w column lies in a k-set."""
    if not 0 <= w <= k <= N:
        raise DomainError(f"cover_prob: need 0 <= w <= k <= N, got {(N, w, k)}")
    return math.exp(_log_choose(k, w) - _log_choose(N, w))


def _log_binom_tail_ge(n: int, log_p: float, L: int) -> float:
    """ln P(Binomial(n, p) >= L) with p given as ln(p).

    Stable in the deep-tail regime n*p << 1 where the mass is concentrated
    at j = L; in the bulk regime it is computed as 1 - lower tail.
    """
    if L <= 0:
        return 0.0
    if n < L or log_p == float("-inf"):
        return float("-inf")
    if log_p >= 0.0:
        return 0.0  # p == 1
    p = math.exp(log_p)
    log_1mp = math.log1p(-p)

    def log_term(j: int) -> float:
        return _log_choose(n, j) + j * log_p + (n - j) * log_1mp

    if L > n * p:
        # terms decrease monotonically from j = L on; sum until negligible
        total = log_term(L)
        for j in range(L + 1, n + 1):
            lt = log_term(j)
            hi, lo = (total, lt) if total >= lt else (lt, total)
            total = hi + math.log1p(math.exp(lo - hi))
            if lt < total - 45.0:
                break
        return min(total, 0.0)
    # bulk: the complement (j < L) has at most L moderate terms
    acc = 0.0
    for j in range(L):
        acc += math.exp(log_term(j))
    if acc >= 1.0:
        return float("-inf")
    return math.log1p(-acc)


def binomial_tail_ge(n: int, p: float, L: int) -> float:
    """P(Binomial(n, p) >= L), exact up to float rounding."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"binomial_tail_ge: p={p!r} outside [0, 1]")
    if p == 0.0:
        return 1.0 if L <= 0 else 0.0
    return math.exp(_log_binom_tail_ge(n, math.log(p), L))


def _bad_prob_terms(s: int, L: int, spec: EnsembleSpec) -> list[tuple[float, float]]:
    """(ln p_k, ln cover-prob) pairs over the union-size support."""
    pmf = union_size_pmf(s, spec.N, spec.w)
    log_cnw = _log_choose(spec.N, spec.w)
    return [
        (math.log(pk), _log_choose(k, spec.w) - log_cnw)
        for k, pk in pmf.p.items()
        if pk > 0.0
    ]


def exact_bad_prob_log2(s: int, L: int, spec: EnsembleSpec) -> float:
    """log2 of exact_bad_prob; -inf when the event is impossible."""
    if spec.t - s < L:
        return float("-inf")
    n_other = spec.t - s
    logs = [
        lp + _log_binom_tail_ge(n_other, lcov, L)
        for lp, lcov in _bad_prob_terms(s, L, spec)
    ]
    logs = [v for v in logs if v > float("-inf")]
    if not logs:
        return float("-inf")
    m = max(logs)
    return (m + math.log(math.fsum(math.exp(v - m) for v in logs))) / math.log(2.0)


def exact_bad_prob(s: int, L: int, spec: EnsembleSpec) -> float:
    """Exact ensemble probability that s random columns form a bad subset.

    Total-probability decomposition over the union size k, with the exact
    conditional tail P(Binomial(t-s, C(k,w)/C(N,w)) >= L): given the union
    support, the other t - s columns are covered independently, and any L
    covered columns witness badness.  Returns 0 when t - s < L.
    """
    v = exact_bad_prob_log2(s, L, spec)
    return 0.0 if v == float("-inf") else 2.0**v


def union_bound_bad_prob(s: int, L: int, spec: EnsembleSpec) -> float:
    """Union-bound counterpart sum_k p_k * min(1, C(t-s, L) cover^L).

    An upper bound on exact_bad_prob; asymptotically tight.
    """
    if spec.t - s < L:
        return 0.0
    log_comb = _log_choose(spec.t - s, L)
    total = 0.0
    for lp, lcov in _bad_prob_terms(s, L, spec):
        total += math.exp(lp + min(0.0, log_comb + L * lcov))
    return min(total, 1.0)


def lemma1_constant(s: int, L: int) -> float:
    """Explicit constant D(s, L) = min(D1, D2, 1/2) of the two-sided
    tightness bound for the union-bound form: with c = 1.5^(1/L) - 1,
    D1 = (c / (s+L+1))^L / 2 and D2 = (c / (s+L))^L.
    """
    c = 1.5 ** (1.0 / L) - 1.0
    d1 = 0.5 * (c / (s + L + 1)) ** L
    d2 = (c / (s + L)) ** L
    return min(d1, d2, 0.5)


def lemma1_lower_bad_prob(s: int, L: int, spec: EnsembleSpec) -> float:
    """Lower bound D(s, L) * union_bound_bad_prob on the exact probability."""
    return lemma1_constant(s, L) * union_bound_bad_prob(s, L, spec)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    # Philox is counter-based: jumped(i) gives independent per-stream states.
    bitgen = np.random.Philox(key=seed)
    if stream:
        bitgen = bitgen.jumped(stream)
    return np.random.Generator(bitgen)


def _sample_supports(rng: np.random.Generator, N: int, w: int, count: int) -> np.ndarray:
    """(count, w) row indices of i.i.d. uniform weight-w columns.

    Vectorized partial Fisher-Yates: w swap rounds across all rows at once.
    """
    arr = np.tile(np.arange(N, dtype=np.int64), (count, 1))
    rows = np.arange(count)
    for i in range(w):
        js = rng.integers(i, N, size=count)
        tmp = arr[rows, js].copy()
        arr[rows, js] = arr[rows, i]
        arr[rows, i] = tmp
    return arr[:, :w]


def sample_code(
    spec: EnsembleSpec,
    columns: int | None = None,
    rng: np.random.Generator | None = None,
) -> BinaryCode:
    """Draw a code from the ensemble: i.i.d. uniform weight-w columns.

    Deterministic for a given spec.seed; `columns` overrides spec.t when only
    a prefix of the code is needed.
    """
    t = spec.t if columns is None else int(columns)
    if t < 1:
        raise DomainError(f"sample_code: columns={t} must be >= 1")
    gen = rng if rng is not None else _make_rng(spec.seed)
    supports = _sample_supports(gen, spec.N, spec.w, t)
    cols = []
    for j in range(t):
        col = 0
        for idx in supports[j]:
            col |= 1 << int(idx)
        cols.append(col)
    return BinaryCode.from_columns(spec.N, cols, constant_weight=spec.w)


_MC_CHUNK = 2048


def monte_carlo_bad_prob(
    s: int,
    L: int,
    spec: EnsembleSpec,
    trials: int,
    streams: int = 1,
) -> MonteCarloEstimate:
    """Estimate exact_bad_prob by simulation.

    Per trial: draw s columns, form their union, then draw further columns
    and count how many are covered; the trial is a hit once L are.  Columns
    beyond the first L covered are never drawn - the hit indicator is already
    decided and the undrawn columns marginalize out, so the estimate is
    unbiased.  Trials are split over `streams` independent Philox streams
    and hit counts summed, so the result depends only on
    (seed, trials, streams), not on execution order.
    """
    if trials < 1:
        raise DomainError(f"monte_carlo_bad_prob: trials={trials} must be >= 1")
    if streams < 1 or streams > trials:
        raise DomainError(f"monte_carlo_bad_prob: bad streams={streams}")
    if spec.t < s:
        raise DomainError(f"monte_carlo_bad_prob: t={spec.t} < s={s}")
    n_other = spec.t - s
    if n_other < L:
        return MonteCarloEstimate(trials=trials, hits=0, seed=spec.seed)

    per = [trials // streams] * streams
    for i in range(trials % streams):
        per[i] += 1

    total_hits = 0
    for stream_idx, n_trials in enumerate(per):
        rng = _make_rng(spec.seed, stream_idx)
        done = 0
        while done < n_trials:
            batch = min(_MC_CHUNK, n_trials - done)
            sup = _sample_supports(rng, spec.N, spec.w, batch * s)
            sup = sup.reshape(batch, s, spec.w)
            union = np.zeros((batch, spec.N), dtype=bool)
            for i in range(s):
                rows = np.repeat(np.arange(batch), spec.w)
                union[rows, sup[:, i, :].ravel()] = True
            counts = np.zeros(batch, dtype=np.int64)
            active = np.arange(batch)
            for _ in range(n_other):
                if active.size == 0:
                    break
                draw = _sample_supports(rng, spec.N, spec.w, active.size)
                covered = union[active[:, None], draw].all(axis=1)
                counts[active] += covered
                active = active[counts[active] < L]
            total_hits += int((counts >= L).sum())
            done += batch
    return MonteCarloEstimate(trials=trials, hits=total_hits, seed=spec.seed)


@dataclass(frozen=True)
class EmpiricalExponent:
    """Per-length exact exponents and their fitted asymptotic slope."""

    s: int
    L: int
    R: float
    Q: float
    points: tuple[tuple[int, int, float], ...]  # (N, t, -log2(prob)/N)
    slope: float
    intercept: float
    residuals: tuple[float, ...]


def empirical_exponent(
    s: int,
    L: int,
    R: float,
    Q: float,
    N_list: Sequence[int],
    use_floor_t: bool = False,
) -> EmpiricalExponent:
    """Exact finite-N exponents -log2(bad prob)/N over N_list and the slope
    of -log2(bad prob) regressed on N, which estimates the asymptotic
    exponent (the intercept absorbs the polynomial prefactor).

    Code size is t = ceil(2^(R*N)); pass use_floor_t=True for floor.
    """
    if not N_list:
        raise DomainError("empirical_exponent: empty N_list")
    points = []
    for N in N_list:
        scale = 2.0 ** (R * N)
        t = math.floor(scale) if use_floor_t else math.ceil(scale)
        if t - s < L:
            raise DomainError(
                f"empirical_exponent: N={N} gives t={t} < s+L={s + L}"
            )
        spec = EnsembleSpec(N=N, t=t, Q=Q)
        log2_prob = exact_bad_prob_log2(s, L, spec)
        points.append((N, t, -log2_prob / N))
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[0] * p[2] for p in points], dtype=float)  # -log2(prob)
    slope, intercept = np.polyfit(xs, ys, 1)
    residuals = tuple(float(y - (slope * x + intercept)) for x, y in zip(xs, ys))
    return EmpiricalExponent(
        s=s,
        L=L,
        R=R,
        Q=Q,
        points=tuple(points),
        slope=float(slope),
        intercept=float(intercept),
        residuals=residuals,
    )
