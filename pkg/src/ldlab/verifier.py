"""Brute-force verification of explicit binary codes.

A code is an N x t bit matrix whose columns are stored as packed Python
integers (bit i = row i), so the covering test u | v == u is word-parallel.
An s-subset of columns is bad for list size L when the OR of its columns
covers at least L columns outside the subset; any L covered columns then
witness the defining condition, which is why the check is O(t) per subset
rather than a search over L-subsets.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numerics import DomainError

DEFAULT_SUBSET_BUDGET = 10_000_000


class CodeFormatError(ValueError):
    """A code file does not parse; `line` is 1-based when applicable."""

    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SubsetBudgetError(RuntimeError):
    """Exhaustive subset enumeration would exceed the configured budget."""


@dataclass(frozen=True)
class BinaryCode:
    """An N x t binary matrix with columns packed into integers."""

    N: int
    t: int
    columns: tuple[int, ...]
    weights: tuple[int, ...]
    constant_weight: int | None = None

    def __post_init__(self) -> None:
        if self.N < 1 or self.t < 1:
            raise DomainError(f"BinaryCode: bad shape N={self.N}, t={self.t}")
        if len(self.columns) != self.t or len(self.weights) != self.t:
            raise DomainError("BinaryCode: column/weight count mismatch")
        mask = (1 << self.N) - 1
        for j, col in enumerate(self.columns):
            if col < 0 or col & ~mask:
                raise DomainError(f"BinaryCode: column {j} has bits outside {self.N} rows")
            if col.bit_count() != self.weights[j]:
                raise DomainError(f"BinaryCode: stored weight of column {j} is wrong")
        if self.constant_weight is not None:
            if any(w != self.constant_weight for w in self.weights):
                raise DomainError(
                    f"BinaryCode: constant_weight={self.constant_weight} "
                    "does not match all columns"
                )

    @classmethod
    def from_columns(
        cls, N: int, columns: Iterable[int], constant_weight: int | None = None
    ) -> "BinaryCode":
        cols = tuple(int(c) for c in columns)
        weights = tuple(c.bit_count() for c in cols)
        return cls(
            N=N,
            t=len(cols),
            columns=cols,
            weights=weights,
            constant_weight=constant_weight,
        )

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> "BinaryCode":
        """Build from row strings: rows[i][j] is the bit in row i, column j."""
        N = len(rows)
        if N == 0:
            raise DomainError("BinaryCode.from_rows: no rows")
        t = len(rows[0])
        cols = [0] * t
        for i, row in enumerate(rows):
            if len(row) != t:
                raise DomainError(f"BinaryCode.from_rows: ragged row {i}")
            for j, ch in enumerate(row):
                if ch == "1":
                    cols[j] |= 1 << i
                elif ch != "0":
                    raise DomainError(f"BinaryCode.from_rows: bad character {ch!r}")
        code = cls.from_columns(N, cols)
        ws = set(code.weights)
        if len(ws) == 1:
            code = cls.from_columns(N, cols, constant_weight=ws.pop())
        return code

    def to_rows(self) -> list[str]:
        return [
            "".join("1" if self.columns[j] >> i & 1 else "0" for j in range(self.t))
            for i in range(self.N)
        ]

    def union(self, indices: Iterable[int]) -> int:
        u = 0
        for j in indices:
            u |= self.columns[j]
        return u


@dataclass(frozen=True)
class BadCountReport:
    """Counts of bad/good s-subsets of a code (exact or sampled)."""

    s: int
    L: int
    bad: int
    good: int
    total: int
    epsilon: float
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    stderr: float | None = None
    mode: str = "exact"


def _as_column(u: int | Sequence[int]) -> tuple[int, int | None]:
    """Normalize a column given as an int bitset or a 0/1 sequence."""
    if isinstance(u, int):
        return u, None
    col = 0
    for i, bit in enumerate(u):
        if bit not in (0, 1):
            raise DomainError(f"covers: non-binary entry {bit!r}")
        if bit:
            col |= 1 << i
    return col, len(u)


def covers(u: int | Sequence[int], v: int | Sequence[int]) -> bool:
    """True when u covers v, i.e. the bitwise OR of u and v equals u."""
    cu, nu = _as_column(u)
    cv, nv = _as_column(v)
    if nu is not None and nv is not None and nu != nv:
        raise DomainError(f"covers: length mismatch {nu} != {nv}")
    return cu | cv == cu


def _check_dims(code: BinaryCode, s: int, L: int) -> None:
    if s < 1 or L < 1:
        raise DomainError(f"s={s}, L={L} must be >= 1")
    if s >= code.t or s + L > code.t:
        raise DomainError(
            f"degenerate verification: need s < t and s + L <= t, "
            f"got s={s}, L={L}, t={code.t}"
        )


def is_bad_subset(
    code: BinaryCode, S: Sequence[int], L: int
) -> tuple[bool, tuple[int, ...] | None]:
    """Test whether the column subset S is bad for list size L.

    Returns (bad, witness); the witness is the lexicographically first L
    column indices outside S covered by the OR of the S columns.
    """
    s = len(S)
    if len(set(S)) != s:
        raise DomainError(f"is_bad_subset: repeated indices in {S!r}")
    _check_dims(code, s, L)
    for j in S:
        if not 0 <= j < code.t:
            raise DomainError(f"is_bad_subset: column index {j} out of range")
    u = code.union(S)
    in_S = set(S)
    covered: list[int] = []
    for j in range(code.t):
        if j in in_S:
            continue
        if u | code.columns[j] == u:
            covered.append(j)
            if len(covered) == L:
                return True, tuple(covered)
    return False, None


def count_bad(
    code: BinaryCode, s: int, L: int, budget: int = DEFAULT_SUBSET_BUDGET
) -> BadCountReport:
    """Exact bad-subset count over all C(t, s) subsets in lexicographic order."""
    _check_dims(code, s, L)
    total = math.comb(code.t, s)
    if total > budget:
        raise SubsetBudgetError(
            f"count_bad: C({code.t},{s})={total} exceeds budget {budget}; "
            "use count_bad_sampled"
        )
    bad = 0
    witness = None
    for S in itertools.combinations(range(code.t), s):
        is_bad, lam = is_bad_subset(code, S, L)
        if is_bad:
            bad += 1
            if witness is None:
                witness = (S, lam)
    return BadCountReport(
        s=s,
        L=L,
        bad=bad,
        good=total - bad,
        total=total,
        epsilon=bad / total,
        witness=witness,
    )


def count_bad_sampled(
    code: BinaryCode, s: int, L: int, samples: int, seed: int = 0
) -> BadCountReport:
    """Unbiased epsilon estimate from uniform random s-subsets (with
    replacement across draws); stderr is the binomial standard error."""
    _check_dims(code, s, L)
    if samples < 1:
        raise DomainError(f"count_bad_sampled: samples={samples} must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    bad = 0
    witness = None
    for _ in range(samples):
        S = tuple(int(v) for v in rng.choice(code.t, size=s, replace=False))
        is_bad, lam = is_bad_subset(code, S, L)
        if is_bad:
            bad += 1
            if witness is None:
                witness = (S, lam)
    eps = bad / samples
    return BadCountReport(
        s=s,
        L=L,
        bad=bad,
        good=samples - bad,
        total=samples,
        epsilon=eps,
        witness=witness,
        stderr=math.sqrt(eps * (1.0 - eps) / samples),
        mode="sampled",
    )


def is_ld_code(code: BinaryCode, s: int, L: int, epsilon: float,
               budget: int = DEFAULT_SUBSET_BUDGET) -> bool:
    """True when the bad fraction does not exceed epsilon (non-strict)."""
    if not 0.0 <= epsilon < 1.0:
        raise DomainError(f"is_ld_code: epsilon={epsilon!r} outside [0, 1)")
    return count_bad(code, s, L, budget=budget).epsilon <= epsilon


# ---------------------------------------------------------------------------
# Code file format
# ---------------------------------------------------------------------------
#
# Text form: a header line "N t", then N lines of exactly t characters from
# {0, 1} (row i of the matrix).  JSON form: {"n": N, "t": t, "rows": [...]}.


def parse_code(text: str) -> BinaryCode:
    """Parse a code from its text or JSON serialization."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _parse_code_json(text)
    return _parse_code_text(text)


def _parse_code_text(text: str) -> BinaryCode:
    lines = text.splitlines()
    if not lines:
        raise CodeFormatError("empty input", line=1)
    header = lines[0].split()
    if len(header) != 2:
        raise CodeFormatError(f"expected header 'N t', got {lines[0]!r}", line=1)
    try:
        N, t = int(header[0]), int(header[1])
    except ValueError:
        raise CodeFormatError(f"non-integer header {lines[0]!r}", line=1) from None
    if N < 1 or t < 1:
        raise CodeFormatError(f"bad dimensions N={N}, t={t}", line=1)
    body = lines[1:]
    if len(body) < N:
        raise CodeFormatError(f"expected {N} rows, found {len(body)}", line=len(lines))
    rows = []
    for i in range(N):
        row = body[i].strip()
        if len(row) != t:
            raise CodeFormatError(
                f"row has {len(row)} characters, expected {t}", line=i + 2
            )
        if set(row) - {"0", "1"}:
            raise CodeFormatError(f"non-binary characters in {row!r}", line=i + 2)
        rows.append(row)
    for i in range(N, len(body)):
        if body[i].strip():
            raise CodeFormatError("trailing non-empty line", line=i + 2)
    return BinaryCode.from_rows(rows)


def _parse_code_json(text: str) -> BinaryCode:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodeFormatError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    for key in ("n", "t", "rows"):
        if key not in obj:
            raise CodeFormatError(f"missing key {key!r}")
    N, t, rows = obj["n"], obj["t"], obj["rows"]
    if not isinstance(N, int) or not isinstance(t, int) or N < 1 or t < 1:
        raise CodeFormatError(f"bad dimensions n={N!r}, t={t!r}")
    if not isinstance(rows, list) or len(rows) != N:
        raise CodeFormatError(f"expected {N} rows, found {len(rows) if isinstance(rows, list) else type(rows).__name__}")
    for i, row in enumerate(rows):
        if not isinstance(row, str) or len(row) != t:
            raise CodeFormatError(f"row has wrong length or type", line=i + 1)
        if set(row) - {"0", "1"}:
            raise CodeFormatError(f"non-binary characters in {row!r}", line=i + 1)
    return BinaryCode.from_rows(rows)


def format_code(code: BinaryCode) -> str:
    """Serialize to the text form accepted by parse_code."""
    return "\n".join([f"{code.N} {code.t}"] + code.to_rows()) + "\n"


def format_code_json(code: BinaryCode) -> str:
    """Serialize to the JSON form accepted by parse_code."""
    return json.dumps({"n": code.N, "t": code.t, "rows": code.to_rows()})
