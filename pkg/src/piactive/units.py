"""Exact dimensional analysis over the rationals.

Units are exponent vectors over the seven SI base units. Everything here uses
:class:`fractions.Fraction`, so ``D @ U == 0`` is an identity, not a tolerance.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

BASE_SYMBOLS = ("m", "kg", "s", "A", "K", "mol", "cd")
BASE_LABELS = ("L", "M", "T", "C", "Theta", "N", "J")

Matrix = list[list[Fraction]]


class UnitsError(ValueError):
    """Base class for dimensional-analysis failures."""


class UnitParseError(UnitsError):
    def __init__(self, message: str, token: str, position: int):
        super().__init__(f"{message}: {token!r} at position {position}")
        self.token = token
        self.position = position


class DegenerateUnitSystemError(UnitsError):
    pass


class InexpressibleOutputError(UnitsError):
    pass


@dataclass(frozen=True)
class Dimension:
    exponents: tuple[Fraction, ...] = (Fraction(0),) * 7

    def __post_init__(self):
        exps = tuple(Fraction(e) for e in self.exponents)
        if len(exps) != 7:
            raise ValueError("a Dimension has exactly 7 base-unit exponents")
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def base(cls, symbol: str) -> "Dimension":
        exps = [Fraction(0)] * 7
        exps[BASE_SYMBOLS.index(symbol)] = Fraction(1)
        return cls(tuple(exps))

    def __mul__(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __truediv__(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def __pow__(self, power) -> "Dimension":
        p = Fraction(power)
        return Dimension(tuple(a * p for a in self.exponents))

    @property
    def is_unitless(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def __str__(self) -> str:
        parts = []
        for sym, e in zip(BASE_SYMBOLS, self.exponents):
            if e == 0:
                continue
            exp = _fmt_exp(e) if e.denominator == 1 else f"({_fmt_exp(e)})"
            parts.append(sym if e == 1 else f"{sym}^{exp}")
        return "*".join(parts) if parts else "1"


UNITLESS = Dimension()


# ---------------------------------------------------------------------------
# unit-expression parser

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<sym>[A-Za-z]+)|(?P<op>[*/^()+\-]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        mo = _TOKEN.match(text, pos)
        if mo is None:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise UnitParseError("unexpected character", text[start], start)
        kind = mo.lastgroup
        tokens.append((kind, mo.group(kind), mo.start(kind)))
        pos = mo.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise UnitParseError("unexpected end of expression", "", len(self.text))
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value:
            raise UnitParseError(f"expected {value!r}", tok[1], tok[2])

    def parse(self) -> Dimension:
        if not self.tokens:
            return UNITLESS
        dim = self.expr()
        tok = self.peek()
        if tok is not None:
            raise UnitParseError("unexpected token", tok[1], tok[2])
        return dim

    def expr(self) -> Dimension:
        dim = self.term()
        while (tok := self.peek()) is not None and tok[1] in "*/":
            self.take()
            rhs = self.term()
            dim = dim * rhs if tok[1] == "*" else dim / rhs
        return dim

    def term(self) -> Dimension:
        dim = self.factor()
        tok = self.peek()
        if tok is not None and tok[1] == "^":
            self.take()
            dim = dim ** self.exponent()
        return dim

    def factor(self) -> Dimension:
        kind, value, pos = self.take()
        if kind == "sym":
            if value not in BASE_SYMBOLS:
                raise UnitParseError("unknown unit symbol", value, pos)
            return Dimension.base(value)
        if kind == "num":
            if value != "1":
                raise UnitParseError("only '1' may stand as a bare number", value, pos)
            return UNITLESS
        if value == "(":
            dim = self.expr()
            self.expect(")")
            return dim
        raise UnitParseError("unexpected token", value, pos)

    def exponent(self) -> Fraction:
        tok = self.peek()
        if tok is not None and tok[1] == "(":
            self.take()
            value = self.signed_number()
            if (t := self.peek()) is not None and t[1] == "/":
                self.take()
                kind, den, pos = self.take()
                if kind != "num" or "." in den or int(den) == 0:
                    raise UnitParseError("malformed exponent denominator", den, pos)
                value /= int(den)
            self.expect(")")
            return value
        return self.signed_number()

    def signed_number(self) -> Fraction:
        kind, value, pos = self.take()
        sign = 1
        if value in "+-" and kind == "op":
            sign = -1 if value == "-" else 1
            kind, value, pos = self.take()
        if kind != "num":
            raise UnitParseError("malformed exponent", value, pos)
        return sign * Fraction(value)


def parse_unit_expression(text: str) -> Dimension:
    """Parse ``kg/(m*s)``-style unit strings into a :class:`Dimension`.

    Exponents may be signed integers or decimals (``s^-1``, ``m^0.5``) or a
    parenthesized rational (``m^(1/2)``). ``"1"`` and ``""`` are unitless.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# quantity systems


@dataclass(frozen=True)
class QuantitySpec:
    name: str
    dimension: Dimension
    role: str = "input"

    def __post_init__(self):
        if self.role not in ("input", "output"):
            raise ValueError(f"role must be 'input' or 'output', got {self.role!r}")

    @classmethod
    def parse(cls, name: str, units: str, role: str = "input") -> "QuantitySpec":
        return cls(name, parse_unit_expression(units), role)


@dataclass(frozen=True)
class DimensionMatrix:
    D: Matrix
    u: list[Fraction]
    base_unit_labels: list[str]
    input_names: list[str]
    output_name: str

    @property
    def k(self) -> int:
        return len(self.D)

    @property
    def m(self) -> int:
        return len(self.input_names)


@dataclass(frozen=True)
class PiGroupSet:
    v: list[Fraction]
    U: Matrix  # m x n, columns are the input groups
    input_names: list[str]
    output_name: str
    rendered_groups: dict[str, str] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.v)

    @property
    def n(self) -> int:
        return len(self.U[0]) if self.U else 0

    def column(self, j: int) -> list[Fraction]:
        return [row[j] for row in self.U]


def build_dimension_matrix(inputs: Sequence[QuantitySpec], output: QuantitySpec) -> DimensionMatrix:
    if len(inputs) == 0:
        raise ValueError("at least one input quantity is required")
    names = [q.name for q in inputs]
    if len(set(names)) != len(names) or output.name in names:
        raise ValueError("quantity names must be unique")

    used_by_inputs = [any(q.dimension.exponents[i] != 0 for q in inputs) for i in range(7)]
    for i in range(7):
        if output.dimension.exponents[i] != 0 and not used_by_inputs[i]:
            raise InexpressibleOutputError(
                f"output units not expressible from inputs: no input carries base unit {BASE_SYMBOLS[i]}"
            )
    rows = [i for i in range(7) if used_by_inputs[i]]
    D = [[q.dimension.exponents[i] for q in inputs] for i in rows]
    u = [output.dimension.exponents[i] for i in rows]
    if rank(D) < len(rows):
        raise DegenerateUnitSystemError(
            f"degenerate unit system: rank(D) = {rank(D)} < k = {len(rows)}"
        )
    return DimensionMatrix(D, u, [BASE_LABELS[i] for i in rows], names, output.name)


# ---------------------------------------------------------------------------
# rational linear algebra


def rref(A: Sequence[Sequence]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and pivot columns, computed exactly."""
    R = [[Fraction(x) for x in row] for row in A]
    if not R:
        return R, []
    n_rows, n_cols = len(R), len(R[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        pr = next((i for i in range(r, n_rows) if R[i][c] != 0), None)
        if pr is None:
            continue
        R[r], R[pr] = R[pr], R[r]
        p = R[r][c]
        R[r] = [x / p for x in R[r]]
        for i in range(n_rows):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
    return R, pivots


def rank(A: Sequence[Sequence]) -> int:
    return len(rref(A)[1])


def matmul(A: Sequence[Sequence], B: Sequence[Sequence]) -> Matrix:
    if not A:
        return []
    inner = len(B)
    cols = len(B[0]) if B else 0
    return [[sum((Fraction(A[i][t]) * B[t][j] for t in range(inner)), Fraction(0)) for j in range(cols)]
            for i in range(len(A))]


def matvec(A: Sequence[Sequence], x: Sequence) -> list[Fraction]:
    return [sum((Fraction(a) * b for a, b in zip(row, x)), Fraction(0)) for row in A]


def transpose(A: Sequence[Sequence]) -> Matrix:
    return [list(col) for col in zip(*A)] if A else []


def rational_nullspace(D: Sequence[Sequence], m: int | None = None) -> Matrix:
    """Nullspace basis as an ``m x n`` matrix (columns are basis vectors).

    One basis vector per free column of the RREF, with that free entry set to
    1. ``m`` is only needed when ``D`` has no rows.
    """
    if m is None:
        m = len(D[0]) if D else 0
    if not D:
        return [[Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    R, pivots = rref(D)
    free = [c for c in range(m) if c not in pivots]
    basis = []
    for f in free:
        vec = [Fraction(0)] * m
        vec[f] = Fraction(1)
        for row, p in zip(R, pivots):
            vec[p] = -row[f]
        basis.append(vec)
    if not basis:
        return [[] for _ in range(m)]
    return transpose(basis)


def solve_particular(D: Sequence[Sequence], u: Sequence, m: int | None = None) -> list[Fraction]:
    """Solve ``D v = u`` with all free variables set to zero."""
    if m is None:
        m = len(D[0]) if D else 0
    if not D:
        return [Fraction(0)] * m
    aug = [list(row) + [b] for row, b in zip(D, u)]
    R, pivots = rref(aug)
    if m in pivots:
        raise InexpressibleOutputError("output units not expressible from inputs")
    v = [Fraction(0)] * m
    for row, p in zip(R, pivots):
        v[p] = row[m]
    return v


# ---------------------------------------------------------------------------
# Pi groups


def _fmt_exp(e: Fraction) -> str:
    return str(e.numerator) if e.denominator == 1 else f"{e.numerator}/{e.denominator}"


def render_product(names: Sequence[str], exponents: Sequence[Fraction]) -> str:
    parts = []
    for name, e in zip(names, exponents):
        if e == 0:
            continue
        parts.append(name if e == 1 else f"{name}^{_fmt_exp(e)}")
    return " * ".join(parts) if parts else "1"


def pi_groups(inputs: Sequence[QuantitySpec], output: QuantitySpec) -> PiGroupSet:
    dm = build_dimension_matrix(inputs, output)
    m = dm.m
    v = solve_particular(dm.D, dm.u, m)
    U = rational_nullspace(dm.D, m)
    names = dm.input_names
    n = len(U[0]) if U else 0
    rendered = {"Pi": render_product([output.name, *names], [Fraction(1), *[-x for x in v]])}
    for j in range(n):
        rendered[f"Pi_{j + 1}"] = render_product(names, [row[j] for row in U])
    return PiGroupSet(v, U, list(names), output.name, rendered)


@dataclass
class VerificationReport:
    passed: bool
    failures: list[str]

    def __bool__(self) -> bool:
        return self.passed


def verify_pi_groups(pi: PiGroupSet, D: Sequence[Sequence], u: Sequence) -> VerificationReport:
    """Check ``D v = u``, ``D U = 0`` and ``rank(U) = n`` exactly."""
    failures = []
    Dv = matvec(D, pi.v)
    for i, (lhs, rhs) in enumerate(zip(Dv, u)):
        if lhs != rhs:
            failures.append(f"(D v)[{i}] = {lhs} != u[{i}] = {rhs}")
    n = pi.n
    if n:
        DU = matmul(D, pi.U)
        for i, row in enumerate(DU):
            for j, x in enumerate(row):
                if x != 0:
                    failures.append(f"(D U)[{i},{j}] = {x} != 0")
        r = rank(transpose(pi.U))
        if r != n:
            failures.append(f"rank(U) = {r} != n = {n}")
    expected_n = pi.m - rank(D) if D else pi.m
    if n != expected_n:
        failures.append(f"n = {n} != m - rank(D) = {expected_n}")
    return VerificationReport(not failures, failures)


def same_span(U1: Sequence[Sequence], U2: Sequence[Sequence]) -> bool:
    """Exact column-span equality of two ``m x n`` rational matrices."""
    r1 = rank(transpose(U1)) if U1 and U1[0] else 0
    r2 = rank(transpose(U2)) if U2 and U2[0] else 0
    if r1 != r2:
        return False
    joint = [list(a) + list(b) for a, b in zip(U1, U2)]
    return (rank(transpose(joint)) if joint and joint[0] else 0) == r1


# ---------------------------------------------------------------------------
# files and reports


@dataclass(frozen=True)
class QuantitySystem:
    inputs: list[QuantitySpec]
    output: QuantitySpec

    @property
    def input_names(self) -> list[str]:
        return [q.name for q in self.inputs]

    def dimension_matrix(self) -> DimensionMatrix:
        return build_dimension_matrix(self.inputs, self.output)

    def pi_groups(self) -> PiGroupSet:
        return pi_groups(self.inputs, self.output)

    @classmethod
    def from_dict(cls, data: dict) -> "QuantitySystem":
        try:
            inputs = [QuantitySpec.parse(q["name"], q["units"], "input") for q in data["inputs"]]
            out = data["output"]
            output = QuantitySpec.parse(out["name"], out["units"], "output")
        except (KeyError, TypeError) as exc:
            raise UnitsError(f"malformed quantity-system definition: {exc}") from exc
        return cls(inputs, output)

    @classmethod
    def load(cls, path: str | Path) -> "QuantitySystem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _q(x: Fraction) -> str:
    return str(x)


def pi_report(system: QuantitySystem, verify: bool = False) -> dict:
    dm = system.dimension_matrix()
    pi = system.pi_groups()
    report = {
        "inputs": [{"name": q.name, "units": str(q.dimension)} for q in system.inputs],
        "output": {"name": system.output.name, "units": str(system.output.dimension)},
        "base_units": dm.base_unit_labels,
        "k": dm.k,
        "m": dm.m,
        "n": pi.n,
        "D": [[_q(x) for x in row] for row in dm.D],
        "u": [_q(x) for x in dm.u],
        "v": [_q(x) for x in pi.v],
        "U": [[_q(x) for x in row] for row in pi.U],
        "groups": pi.rendered_groups,
    }
    if verify:
        rep = verify_pi_groups(pi, dm.D, dm.u)
        report["verification"] = {"passed": rep.passed, "failures": rep.failures}
    return report


def pi_report_text(report: dict) -> str:
    lines = [f"inputs (m = {report['m']}):"]
    lines += [f"  {q['name']:<12s} [{q['units']}]" for q in report["inputs"]]
    lines.append(f"output: {report['output']['name']} [{report['output']['units']}]")
    lines.append(f"base units (k = {report['k']}): {', '.join(report['base_units'])}")
    lines.append(f"unitless input groups: n = {report['n']}")
    for key, text in report["groups"].items():
        lines.append(f"  {key:<6s} = {text}")
    if "verification" in report:
        ver = report["verification"]
        lines.append("verification: " + ("pass" if ver["passed"] else "FAIL"))
        lines += [f"  {f}" for f in ver["failures"]]
    return "\n".join(lines) + "\n"


def dimension_of_product(dims: Iterable[Dimension], exponents: Iterable) -> Dimension:
    out = UNITLESS
    for d, e in zip(dims, exponents):
        out = out * d ** e
    return out
