"""Quantifier-free linear integer arithmetic: syntax, evaluation, priming,
integer-tight DNF and the s-expression concrete syntax.

Terms are kept in a canonical form (sorted variables, no zero coefficients)
so that structural equality of formulas is meaningful.  All arithmetic uses
Python integers, so evaluation never overflows.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Union

import numpy as np

from .sexpr import SExprSyntaxError, SList, Token, read_one

__all__ = [
    "LinTerm", "Atom", "Not", "And", "Or", "Const", "TRUE", "FALSE", "Formula",
    "Ineq", "Cube", "Dnf", "RELATIONS",
    "var", "const", "term", "atom", "conj", "disj", "neg", "implies",
    "evaluate", "evaluate_batch", "free_vars", "rename", "prime", "unprime",
    "to_tight_dnf", "iter_tight_dnf", "cube_sat",
    "parse_formula", "parse_term", "print_formula", "print_term",
    "FormulaError", "UnboundVariable", "AlreadyPrimed", "CapExceeded",
    "FormulaSyntaxError", "UnknownVariable", "NonlinearTerm",
]


class FormulaError(Exception):
    pass


class UnboundVariable(FormulaError, KeyError):
    def __str__(self):
        return f"unbound variable {self.args[0]!r}"


class AlreadyPrimed(FormulaError):
    pass


class CapExceeded(FormulaError):
    pass


class FormulaSyntaxError(SExprSyntaxError, FormulaError):
    pass


class UnknownVariable(FormulaSyntaxError):
    pass


class NonlinearTerm(FormulaSyntaxError):
    pass


PRIME = "'"


# --------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class LinTerm:
    """A linear term ``sum(c * v for v, c in coeffs) + constant``.

    ``coeffs`` is a tuple of ``(name, coefficient)`` pairs sorted by name with
    no zero coefficients; build instances with :meth:`of` rather than directly.
    """

    coeffs: tuple[tuple[str, int], ...] = ()
    constant: int = 0

    @classmethod
    def of(cls, coeffs: Mapping[str, int] | Iterable[tuple[str, int]] = (), constant: int = 0) -> "LinTerm":
        acc: dict[str, int] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for name, c in items:
            acc[name] = acc.get(name, 0) + int(c)
        return cls(tuple(sorted((v, c) for v, c in acc.items() if c != 0)), int(constant))

    def as_dict(self) -> dict[str, int]:
        return dict(self.coeffs)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.coeffs)

    def is_constant(self) -> bool:
        return not self.coeffs

    def evaluate(self, sigma: Mapping[str, int]) -> int:
        total = self.constant
        for v, c in self.coeffs:
            try:
                total += c * sigma[v]
            except KeyError:
                raise UnboundVariable(v) from None
        return total

    def rename(self, f: Callable[[str], str]) -> "LinTerm":
        return LinTerm.of(((f(v), c) for v, c in self.coeffs), self.constant)

    def __add__(self, other) -> "LinTerm":
        other = term(other)
        return LinTerm.of(self.coeffs + other.coeffs, self.constant + other.constant)

    __radd__ = __add__

    def __neg__(self) -> "LinTerm":
        return LinTerm(tuple((v, -c) for v, c in self.coeffs), -self.constant)

    def __sub__(self, other) -> "LinTerm":
        return self + (-term(other))

    def __rsub__(self, other) -> "LinTerm":
        return term(other) - self

    def __mul__(self, k: int) -> "LinTerm":
        if not isinstance(k, int):
            return NotImplemented
        return LinTerm.of(((v, c * k) for v, c in self.coeffs), self.constant * k)

    __rmul__ = __mul__

    def __str__(self) -> str:
        return print_term(self)


def var(name: str) -> LinTerm:
    return LinTerm(((name, 1),), 0)


def const(value: int) -> LinTerm:
    return LinTerm((), int(value))


def term(x: Union[LinTerm, int, str]) -> LinTerm:
    """Coerce an int (constant) or str (variable name) to a :class:`LinTerm`."""
    if isinstance(x, LinTerm):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not terms")
    if isinstance(x, int):
        return const(x)
    if isinstance(x, str):
        return var(x)
    raise TypeError(f"cannot make a term from {x!r}")


# --------------------------------------------------------------------------
# formulas

RELATIONS = ("<=", "<", "=", ">=", ">", "!=")
_NEGATED_REL = {"<=": ">", "<": ">=", "=": "!=", ">=": "<", ">": "<=", "!=": "="}


@dataclass(frozen=True)
class Atom:
    lhs: LinTerm
    rel: str
    rhs: LinTerm

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Const:
    value: bool


TRUE = Const(True)
FALSE = Const(False)

Formula = Union[Atom, Not, And, Or, Const]


def atom(lhs, rel: str, rhs) -> Atom:
    return Atom(term(lhs), rel, term(rhs))


def conj(*args: Formula) -> Formula:
    """n-ary conjunction; empty is TRUE, a single argument is returned as is."""
    if len(args) == 1 and not isinstance(args[0], (Atom, Not, And, Or, Const)):
        args = tuple(args[0])
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return And(tuple(args))


def disj(*args: Formula) -> Formula:
    """n-ary disjunction; empty is FALSE, a single argument is returned as is."""
    if len(args) == 1 and not isinstance(args[0], (Atom, Not, And, Or, Const)):
        args = tuple(args[0])
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Or(tuple(args))


def neg(phi: Formula) -> Formula:
    return Not(phi)


def implies(a: Formula, b: Formula) -> Formula:
    return Or((Not(a), b))


def _holds(diff: int, rel: str) -> bool:
    if rel == "<=":
        return diff <= 0
    if rel == "<":
        return diff < 0
    if rel == "=":
        return diff == 0
    if rel == ">=":
        return diff >= 0
    if rel == ">":
        return diff > 0
    return diff != 0


def evaluate(phi: Formula, sigma: Mapping[str, int]) -> bool:
    """Truth value of ``phi`` under the integer assignment ``sigma``."""
    if isinstance(phi, Atom):
        return _holds(phi.lhs.evaluate(sigma) - phi.rhs.evaluate(sigma), phi.rel)
    if isinstance(phi, And):
        return all(evaluate(a, sigma) for a in phi.args)
    if isinstance(phi, Or):
        return any(evaluate(a, sigma) for a in phi.args)
    if isinstance(phi, Not):
        return not evaluate(phi.arg, sigma)
    if isinstance(phi, Const):
        return phi.value
    raise TypeError(f"not a formula: {phi!r}")


_BATCH_LIMIT = 2 ** 62


def _batch_term(t: LinTerm, columns: Mapping[str, np.ndarray], size: int) -> np.ndarray:
    out = np.full(size, t.constant, dtype=np.int64)
    for v, c in t.coeffs:
        try:
            out = out + c * columns[v]
        except KeyError:
            raise UnboundVariable(v) from None
    return out


def evaluate_batch(phi: Formula, columns: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorised :func:`evaluate` over equally long int64 columns.

    Intended for bounded boxes; raises OverflowError when int64 could wrap.
    """
    cols = {k: np.asarray(v, dtype=np.int64) for k, v in columns.items()}
    size = len(next(iter(cols.values()))) if cols else 1
    peak = max((int(np.abs(c).max()) for c in cols.values() if len(c)), default=0)
    _check_batch_range(phi, peak)
    return _batch(phi, cols, size)


def _check_batch_range(phi: Formula, peak: int) -> None:
    for a in _atoms(phi):
        for t in (a.lhs, a.rhs):
            bound = abs(t.constant) + sum(abs(c) for _, c in t.coeffs) * peak
            if bound >= _BATCH_LIMIT // 2:
                raise OverflowError("values too large for vectorised evaluation")


def _batch(phi: Formula, cols, size: int) -> np.ndarray:
    if isinstance(phi, Atom):
        d = _batch_term(phi.lhs, cols, size) - _batch_term(phi.rhs, cols, size)
        return {
            "<=": np.less_equal, "<": np.less, "=": np.equal,
            ">=": np.greater_equal, ">": np.greater, "!=": np.not_equal,
        }[phi.rel](d, 0)
    if isinstance(phi, And):
        out = np.ones(size, dtype=bool)
        for a in phi.args:
            out &= _batch(a, cols, size)
            if not out.any():
                break
        return out
    if isinstance(phi, Or):
        out = np.zeros(size, dtype=bool)
        for a in phi.args:
            out |= _batch(a, cols, size)
            if out.all():
                break
        return out
    if isinstance(phi, Not):
        return ~_batch(phi.arg, cols, size)
    if isinstance(phi, Const):
        return np.full(size, phi.value, dtype=bool)
    raise TypeError(f"not a formula: {phi!r}")


def _atoms(phi: Formula) -> Iterator[Atom]:
    stack = [phi]
    while stack:
        f = stack.pop()
        if isinstance(f, Atom):
            yield f
        elif isinstance(f, Not):
            stack.append(f.arg)
        elif isinstance(f, (And, Or)):
            stack.extend(f.args)


def free_vars(phi: Formula) -> frozenset[str]:
    names: set[str] = set()
    for a in _atoms(phi):
        names |= a.lhs.variables | a.rhs.variables
    return frozenset(names)


def rename(phi: Formula, f: Callable[[str], str]) -> Formula:
    if isinstance(phi, Atom):
        return Atom(phi.lhs.rename(f), phi.rel, phi.rhs.rename(f))
    if isinstance(phi, Not):
        return Not(rename(phi.arg, f))
    if isinstance(phi, And):
        return And(tuple(rename(a, f) for a in phi.args))
    if isinstance(phi, Or):
        return Or(tuple(rename(a, f) for a in phi.args))
    return phi


def prime(phi: Formula) -> Formula:
    """Rename every variable ``v`` to ``v'``."""
    primed = sorted(v for v in free_vars(phi) if v.endswith(PRIME))
    if primed:
        raise AlreadyPrimed(f"formula already mentions primed variable(s): {', '.join(primed)}")
    return rename(phi, lambda v: v + PRIME)


def unprime(phi: Formula) -> Formula:
    return rename(phi, lambda v: v[:-1] if v.endswith(PRIME) else v)


# --------------------------------------------------------------------------
# integer-tight DNF


@dataclass(frozen=True, order=True)
class Ineq:
    """Canonical inequality ``sum(c * v) <= bound`` with gcd-reduced coefficients."""

    coeffs: tuple[tuple[str, int], ...]
    bound: int

    @staticmethod
    def make(t: LinTerm, bound: int) -> "Ineq | bool":
        """Canonicalise ``t <= bound``; constant inequalities fold to a bool."""
        bound = bound - t.constant
        if not t.coeffs:
            return 0 <= bound
        g = 0
        for _, c in t.coeffs:
            g = math.gcd(g, c)
        return Ineq(tuple((v, c // g) for v, c in t.coeffs), bound // g)

    def holds(self, sigma: Mapping[str, int]) -> bool:
        total = 0
        for v, c in self.coeffs:
            try:
                total += c * sigma[v]
            except KeyError:
                raise UnboundVariable(v) from None
        return total <= self.bound

    def to_atom(self) -> Atom:
        return Atom(LinTerm(self.coeffs, 0), "<=", const(self.bound))

    def __str__(self) -> str:
        return f"{print_term(LinTerm(self.coeffs, 0))} <= {self.bound}"


@dataclass(frozen=True)
class Cube:
    """Negation-free conjunction of canonical inequalities (a convex set)."""

    atoms: tuple[Ineq, ...] = ()

    def sat(self, sigma: Mapping[str, int]) -> bool:
        return all(a.holds(sigma) for a in self.atoms)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v for a in self.atoms for v, _ in a.coeffs)

    def to_formula(self) -> Formula:
        return conj(*(a.to_atom() for a in self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    def __str__(self) -> str:
        return "{" + ", ".join(map(str, self.atoms)) + "}"


@dataclass(frozen=True)
class Dnf:
    cubes: tuple[Cube, ...]

    @property
    def r(self) -> int:
        return len(self.cubes)

    def sat(self, sigma: Mapping[str, int]) -> bool:
        return any(c.sat(sigma) for c in self.cubes)

    def to_formula(self) -> Formula:
        return disj(*(c.to_formula() for c in self.cubes))

    def __iter__(self):
        return iter(self.cubes)

    def __len__(self) -> int:
        return len(self.cubes)


def cube_sat(c: Cube, sigma: Mapping[str, int]) -> bool:
    return c.sat(sigma)


def _atom_alternatives(a: Atom, positive: bool) -> list[list["Ineq | bool"]]:
    """Tight rewriting of a literal into a disjunction of conjunctions of ``<=``."""
    rel = a.rel if positive else _NEGATED_REL[a.rel]
    d = a.lhs - a.rhs  # literal is `d rel 0`
    if rel == "<=":
        return [[Ineq.make(d, 0)]]
    if rel == "<":
        return [[Ineq.make(d, -1)]]
    if rel == ">=":
        return [[Ineq.make(-d, 0)]]
    if rel == ">":
        return [[Ineq.make(-d, -1)]]
    if rel == "=":
        return [[Ineq.make(d, 0), Ineq.make(-d, 0)]]
    return [[Ineq.make(d, -1)], [Ineq.make(-d, -1)]]


_Conj = tuple  # ordered, duplicate-free tuple of Ineq


def _merge(a: _Conj, b: _Conj) -> _Conj:
    if not a:
        return b
    seen = set(a)
    return a + tuple(x for x in b if x not in seen)


def _dnf(phi: Formula, positive: bool) -> Iterator[_Conj]:
    if isinstance(phi, Const):
        if phi.value == positive:
            yield ()
        return
    if isinstance(phi, Not):
        yield from _dnf(phi.arg, not positive)
        return
    if isinstance(phi, Atom):
        for alt in _atom_alternatives(phi, positive):
            if False in alt:
                continue
            yield tuple(dict.fromkeys(x for x in alt if x is not True))
        return
    if isinstance(phi, (And, Or)):
        conjunctive = isinstance(phi, And) == positive
        if not conjunctive:
            for arg in phi.args:
                yield from _dnf(arg, positive)
            return
        yield from _product(phi.args, positive)
        return
    raise TypeError(f"not a formula: {phi!r}")


def _product(args: tuple, positive: bool) -> Iterator[_Conj]:
    if not args:
        yield ()
        return
    head = list(_dnf(args[0], positive))
    if not head:
        return
    for rest in _product(args[1:], positive):
        for h in head:
            yield _merge(h, rest)


def iter_tight_dnf(phi: Formula) -> Iterator[Cube]:
    """Lazily yield the cubes of :func:`to_tight_dnf` (duplicates included)."""
    for c in _dnf(phi, True):
        yield Cube(c)


def to_tight_dnf(phi: Formula, cap: int | None = 100_000) -> Dnf:
    """Equivalent DNF over the integers whose cubes hold only ``<=`` atoms.

    Strict inequalities are tightened by one, equalities become two
    inequalities and disequalities split into two cubes.  Duplicate cubes are
    dropped.  ``false`` has the empty DNF (``r == 0``).
    """
    cubes: dict[Cube, None] = {}
    for c in iter_tight_dnf(phi):
        cubes[c] = None
        if cap is not None and len(cubes) > cap:
            raise CapExceeded(f"DNF exceeds {cap} cubes")
    return Dnf(tuple(cubes))


# --------------------------------------------------------------------------
# concrete syntax

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.']*\Z")
_INT = re.compile(r"-?[0-9]+\Z")
_REL_OPS = {"<=", "<", "=", ">=", ">", "!=", "distinct"}


def _symbol(tok: Token, declared) -> str:
    name = tok.value
    if name.startswith("|") and name.endswith("|") and len(name) > 2:
        name = name[1:-1]
    elif not _IDENT.match(name):
        raise FormulaSyntaxError(f"bad identifier {name!r}", tok.pos)
    if declared is not None and name not in declared:
        raise UnknownVariable(f"unknown variable {name!r}", tok.pos)
    return name


def _to_term(node, declared) -> LinTerm:
    if isinstance(node, Token):
        if _INT.match(node.value):
            return const(int(node.value))
        if node.value in ("true", "false"):
            raise FormulaSyntaxError(f"expected a term, got {node.value}", node.pos)
        return var(_symbol(node, declared))
    if not node.items or not isinstance(node[0], Token):
        raise FormulaSyntaxError("expected an operator", node.pos)
    op = node[0].value
    args = [_to_term(x, declared) for x in node.items[1:]]
    if op == "+":
        out = const(0)
        for a in args:
            out = out + a
        return out
    if op == "-":
        if not args:
            raise FormulaSyntaxError("'-' needs an argument", node.pos)
        if len(args) == 1:
            return -args[0]
        out = args[0]
        for a in args[1:]:
            out = out - a
        return out
    if op == "*":
        if not args:
            raise FormulaSyntaxError("'*' needs an argument", node.pos)
        nonconst = [a for a in args if not a.is_constant()]
        if len(nonconst) > 1:
            raise NonlinearTerm("product of two non-constant terms", node.pos)
        k = 1
        for a in args:
            if a.is_constant():
                k *= a.constant
        return (nonconst[0] if nonconst else const(1)) * k
    raise FormulaSyntaxError(f"unknown term operator {op!r}", node[0].pos)


def _to_formula(node, declared) -> Formula:
    if isinstance(node, Token):
        if node.value == "true":
            return TRUE
        if node.value == "false":
            return FALSE
        raise FormulaSyntaxError(f"expected a formula, got {node.value!r}", node.pos)
    if not node.items or not isinstance(node[0], Token):
        raise FormulaSyntaxError("expected an operator", node.pos)
    op = node[0].value
    rest = node.items[1:]
    if op == "and":
        return TRUE if not rest else And(tuple(_to_formula(x, declared) for x in rest))
    if op == "or":
        return FALSE if not rest else Or(tuple(_to_formula(x, declared) for x in rest))
    if op == "not":
        if len(rest) != 1:
            raise FormulaSyntaxError("'not' takes one argument", node.pos)
        return Not(_to_formula(rest[0], declared))
    if op == "=>":
        if len(rest) != 2:
            raise FormulaSyntaxError("'=>' takes two arguments", node.pos)
        return implies(_to_formula(rest[0], declared), _to_formula(rest[1], declared))
    if op in _REL_OPS:
        if len(rest) != 2:
            raise FormulaSyntaxError(f"'{op}' takes two arguments", node.pos)
        rel = "!=" if op == "distinct" else op
        return Atom(_to_term(rest[0], declared), rel, _to_term(rest[1], declared))
    raise FormulaSyntaxError(f"unknown operator {op!r}", node[0].pos)


def parse_formula(text: str, variables: Iterable[str] | None = None) -> Formula:
    """Parse the s-expression syntax.

    >>> parse_formula("(> x 0)")
    Atom(lhs=LinTerm(coeffs=(('x', 1),), constant=0), rel='>', rhs=LinTerm(coeffs=(), constant=0))

    If ``variables`` is given, identifiers outside it raise UnknownVariable.
    """
    declared = None if variables is None else frozenset(variables)
    try:
        node = read_one(text)
        return _to_formula(node, declared)
    except SExprSyntaxError as e:
        if isinstance(e, FormulaSyntaxError) and e.text is None:
            raise type(e)(str(e), e.pos, text) from None
        if not isinstance(e, FormulaSyntaxError):
            raise FormulaSyntaxError(str(e).split(" (line")[0], e.pos, text) from None
        raise


def parse_term(text: str, variables: Iterable[str] | None = None) -> LinTerm:
    declared = None if variables is None else frozenset(variables)
    return _to_term(read_one(text), declared)


def _plain(name: str) -> str:
    return name


def smt_symbol(name: str) -> str:
    """SMT-LIB rendering of a variable name (primes need quoting)."""
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", name):
        return name
    return f"|{name}|"


def _int(k: int) -> str:
    return str(k) if k >= 0 else f"(- {-k})"


def print_term(t: LinTerm, symbol: Callable[[str], str] = _plain) -> str:
    parts = []
    for v, c in t.coeffs:
        s = symbol(v)
        if c == 1:
            parts.append(s)
        elif c == -1:
            parts.append(f"(- {s})")
        else:
            parts.append(f"(* {_int(c)} {s})")
    if t.constant or not parts:
        parts.append(_int(t.constant))
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def print_formula(phi: Formula, smtlib: bool = False) -> str:
    """Render ``phi`` in the s-expression syntax.

    With ``smtlib=True`` the output is valid SMT-LIB2 (quoted primed names,
    ``!=`` as ``distinct``, empty connectives folded to constants).
    """
    symbol = smt_symbol if smtlib else _plain
    out: list[str] = []

    def go(f: Formula) -> None:
        if isinstance(f, Atom):
            rel = "distinct" if (smtlib and f.rel == "!=") else f.rel
            out.append(f"({rel} {print_term(f.lhs, symbol)} {print_term(f.rhs, symbol)})")
        elif isinstance(f, Const):
            out.append("true" if f.value else "false")
        elif isinstance(f, Not):
            out.append("(not ")
            go(f.arg)
            out.append(")")
        else:
            op = "and" if isinstance(f, And) else "or"
            if not f.args:
                out.append(("true" if op == "and" else "false") if smtlib else f"({op})")
                return
            out.append(f"({op}")
            for a in f.args:
                out.append(" ")
                go(a)
            out.append(")")

    go(phi)
    return "".join(out)


def iter_box(variables: list[str], lo: int, hi: int) -> Iterator[dict[str, int]]:
    """Every assignment of ``variables`` into ``[lo, hi]`` (brute force)."""
    for values in itertools.product(range(lo, hi + 1), repeat=len(variables)):
        yield dict(zip(variables, values))
