"""SMT-LIB2 / HORN text generation and an external solver client.

The solver is any SMT-LIB2 process that reads a script on stdin and prints
results on stdout.  Each query runs in its own process.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
from typing import Iterable, Mapping

from .formula import Formula, Not, free_vars, print_formula, smt_symbol
from .sexpr import SExprSyntaxError, SList, Token, read_all

DEFAULT_SOLVER = "z3 -in"
SOLVER_ENV = "LIAINV_SOLVER"
DEFAULT_TIMEOUT = 10.0


class SolverError(RuntimeError):
    pass


class SolverUnavailable(SolverError):
    pass


class SolverTimeout(SolverError):
    def __init__(self, budget: float):
        self.budget = budget
        super().__init__(f"solver exceeded {budget:g} s")


class ModelParseError(SolverError):
    pass


def resolve_solver(solver: str | None = None) -> list[str]:
    """Command line for the solver: argument, then $LIAINV_SOLVER, then ``z3 -in``."""
    cmd = solver or os.environ.get(SOLVER_ENV) or DEFAULT_SOLVER
    argv = shlex.split(cmd)
    if not argv:
        raise SolverUnavailable("empty solver command")
    return argv


def solver_available(solver: str | None = None) -> bool:
    try:
        argv = resolve_solver(solver)
    except SolverUnavailable:
        return False
    return shutil.which(argv[0]) is not None or os.path.isfile(argv[0])


def _declarations(variables: Iterable[str]) -> list[str]:
    return [f"(declare-const {smt_symbol(v)} Int)" for v in variables]


def implication_query(phi: Formula, psi: Formula, variables: Iterable[str] | None = None) -> str:
    """Script whose satisfiability refutes ``phi => psi``."""
    names = sorted(set(variables or ()) | free_vars(phi) | free_vars(psi))
    lines = ["(set-option :produce-models true)", "(set-logic QF_LIA)"]
    lines += _declarations(names)
    lines.append(f"(assert {print_formula(phi, smtlib=True)})")
    lines.append(f"(assert {print_formula(Not(psi), smtlib=True)})")
    lines += ["(check-sat)", "(get-model)", "(exit)"]
    return "\n".join(lines) + "\n"


def chc_query(variables: Iterable[str], init: Formula, tr: Formula, prop: Formula,
              predicate: str = "Inv") -> str:
    """Constrained Horn clauses whose solution is an inductive invariant."""
    vs = list(variables)
    sym = [smt_symbol(v) for v in vs]
    psym = [smt_symbol(v + "'") for v in vs]
    sort = " ".join("Int" for _ in vs)
    binders = " ".join(f"({s} Int)" for s in sym)
    pbinders = " ".join(f"({s} Int)" for s in psym)
    app = f"({predicate} {' '.join(sym)})"
    papp = f"({predicate} {' '.join(psym)})"
    return "\n".join([
        "(set-logic HORN)",
        f"(declare-fun {predicate} ({sort}) Bool)",
        f"(assert (forall ({binders}) (=> {print_formula(init, smtlib=True)} {app})))",
        f"(assert (forall ({binders} {pbinders}) (=> (and {app} {print_formula(tr, smtlib=True)}) {papp})))",
        f"(assert (forall ({binders}) (=> (and {app} {print_formula(Not(prop), smtlib=True)}) false)))",
        "(check-sat)",
        "(exit)",
    ]) + "\n"


def run_solver(script: str, solver: str | None = None, timeout: float = DEFAULT_TIMEOUT) -> str:
    argv = resolve_solver(solver)
    try:
        proc = subprocess.run(argv, input=script, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError:
        raise SolverUnavailable(f"solver not found: {argv[0]}") from None
    except subprocess.TimeoutExpired:
        raise SolverTimeout(timeout) from None
    return proc.stdout


def _int_value(node) -> int:
    if isinstance(node, Token):
        return int(node.value)
    if isinstance(node, SList) and len(node) == 2 and isinstance(node[0], Token) and node[0].value == "-":
        return -_int_value(node[1])
    raise ModelParseError(f"not an integer literal: {node!r}")


def _name(tok: Token) -> str:
    v = tok.value
    return v[1:-1] if v.startswith("|") and v.endswith("|") else v


def parse_model(text: str) -> dict[str, int]:
    """Integer assignments from a ``(get-model)`` response.

    Accepts both ``(model (define-fun ...))`` and bare ``((define-fun ...))``
    layouts, and ``-5`` as well as ``(- 5)`` for negative values.
    """
    try:
        nodes = read_all(text)
    except SExprSyntaxError as e:
        raise ModelParseError(f"cannot read model: {e}") from None
    model: dict[str, int] = {}

    def walk(node):
        if not isinstance(node, SList) or not node.items:
            return
        head = node[0]
        if isinstance(head, Token) and head.value == "define-fun":
            if len(node) != 5:
                raise ModelParseError("malformed define-fun")
            name, params, sort, body = node[1], node[2], node[3], node[4]
            if len(params) == 0 and isinstance(sort, Token) and sort.value == "Int":
                try:
                    model[_name(name)] = _int_value(body)
                except ValueError:
                    raise ModelParseError(f"bad value for {_name(name)}") from None
            return
        for child in node.items:
            walk(child)

    for n in nodes:
        walk(n)
    return model


def solve_implication(phi: Formula, psi: Formula, variables: Iterable[str] | None = None,
                      solver: str | None = None, timeout: float = DEFAULT_TIMEOUT):
    """Returns ``("unsat", None)``, ``("sat", model)`` or ``("unknown", reason)``."""
    out = run_solver(implication_query(phi, psi, variables), solver, timeout)
    lines = out.strip().splitlines()
    if not lines:
        raise SolverError("solver produced no output")
    head = lines[0].strip()
    if head == "unsat":
        return "unsat", None
    if head == "sat":
        return "sat", parse_model("\n".join(lines[1:]))
    if head == "unknown":
        return "unknown", "solver returned unknown"
    raise SolverError(f"unexpected solver output: {head}")


def fill_model(model: Mapping[str, int], variables: Iterable[str]) -> dict[str, int]:
    """Solvers may omit irrelevant variables; any value works for those."""
    out = {v: 0 for v in variables}
    out.update(model)
    return out
