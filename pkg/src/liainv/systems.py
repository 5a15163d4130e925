"""Guarded-update program IR, the squaring program and its product with a
counter machine, and their QFLIA encodings.

States are plain ``dict[str, int]`` over the IR's variables.  The program
counter is an integer: 0 before the first loop, 1 in the first loop, 2 in
the second loop, 3 at the assertion.

One transition is one loop-body iteration.  The exit test of a loop is fused
with the first iteration of the next phase, so that after exactly ``t`` steps
on input ``n`` the product is in the closed-form state given by
:func:`r_t_state`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .formula import (
    Formula, LinTerm, atom, conj, disj, evaluate, evaluate_batch, implies, var,
)
from .minsky import Dec, Halt, Inc, Jz, MinskyMachine, MinskyTrace

PC_START, PC_LOOP1, PC_LOOP2, PC_END = 0, 1, 2, 3
PC_NAMES = {PC_START: "start", PC_LOOP1: "loop1", PC_LOOP2: "loop2", PC_END: "end"}

PROG_VARS = ("pc", "x", "z1", "z2", "y1", "y2")
MACHINE_VARS = ("c1", "c2", "q")
PRODUCT_VARS = PROG_VARS + MACHINE_VARS

State = dict


class Nondeterminism(RuntimeError):
    pass


@dataclass(frozen=True)
class Rule:
    name: str
    guard: Formula
    update: tuple[tuple[str, LinTerm], ...]  # unmentioned variables keep their value

    def apply(self, s: Mapping[str, int]) -> State:
        out = dict(s)
        for v, t in self.update:
            out[v] = t.evaluate(s)
        return out


def _rule(name: str, guard: Formula, **update) -> Rule:
    return Rule(name, guard, tuple((v, t if isinstance(t, LinTerm) else LinTerm.of({}, t))
                                   for v, t in update.items()))


@dataclass(frozen=True)
class ProgramIR:
    vars: tuple[str, ...]
    init: Formula
    rules: tuple[Rule, ...]
    prop: Formula
    machine: Optional[MinskyMachine] = field(default=None, compare=False)
    name: str = ""

    def enabled(self, s: Mapping[str, int]) -> list[Rule]:
        return [r for r in self.rules if evaluate(r.guard, s)]


@dataclass(frozen=True)
class SymbolicTS:
    vars: tuple[str, ...]
    init: Formula
    tr: Formula
    prop: Formula

    @property
    def primed_vars(self) -> tuple[str, ...]:
        return tuple(v + "'" for v in self.vars)


# --------------------------------------------------------------------------
# construction

def prog_property() -> Formula:
    return implies(atom("pc", "=", PC_END), atom("y2", "=", var("y1") * 2))


def prog_init() -> Formula:
    return conj(
        atom("pc", "=", PC_START),
        atom("x", ">", 0),
        atom("z1", "=", "x"),
        atom("z2", "=", var("x") * 2),
        atom("y1", "=", 0),
        atom("y2", "=", 0),
    )


def _prog_rules() -> list[Rule]:
    pc, x, z1, z2, y1, y2 = (var(v) for v in PROG_VARS)
    at = lambda loc: atom(pc, "=", loc)  # noqa: E731
    return [
        _rule("enter-loop1", at(PC_START), pc=PC_LOOP1, z1=z1 - 1, y1=y1 + x),
        _rule("loop1", conj(at(PC_LOOP1), atom(z1, ">", 0)), z1=z1 - 1, y1=y1 + x),
        _rule("enter-loop2", conj(at(PC_LOOP1), atom(z1, "<=", 0)), pc=PC_LOOP2, z2=z2 - 1, y2=y2 + x),
        _rule("loop2", conj(at(PC_LOOP2), atom(z2, ">", 1)), z2=z2 - 1, y2=y2 + x),
        _rule("exit-loop2", conj(at(PC_LOOP2), atom(z2, "=", 1)), pc=PC_END, z2=0, y2=y2 + x),
        _rule("skip-loop2", conj(at(PC_LOOP2), atom(z2, "<=", 0)), pc=PC_END),
    ]


def build_prog() -> ProgramIR:
    """The squaring program: y1 := x*x and y2 := 2*x*x by repeated addition."""
    return ProgramIR(PROG_VARS, prog_init(), tuple(_prog_rules()), prog_property(), name="prog")


def _machine_rules(m: MinskyMachine) -> list[Rule]:
    c = {1: var("c1"), 2: var("c2")}
    q = var("q")
    rules = []
    for j, ins in enumerate(m.instructions, start=1):
        at = atom(q, "=", j)
        if isinstance(ins, Halt):
            continue
        if isinstance(ins, Inc):
            rules.append(_rule(f"q{j}:inc{ins.k}", at, **{f"c{ins.k}": c[ins.k] + 1, "q": q + 1}))
        elif isinstance(ins, Dec):
            guard = conj(at, atom(c[ins.k], "!=", 0))
            rules.append(_rule(f"q{j}:dec{ins.k}", guard, **{f"c{ins.k}": c[ins.k] - 1, "q": q + 1}))
        elif isinstance(ins, Jz):
            rules.append(_rule(f"q{j}:jz{ins.k}-taken", conj(at, atom(c[ins.k], "=", 0)), q=ins.j))
            rules.append(_rule(f"q{j}:jz{ins.k}-next", conj(at, atom(c[ins.k], "!=", 0)), q=q + 1))
    return rules


def build_product(m: MinskyMachine) -> ProgramIR:
    """Lockstep product of the squaring program with ``m``.

    Every transition moves both components.  The program stutters at its end
    location, and nothing moves once the machine is at its halt instruction.
    """
    prog = _prog_rules() + [Rule("stutter", atom("pc", "=", PC_END), ())]
    rules = []
    for pr in prog:
        for mr in _machine_rules(m):
            rules.append(Rule(f"{pr.name}|{mr.name}", conj(pr.guard, mr.guard), pr.update + mr.update))
    init = conj(prog_init(), atom("c1", "=", 0), atom("c2", "=", 0), atom("q", "=", 1))
    return ProgramIR(PRODUCT_VARS, init, tuple(rules), prog_property(), machine=m, name="product")


# --------------------------------------------------------------------------
# execution

def macro_step(ir: ProgramIR, s: Mapping[str, int]) -> Optional[State]:
    """Apply the unique enabled rule; None when no rule is enabled (stuck)."""
    enabled = ir.enabled(s)
    if len(enabled) > 1:
        raise Nondeterminism(f"rules {[r.name for r in enabled]} all enabled in {dict(s)}")
    if not enabled:
        return None
    return enabled[0].apply(s)


def macro_step_batch(ir: ProgramIR, columns: Mapping[str, np.ndarray]) -> tuple[dict, np.ndarray]:
    """Vectorised :func:`macro_step`: successor columns and a has-successor mask."""
    size = len(columns[ir.vars[0]])
    out = {v: np.array(columns[v], dtype=np.int64, copy=True) for v in ir.vars}
    count = np.zeros(size, dtype=np.int64)
    for r in ir.rules:
        mask = evaluate_batch(r.guard, columns)
        if not mask.any():
            continue
        count += mask
        for v, t in r.update:
            val = np.full(size, t.constant, dtype=np.int64)
            for u, k in t.coeffs:
                val = val + k * np.asarray(columns[u], dtype=np.int64)
            out[v] = np.where(mask, val, out[v])
    if (count > 1).any():
        raise Nondeterminism("several rules enabled in some state")
    return out, count == 1


def initial_state(ir: ProgramIR, x_value: int) -> State:
    s = {"pc": PC_START, "x": x_value, "z1": x_value, "z2": 2 * x_value, "y1": 0, "y2": 0}
    if ir.machine is not None:
        s.update(c1=0, c2=0, q=1)
    return s


def reachable(ir: ProgramIR, x_value: int, t_max: int) -> list[State]:
    """The run from the initial state with input ``x_value``, at most ``t_max`` steps."""
    if x_value <= 0:
        raise ValueError("x must be positive")
    s = initial_state(ir, x_value)
    states = [s]
    for _ in range(t_max):
        s = macro_step(ir, s)
        if s is None:
            break
        states.append(s)
    return states


def run_until(ir: ProgramIR, s: Mapping[str, int], stop, max_steps: int) -> list[State]:
    """Steps from ``s`` until ``stop(state)`` holds, the system is stuck, or the budget ends."""
    states = [dict(s)]
    cur = states[0]
    for _ in range(max_steps):
        if stop(cur):
            break
        cur = macro_step(ir, cur)
        if cur is None:
            break
        states.append(cur)
    return states


def r_t_state(t: int, n: int, trace: MinskyTrace | None = None) -> State:
    """Closed form of the product state after ``t > 0`` steps on input ``n``.

    ``n >= t`` is still in the first loop, ``t/3 < n < t`` in the second loop,
    and ``n <= t/3`` has finished.  ``trace`` supplies the machine part; it is
    omitted for the program alone.
    """
    if t <= 0 or n <= 0:
        raise ValueError("need t > 0 and n > 0")
    if n >= t:
        s = {"pc": PC_LOOP1, "x": n, "z1": n - t, "z2": 2 * n, "y1": n * t, "y2": 0}
    elif 3 * n > t:
        s = {"pc": PC_LOOP2, "x": n, "z1": 0, "z2": 3 * n - t, "y1": n * n, "y2": n * (t - n)}
    else:
        s = {"pc": PC_END, "x": n, "z1": 0, "z2": 0, "y1": n * n, "y2": 2 * n * n}
    if trace is not None:
        if t >= len(trace):
            raise ValueError(f"machine trace too short for t={t}")
        s.update(trace[t].as_dict())
    return s


# --------------------------------------------------------------------------
# encoding

def encode_ts(ir: ProgramIR) -> SymbolicTS:
    """QFLIA (Init, TR, Prop); TR frames every variable a rule leaves unchanged."""
    disjuncts = []
    for r in ir.rules:
        upd = dict(r.update)
        eqs = [atom(v + "'", "=", upd.get(v, var(v))) for v in ir.vars]
        disjuncts.append(conj(r.guard, *eqs))
    return SymbolicTS(ir.vars, ir.init, disj(*disjuncts), ir.prop)


def joint(s: Mapping[str, int], t: Mapping[str, int]) -> dict[str, int]:
    """``s`` on unprimed and ``t`` on primed variables."""
    out = dict(s)
    out.update({v + "'": val for v, val in t.items()})
    return out


def check_determinism(ir: ProgramIR, states: Iterable[Mapping[str, int]]) -> None:
    for s in states:
        if len(ir.enabled(s)) > 1:
            raise Nondeterminism(f"several rules enabled in {dict(s)}")


# --------------------------------------------------------------------------
# trace export

def state_tuple(s: Mapping[str, int], variables: Iterable[str]) -> tuple[int, ...]:
    return tuple(s[v] for v in variables)


def format_state(s: Mapping[str, int], variables: Iterable[str] | None = None) -> str:
    variables = list(variables or s.keys())
    inner = ", ".join(f"{v}={PC_NAMES.get(s[v], s[v]) if v == 'pc' else s[v]}" for v in variables)
    return f"({inner})"


def trace_to_jsonl(states: Iterable[Mapping[str, int]], variables: Iterable[str]) -> str:
    variables = list(variables)
    return "".join(json.dumps({v: s[v] for v in variables}) + "\n" for s in states)


def trace_from_jsonl(text: str) -> list[State]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]
