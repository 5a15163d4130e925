"""Explicit inductive invariant for the product with a halting machine.

If the machine halts after ``k`` steps, the product's reachable states split
into a finite part (inputs ``x <= k``, enumerated state by state) and, for
``x > k``, one linear cube per step count ``t <= k``: the first loop cannot
have finished because it needs ``x > k`` iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .checker import CheckReport, check_inductive
from .formula import FALSE, Formula, atom, conj, disj, var
from .minsky import MinskyMachine, MinskyTrace, run
from .systems import (
    PC_LOOP1, PC_START, PRODUCT_VARS, State, build_product, encode_ts, reachable, state_tuple,
)


class DoesNotHaltWithin(Exception):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"machine does not halt within {cap} steps")


@dataclass(frozen=True)
class SynthesisResult:
    k: int
    phi_small: Formula
    phi_big: Formula
    invariant: Formula
    report: CheckReport | None
    small_states: tuple[tuple[int, ...], ...] = ()


def halting_time(m: MinskyMachine, cap: int) -> int:
    """Least ``k`` with ``f_q(k) = n``."""
    trace = run(m, cap)
    if trace.halted_at is None:
        raise DoesNotHaltWithin(cap)
    return trace.halted_at


def state_cube(s: State, variables=PRODUCT_VARS) -> Formula:
    return conj(*(atom(v, "=", s[v]) for v in variables))


def small_states(m: MinskyMachine, k: int) -> list[State]:
    """All reachable product states with ``1 <= x <= k``, deduplicated, in visit order."""
    ir = build_product(m)
    seen: dict[tuple, State] = {}
    for x in range(1, k + 1):
        for s in reachable(ir, x, k):
            seen.setdefault(state_tuple(s, PRODUCT_VARS), s)
    return list(seen.values())


def build_phi_small(m: MinskyMachine, k: int) -> Formula:
    return disj(*(state_cube(s) for s in small_states(m, k)))


def build_phi_t(m: MinskyMachine, k: int, t: int, trace: MinskyTrace | None = None) -> Formula:
    """The cube for inputs ``x > k`` after ``t`` steps; ``t`` is a literal, so ``y1 = t*x`` is linear."""
    if trace is None:
        trace = run(m, k)
    if not 0 <= t <= k or t >= len(trace):
        raise ValueError(f"need 0 <= t <= k and a trace reaching t (t={t}, k={k})")
    x = var("x")
    cfg = trace[t]
    return conj(
        atom(x, ">", k),
        atom("pc", "=", PC_START if t == 0 else PC_LOOP1),
        atom("z1", "=", x - t),
        atom("z2", "=", x * 2),
        atom("y1", "=", x * t),
        atom("y2", "=", 0),
        atom("c1", "=", cfg.c1),
        atom("c2", "=", cfg.c2),
        atom("q", "=", cfg.q),
    )


def build_phi_big(m: MinskyMachine, k: int) -> Formula:
    trace = run(m, k)
    return disj(*(build_phi_t(m, k, t, trace) for t in range(k + 1)))


def synthesize(m: MinskyMachine, cap: int = 10_000, backend=None, check: bool = True) -> SynthesisResult:
    """Build ``phi_small | phi_big`` and (unless ``check=False``) verify it."""
    k = halting_time(m, cap)
    states = small_states(m, k)
    phi_small = disj(*(state_cube(s) for s in states)) if states else FALSE
    phi_big = build_phi_big(m, k)
    invariant = disj(phi_small, phi_big) if states else phi_big
    report = check_inductive(encode_ts(build_product(m)), invariant, backend) if check else None
    return SynthesisResult(k, phi_small, phi_big, invariant, report,
                           tuple(state_tuple(s, PRODUCT_VARS) for s in states))
