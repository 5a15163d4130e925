"""Validity of implications and the three inductiveness conditions.

Two backends decide ``phi => psi``:

* :class:`SmtBackend` asks an external SMT-LIB2 solver (complete).
* :class:`BoundedBackend` searches every assignment with ``|v| <= bound`` for a
  countermodel.  It can only ever answer Countermodel or Unknown.

Every countermodel, whichever backend found it, is replayed with
:func:`~liainv.formula.evaluate` before it is reported.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

from . import smt
from .formula import (
    Cube, Formula, conj, evaluate, evaluate_batch, free_vars, iter_tight_dnf, prime,
)
from .systems import SymbolicTS

CONDITIONS = ("initiation", "consecution", "safety")
_CHUNK = 200_000


@dataclass(frozen=True)
class Valid:
    def __str__(self):
        return "valid"


@dataclass(frozen=True)
class Countermodel:
    assignment: dict

    def __str__(self):
        return "countermodel " + ", ".join(f"{k}={v}" for k, v in sorted(self.assignment.items()))


@dataclass(frozen=True)
class Unknown:
    reason: str

    def __str__(self):
        return f"unknown ({self.reason})"


Verdict = Union[Valid, Countermodel, Unknown]


class CountermodelReplayError(smt.ModelParseError):
    """A reported countermodel does not falsify the implication."""


class BackendDisagreement(RuntimeError):
    pass


def _verdict_dict(v: Verdict) -> dict:
    if isinstance(v, Valid):
        return {"result": "valid"}
    if isinstance(v, Countermodel):
        return {"result": "countermodel", "assignment": dict(sorted(v.assignment.items()))}
    return {"result": "unknown", "reason": v.reason}


@dataclass(frozen=True)
class CheckVerdict:
    condition: str
    result: Verdict

    def to_dict(self) -> dict:
        return {"condition": self.condition, **_verdict_dict(self.result)}


@dataclass(frozen=True)
class CheckReport:
    initiation: CheckVerdict
    consecution: CheckVerdict
    safety: CheckVerdict
    backend: str = ""

    @property
    def verdicts(self) -> tuple[CheckVerdict, ...]:
        return (self.initiation, self.consecution, self.safety)

    @property
    def overall(self) -> bool:
        """True iff the candidate is an inductive invariant (hence the system is safe)."""
        return all(isinstance(v.result, Valid) for v in self.verdicts)

    @property
    def has_countermodel(self) -> bool:
        return any(isinstance(v.result, Countermodel) for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "inductive": self.overall,
            "conditions": [v.to_dict() for v in self.verdicts],
        }

    def __str__(self) -> str:
        lines = [f"{v.condition:12s} {v.result}" for v in self.verdicts]
        lines.append(f"inductive    {'yes' if self.overall else 'no'}")
        return "\n".join(lines)


# --------------------------------------------------------------------------
# backends

class SmtBackend:
    name = "smt"

    def __init__(self, solver: str | None = None, timeout: float = smt.DEFAULT_TIMEOUT):
        self.solver = solver
        self.timeout = timeout

    def check(self, phi: Formula, psi: Formula, variables: Iterable[str] = ()) -> Verdict:
        names = sorted(set(variables) | free_vars(phi) | free_vars(psi))
        status, payload = smt.solve_implication(phi, psi, names, self.solver, self.timeout)
        if status == "unsat":
            return Valid()
        if status == "sat":
            return Countermodel(smt.fill_model(payload, names))
        return Unknown(payload)


class BoundedBackend:
    """Exhaustive countermodel search over the box ``[-bound, bound]``.

    The premise is split into tight-DNF cubes; each cube is explored by
    interval propagation and branching, and the conclusion is evaluated on
    every surviving point.  Variables fixed by a unit-coefficient equality
    are computed from the others instead of being enumerated.
    """

    name = "bounded"

    def __init__(self, bound: int = 8, max_points: int = 50_000_000):
        if bound < 0:
            raise ValueError("bound must be >= 0")
        self.bound = bound
        self.max_points = max_points

    def check(self, phi: Formula, psi: Formula, variables: Iterable[str] = ()) -> Verdict:
        names = sorted(set(variables) | free_vars(phi) | free_vars(psi))
        psi_vars = free_vars(psi)
        budget = [self.max_points]
        for cube in iter_tight_dnf(phi):
            found = self._search_cube(cube, names, psi, psi_vars, budget)
            if found is not None:
                return Countermodel(found)
            if budget[0] <= 0:
                return Unknown("bounded search budget exhausted")
        return Unknown(f"bounded: no countermodel with |v| <= {self.bound}")

    def _search_cube(self, cube: Cube, names, psi, psi_vars, budget):
        B = self.bound
        constrained = sorted(cube.variables)
        lo = {v: -B for v in constrained}
        hi = {v: B for v in constrained}
        rows = [(a.coeffs, a.bound) for a in cube.atoms]
        if not _propagate(rows, lo, hi):
            return None
        for v in names:
            if v not in lo:
                lo[v], hi[v] = (-B, B) if v in psi_vars else (0, 0)
        defs = _eliminate(rows)
        base = [v for v in lo if v not in defs]
        return self._branch(rows, defs, base, lo, hi, psi, budget)

    def _branch(self, rows, defs, base, lo, hi, psi, budget):
        size = 1
        for v in base:
            size *= hi[v] - lo[v] + 1
        if size <= _CHUNK:
            return self._leaf(rows, defs, base, lo, hi, size, psi, budget)
        v = max((u for u in base if lo[u] < hi[u]), key=lambda u: hi[u] - lo[u])
        for value in range(lo[v], hi[v] + 1):
            lo2, hi2 = dict(lo), dict(hi)
            lo2[v] = hi2[v] = value
            if not _propagate(rows, lo2, hi2):
                continue
            found = self._branch(rows, defs, base, lo2, hi2, psi, budget)
            if found is not None or budget[0] <= 0:
                return found
        return None

    def _leaf(self, rows, defs, base, lo, hi, size, psi, budget):
        budget[0] -= size
        if budget[0] < 0:
            return None
        axes = [np.arange(lo[v], hi[v] + 1, dtype=np.int64) for v in base]
        cols = {v: g.ravel() for v, g in zip(base, np.meshgrid(*axes, indexing="ij"))}
        mask = np.ones(size, dtype=bool)
        for v, (coeffs, k) in defs.items():
            col = np.full(size, k, dtype=np.int64)
            for u, c in coeffs.items():
                col += c * cols[u]
            cols[v] = col
            mask &= (col >= lo[v]) & (col <= hi[v])
        for coeffs, bound in rows:
            acc = np.zeros(size, dtype=np.int64)
            for v, c in coeffs:
                acc += c * cols[v]
            mask &= acc <= bound
        if mask.any():
            mask &= ~evaluate_batch(psi, cols)
        bad = np.flatnonzero(mask)
        if bad.size == 0:
            return None
        i = int(bad[0])
        return {v: int(c[i]) for v, c in cols.items()}


def _eliminate(rows) -> dict:
    """Solve equalities with a unit coefficient: ``{var: (coeffs over other vars, const)}``."""
    present = {(tuple(coeffs), bound) for coeffs, bound in rows}
    eqs = [(dict(coeffs), bound) for coeffs, bound in present
           if (tuple((v, -c) for v, c in coeffs), -bound) in present]
    defs: dict = {}

    def substitute(coeffs, k):
        out, const = {}, k
        for v, c in coeffs.items():
            if v in defs:
                dc, dk = defs[v]
                const += c * dk
                for u, e in dc.items():
                    out[u] = out.get(u, 0) + c * e
            else:
                out[v] = out.get(v, 0) + c
        return {v: c for v, c in out.items() if c}, const

    for coeffs, bound in eqs:
        # sum(coeffs) = bound, rewritten as sum(coeffs) - bound = 0
        expr, const = substitute(coeffs, -bound)
        pivot = next((v for v, c in sorted(expr.items()) if abs(c) == 1), None)
        if pivot is None:
            continue
        c = expr.pop(pivot)
        new = ({u: -e * c for u, e in expr.items()}, -const * c)
        for v, (dc, dk) in list(defs.items()):
            if pivot in dc:
                e = dc.pop(pivot)
                for u, f in new[0].items():
                    dc[u] = dc.get(u, 0) + e * f
                defs[v] = ({u: f for u, f in dc.items() if f}, dk + e * new[1])
        defs[pivot] = new
    return defs


def _propagate(rows, lo: dict, hi: dict) -> bool:
    """Tighten integer bounds to a fixpoint; False if some row is infeasible."""
    for _ in range(1000):
        changed = False
        for coeffs, bound in rows:
            least = 0
            for v, c in coeffs:
                least += c * (lo[v] if c > 0 else hi[v])
            if least > bound:
                return False
            for v, c in coeffs:
                own = c * (lo[v] if c > 0 else hi[v])
                slack = bound - (least - own)
                if c > 0:
                    new = slack // c
                    if new < hi[v]:
                        hi[v] = new
                        changed = True
                else:
                    new = -(slack // -c)
                    if new > lo[v]:
                        lo[v] = new
                        changed = True
                if lo[v] > hi[v]:
                    return False
                if changed:
                    least = sum(k * (lo[u] if k > 0 else hi[u]) for u, k in coeffs)
        if not changed:
            return True
    return True


class BothBackend:
    """Bounded search and SMT together; a bounded countermodel vetoes an SMT 'valid'."""

    name = "both"

    def __init__(self, smt_backend: SmtBackend, bounded: BoundedBackend):
        self.smt = smt_backend
        self.bounded = bounded

    def check(self, phi: Formula, psi: Formula, variables: Iterable[str] = ()) -> Verdict:
        b = check_implication(phi, psi, self.bounded, variables)
        s = check_implication(phi, psi, self.smt, variables)
        if isinstance(b, Countermodel) and isinstance(s, Valid):
            raise BackendDisagreement(f"bounded countermodel {b.assignment} but solver says valid")
        if isinstance(s, Unknown) and isinstance(b, Countermodel):
            return b
        return s


def make_backend(kind: str = "smt", solver: str | None = None, timeout: float = smt.DEFAULT_TIMEOUT,
                 bound: int = 8):
    if kind == "smt":
        return SmtBackend(solver, timeout)
    if kind == "bounded":
        return BoundedBackend(bound)
    if kind == "both":
        return BothBackend(SmtBackend(solver, timeout), BoundedBackend(bound))
    raise ValueError(f"unknown backend {kind!r}")


# --------------------------------------------------------------------------
# checks

def check_implication(phi: Formula, psi: Formula, backend=None, variables: Iterable[str] = ()) -> Verdict:
    """Decide ``phi => psi``; a countermodel is always replay-checked."""
    backend = backend if backend is not None else SmtBackend()
    verdict = backend.check(phi, psi, variables)
    if isinstance(verdict, Countermodel):
        replay_countermodel(phi, psi, verdict.assignment)
    return verdict


def replay_countermodel(phi: Formula, psi: Formula, sigma: Mapping[str, int]) -> None:
    if not evaluate(phi, sigma) or evaluate(psi, sigma):
        raise CountermodelReplayError(f"assignment {dict(sigma)} does not falsify the implication")


def check_inductive(ts: SymbolicTS, inv: Formula, backend=None) -> CheckReport:
    """Initiation, consecution and safety of ``inv`` for ``ts``."""
    backend = backend if backend is not None else SmtBackend()
    extra = free_vars(inv) - set(ts.vars)
    if extra:
        raise ValueError(f"candidate mentions undeclared variables: {sorted(extra)}")
    both = ts.vars + ts.primed_vars
    initiation = check_implication(ts.init, inv, backend, ts.vars)
    consecution = check_implication(conj(inv, ts.tr), prime(inv), backend, both)
    safety = check_implication(inv, ts.prop, backend, ts.vars)
    return CheckReport(
        CheckVerdict("initiation", initiation),
        CheckVerdict("consecution", consecution),
        CheckVerdict("safety", safety),
        backend=getattr(backend, "name", type(backend).__name__),
    )


def emit_smt2(ts: SymbolicTS, inv: Formula) -> dict[str, str]:
    """One QF_LIA script per condition; each is unsat iff the condition holds."""
    both = ts.vars + ts.primed_vars
    return {
        "initiation": smt.implication_query(ts.init, inv, ts.vars),
        "consecution": smt.implication_query(conj(inv, ts.tr), prime(inv), both),
        "safety": smt.implication_query(inv, ts.prop, ts.vars),
    }


def emit_chc(ts: SymbolicTS) -> str:
    return smt.chc_query(ts.vars, ts.init, ts.tr, ts.prop)


__all__ = [
    "CONDITIONS", "Valid", "Countermodel", "Unknown", "CheckVerdict", "CheckReport",
    "SmtBackend", "BoundedBackend", "BothBackend", "make_backend",
    "check_implication", "check_inductive", "replay_countermodel", "emit_smt2", "emit_chc",
    "CountermodelReplayError", "BackendDisagreement",
]
