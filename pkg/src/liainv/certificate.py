"""Independent re-validation of counterexample-to-induction certificates.

Nothing here uses the refuter or the closed-form state families: the two
base states are re-derived by honest simulation from their initial states,
and the candidate is evaluated directly as a formula.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from .formula import Formula, FormulaError, evaluate, parse_formula, to_tight_dnf
from .minsky import MinskyMachine
from .sexpr import SExprSyntaxError
from .systems import (
    PC_END, PRODUCT_VARS, PROG_VARS, build_prog, build_product, macro_step, reachable,
)


def _norm(s: Mapping) -> dict:
    return {k: int(v) for k, v in s.items()}


def verify_certificate(cert: Mapping, candidate: Formula, machine: MinskyMachine | None = None
                       ) -> list[tuple[str, bool]]:
    """Every check as ``(description, passed)``; the certificate holds iff all pass."""
    kind = cert.get("kind")
    if kind == "product" and machine is None:
        raise ValueError("a product certificate needs its machine")
    try:
        return _verify(cert, candidate, machine, kind)
    except (KeyError, TypeError, ValueError, AttributeError, FormulaError, SExprSyntaxError):
        return [("certificate is well formed", False)]


def _verify(cert: Mapping, candidate: Formula, machine: MinskyMachine | None, kind: str
            ) -> list[tuple[str, bool]]:
    if kind not in ("product", "warmup"):
        raise ValueError(f"unknown certificate kind {kind!r}")
    variables = PRODUCT_VARS if kind == "product" else PROG_VARS
    ir = build_product(machine) if kind == "product" else build_prog()
    v1, v2, mid = _norm(cert["v1"]), _norm(cert["v2"]), _norm(cert["midpoint"])
    trace = [_norm(s) for s in cert["trace"]]
    violation = _norm(cert["violation"])
    n, m = int(cert["n"]), int(cert["m"])
    checks: list[tuple[str, bool]] = []

    def check(name, ok):
        checks.append((name, bool(ok)))
        return bool(ok)

    check("states are over the system variables",
          all(set(s) == set(variables) for s in (v1, v2, mid, violation, *trace)))
    check("n != m", n != m)
    check("v1.x = n and v2.x = m", v1.get("x") == n and v2.get("x") == m)

    # base states really are reachable, after the same number of steps
    if kind == "product":
        t = int(cert["t"])
        run1 = reachable(ir, n, t)
        run2 = reachable(ir, m, t)
        check("v1 is reached after t steps", len(run1) == t + 1 and run1[-1] == v1)
        check("v2 is reached after t steps", len(run2) == t + 1 and run2[-1] == v2)
        check("v1 and v2 share the machine configuration",
              all(v1[k] == v2[k] for k in ("c1", "c2", "q")))
    else:
        run1 = reachable(ir, n, n)
        run2 = reachable(ir, m, m)
        check("v1 is the loop-1 exit state for n", run1[-1] == v1 and v1["z1"] == 0)
        check("v2 is the loop-1 exit state for m", run2[-1] == v2 and v2["z1"] == 0)

    check("midpoint is the exact average of v1 and v2",
          all(Fraction(v1[k] + v2[k], 2) == mid[k] for k in variables))
    for name, s in (("v1", v1), ("v2", v2), ("midpoint", mid)):
        check(f"candidate holds at {name}", evaluate(candidate, s))

    cube = parse_formula(cert["cube"])
    cubes = {c.to_formula() for c in to_tight_dnf(candidate).cubes}
    check("cube belongs to the candidate's tight DNF", cube in cubes)
    for name, s in (("v1", v1), ("v2", v2), ("midpoint", mid)):
        check(f"cube holds at {name}", evaluate(cube, s))

    check("trace starts at the midpoint", trace and trace[0] == mid)
    check("every trace step is a transition",
          all(macro_step(ir, a) == b for a, b in zip(trace, trace[1:])))
    check("trace ends at the violation", trace and trace[-1] == violation)
    check("violation is at the end location with y2 != 2*y1",
          violation["pc"] == PC_END and violation["y2"] != 2 * violation["y1"])
    if kind == "product":
        v = Fraction(n * n + m * m, 4) + Fraction(3, 2) * m * n
    else:
        v = Fraction((n + m) ** 2, 2)
    check("violation.y2 equals the predicted value",
          violation["y2"] == int(cert["predicted_y2"]) == v)
    return checks


def certificate_valid(cert: Mapping, candidate: Formula, machine: MinskyMachine | None = None) -> bool:
    return all(ok for _, ok in verify_certificate(cert, candidate, machine))
