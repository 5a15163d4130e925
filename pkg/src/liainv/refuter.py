"""Constructive refutation of candidate invariants by integer convex combination.

A candidate is normalised to a tight DNF with ``r`` convex cubes.  After
``t = 3(r + 2)`` steps the product holds, for every even ``n`` strictly
between ``t/3`` and ``t``, a second-loop state; there are more than ``r`` of
them, so two (``n != m``) share a cube.  Their midpoint is an integer state
in that cube, and finishing the second loop from it yields
``y2 = (n^2 + m^2)/4 + 3mn/2``, which differs from ``2*y1 = n^2 + m^2``.

Both states are taken after the same number of steps so that their machine
components coincide; the midpoint therefore carries a genuinely reachable
machine configuration from which the machine does not halt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .formula import Cube, Dnf, Formula, print_formula, to_tight_dnf
from .minsky import MinskyMachine, MinskyTrace, run
from .systems import (
    PC_END, PC_LOOP1, PRODUCT_VARS, PROG_VARS, State, build_prog, build_product,
    initial_state, r_t_state, run_until,
)


class NonIntegral(ValueError):
    pass


@dataclass(frozen=True)
class CtiCertificate:
    kind: str  # "product" or "warmup"
    r: int
    t: Optional[int]
    cube_index: int  # 1-based
    cube: Cube
    n: int
    m: int
    v1: State
    v2: State
    midpoint: State
    trace: tuple[State, ...]
    violation: State
    predicted_y2: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "r": self.r,
            "t": self.t,
            "cube_index": self.cube_index,
            "cube": print_formula(self.cube.to_formula()),
            "n": self.n,
            "m": self.m,
            "v1": self.v1,
            "v2": self.v2,
            "midpoint": self.midpoint,
            "trace": list(self.trace),
            "violation": self.violation,
            "predicted_y2": self.predicted_y2,
        }


@dataclass(frozen=True)
class Cti:
    certificate: CtiCertificate


@dataclass(frozen=True)
class NotAnOverapproximation:
    """A reachable state the candidate excludes."""

    witness: State
    steps: Optional[int] = None


@dataclass(frozen=True)
class Inconclusive:
    reason: str


RefutationOutcome = Union[Cti, NotAnOverapproximation, Inconclusive]


def choose_t(r: int) -> int:
    """Smallest step count with at least ``r + 1`` even integers in ``(t/3, t)``."""
    if r < 1:
        raise ValueError("need at least one cube")
    return 3 * (r + 2)


def evens_between(t: int) -> list[int]:
    """Even ``n`` with ``t/3 < n < t``, ascending."""
    first = t // 3 + 1
    first += first % 2
    return list(range(first, t, 2))


def midpoint_state(v1: Mapping[str, int], v2: Mapping[str, int]) -> State:
    if v1.keys() != v2.keys():
        raise ValueError("states over different variables")
    out = {}
    for k in v1:
        s = v1[k] + v2[k]
        if s % 2:
            raise NonIntegral(f"component {k} averages to {s}/2")
        out[k] = s // 2
    return out


def predicted_y2(n: int, m: int, t: int | None = None) -> int:
    """``y2`` at the end location when the second loop is finished from the midpoint.

    ``t`` cancels out of the final value; it is accepted for symmetry with the
    state family.
    """
    num = (n * n + m * m) + 6 * m * n  # 4 * y2
    if num % 4:
        raise NonIntegral("n and m must be even")
    return num // 4


def warmup_predicted_y2(n: int, m: int) -> int:
    """Same quantity for the program alone, starting from the loop-1 exit midpoint."""
    s = n + m
    if s % 2:
        raise NonIntegral("n + m must be even")
    return s * s // 2


def _first_shared(dnf: Dnf, states: list[State]):
    """First pair of states sharing a cube, scanning states in order.

    Returns ``(i, a, b)`` with ``i`` 0-based, or ``(None, witness)`` when a
    state satisfies no cube, or ``None`` when no two states share a cube.
    """
    seen: dict[int, int] = {}
    for j, s in enumerate(states):
        hits = [i for i, c in enumerate(dnf.cubes) if c.sat(s)]
        if not hits:
            return None, j
        for i in hits:
            if i in seen:
                return i, seen[i], j
            seen[i] = j
    return None


def pigeonhole_pair(dnf: Dnf, t: int, trace: MinskyTrace | None):
    """``(i, v1, v2)`` (``i`` 1-based) or a :class:`NotAnOverapproximation`."""
    states = [r_t_state(t, n, trace) for n in evens_between(t)]
    res = _first_shared(dnf, states)
    if res is None:
        raise AssertionError("pigeonhole bound violated")  # unreachable for t >= 3(r+2)
    if res[0] is None:
        return NotAnOverapproximation(states[res[1]], t)
    i, a, b = res
    return i + 1, states[a], states[b]


def _normalise(candidate: Union[Formula, Dnf], cap: int | None) -> Dnf:
    return candidate if isinstance(candidate, Dnf) else to_tight_dnf(candidate, cap)


def _is_bad(s: Mapping[str, int]) -> bool:
    return s["pc"] == PC_END and s["y2"] != 2 * s["y1"]


def refute_product(candidate: Union[Formula, Dnf], m: MinskyMachine, cap: int = 10_000_000,
                   dnf_cap: int | None = 100_000) -> RefutationOutcome:
    """Defeat a candidate invariant of the product with ``m``."""
    dnf = _normalise(candidate, dnf_cap)
    extra = {v for c in dnf.cubes for v in c.variables} - set(PRODUCT_VARS)
    if extra:
        raise ValueError(f"candidate mentions non-product variables: {sorted(extra)}")
    if dnf.r == 0:
        return NotAnOverapproximation(initial_state(build_product(m), 1), 0)
    t = choose_t(dnf.r)
    # the replay needs z2 = 3(n+m)/2 - t < 2t more steps
    horizon = t + 2 * t + 2
    if horizon > cap:
        return Inconclusive(f"step budget {cap} below required {horizon}")
    trace = run(m, horizon)
    if trace.halted_at is not None and trace.halted_at <= t:
        return Inconclusive(f"machine halted within budget (at step {trace.halted_at})")
    pair = pigeonhole_pair(dnf, t, trace)
    if isinstance(pair, NotAnOverapproximation):
        return pair
    i, v1, v2 = pair
    n, mm = v1["x"], v2["x"]
    mid = midpoint_state(v1, v2)
    length = mid["z2"]
    if trace.halted_at is not None and trace.halted_at <= t + length + 2:
        return Inconclusive(f"machine halted within budget (at step {trace.halted_at})")
    ir = build_product(m)
    states = run_until(ir, mid, lambda s: s["pc"] == PC_END, length + 2)
    cube = dnf.cubes[i - 1]
    cert = CtiCertificate(
        kind="product", r=dnf.r, t=t, cube_index=i, cube=cube, n=n, m=mm,
        v1=v1, v2=v2, midpoint=mid, trace=tuple(states), violation=states[-1],
        predicted_y2=predicted_y2(n, mm, t),
    )
    _self_check(cert, ir)
    return Cti(cert)


def warmup_states(r: int) -> list[State]:
    """Loop-1 exit states ``(n, 0, 2n, n^2, 0)`` for even ``n`` in ``2..2(r+1)``."""
    return [{"pc": PC_LOOP1, "x": n, "z1": 0, "z2": 2 * n, "y1": n * n, "y2": 0}
            for n in range(2, 2 * (r + 1) + 1, 2)]


def refute_warmup(candidate: Union[Formula, Dnf], dnf_cap: int | None = 100_000) -> RefutationOutcome:
    """Defeat a candidate invariant of the squaring program alone."""
    dnf = _normalise(candidate, dnf_cap)
    extra = {v for c in dnf.cubes for v in c.variables} - set(PROG_VARS)
    if extra:
        raise ValueError(f"candidate mentions non-program variables: {sorted(extra)}")
    if dnf.r == 0:
        return NotAnOverapproximation(initial_state(build_prog(), 1), 0)
    states = warmup_states(dnf.r)
    res = _first_shared(dnf, states)
    if res is None:
        raise AssertionError("pigeonhole bound violated")
    if res[0] is None:
        w = states[res[1]]
        return NotAnOverapproximation(w, w["x"])
    i, a, b = res
    v1, v2 = states[a], states[b]
    mid = midpoint_state(v1, v2)
    ir = build_prog()
    states_run = run_until(ir, mid, lambda s: s["pc"] == PC_END, mid["z2"] + 2)
    cert = CtiCertificate(
        kind="warmup", r=dnf.r, t=None, cube_index=i + 1, cube=dnf.cubes[i], n=v1["x"], m=v2["x"],
        v1=v1, v2=v2, midpoint=mid, trace=tuple(states_run), violation=states_run[-1],
        predicted_y2=warmup_predicted_y2(v1["x"], v2["x"]),
    )
    _self_check(cert, ir)
    return Cti(cert)


def _self_check(cert: CtiCertificate, ir) -> None:
    for name in ("v1", "v2", "midpoint"):
        if not cert.cube.sat(getattr(cert, name)):
            raise AssertionError(f"{name} outside cube {cert.cube_index}")
    if not _is_bad(cert.violation):
        raise AssertionError(f"replay did not reach a violation: {cert.violation}")
    if cert.violation["y2"] != cert.predicted_y2:
        raise AssertionError("replayed y2 differs from the predicted value")


__all__ = [
    "CtiCertificate", "Cti", "NotAnOverapproximation", "Inconclusive", "RefutationOutcome",
    "NonIntegral", "choose_t", "evens_between", "pigeonhole_pair", "midpoint_state",
    "predicted_y2", "warmup_predicted_y2", "refute_product", "refute_warmup", "warmup_states",
]
