"""Command-line entry point.

Exit codes::

    0  success: inductive / certificate found / certificate valid
    1  countermodel: the candidate is not inductive
    2  usage error
    3  inconclusive (bounded backend, machine halted, no halt within cap)
    4  solver failure (missing, timeout, unparsable output)
    5  candidate is not an overapproximation of the reachable states
    6  malformed input file
    7  certificate failed re-validation
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .certificate import verify_certificate
from .checker import Countermodel, check_inductive, emit_chc, emit_smt2, make_backend
from .formula import FormulaError, atom, conj, disj, parse_formula, print_formula
from .minsky import IllFormed, MachineError, format_machine, parse_machine
from .refuter import Cti, Inconclusive, NotAnOverapproximation, refute_product, refute_warmup
from .sexpr import SExprSyntaxError
from .smt import DEFAULT_TIMEOUT, SolverError, resolve_solver
from .synthesizer import DoesNotHaltWithin, synthesize
from .systems import (
    PRODUCT_VARS, PROG_VARS, build_prog, build_product, encode_ts, format_state, reachable,
    trace_to_jsonl,
)

EXIT_OK = 0
EXIT_COUNTERMODEL = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3
EXIT_SOLVER = 4
EXIT_NOT_OVERAPPROX = 5
EXIT_INPUT = 6
EXIT_BAD_CERT = 7

SUBCOMMANDS = ("simulate", "reduce", "emit-smt2", "emit-chc", "check-inv", "synth-inv",
               "refute-inv", "warmup-demo", "verify-cert")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    machine: Optional[str] = None
    candidate: Optional[str] = None
    cert: Optional[str] = None
    x: Optional[int] = None
    steps: int = 100
    cap: int = 10_000
    cubes: int = 1
    warmup: bool = False
    backend: str = "smt"
    solver: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT
    bound: int = 8
    output: Optional[str] = None
    out_dir: Optional[str] = None
    format: str = "json"

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        fields = {k: v for k, v in vars(ns).items() if k in cls.__dataclass_fields__ and v is not None}
        cfg = cls(**fields)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        sub = self.subcommand
        if sub == "simulate" and (self.x is None or self.x <= 0):
            raise UsageError("simulate needs --x with a positive value")
        if sub in ("check-inv", "emit-smt2", "refute-inv") and not self.candidate:
            raise UsageError(f"{sub} needs --candidate")
        if sub == "synth-inv" and not self.machine:
            raise UsageError("synth-inv needs --machine")
        if sub == "refute-inv":
            if self.warmup and self.machine:
                raise UsageError("--warmup and --machine are mutually exclusive")
            if not self.warmup and not self.machine:
                raise UsageError("refute-inv needs --machine (or --warmup)")
        if sub == "verify-cert" and not self.cert:
            raise UsageError("verify-cert needs --cert")
        if self.steps < 0 or self.cap < 0 or self.bound < 0:
            raise UsageError("--steps, --cap and --bound must be non-negative")
        if self.cubes < 1:
            raise UsageError("--cubes must be at least 1")
        if self.timeout <= 0:
            raise UsageError("--timeout must be positive")

    def resolved(self) -> dict:
        d = asdict(self)
        if self.backend in ("smt", "both") and self.subcommand in ("check-inv", "synth-inv"):
            d["solver"] = " ".join(resolve_solver(self.solver))
        return d


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liainv", description="QFLIA invariant toolkit for counter-machine reductions")
    p.add_argument("--version", action="version", version=f"liainv {__version__}")
    sub = p.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True

    def common(sp, machine=True, candidate=False, solver=False):
        if machine:
            sp.add_argument("--machine", help="counter machine (.mm); omit for the program alone")
        if candidate:
            sp.add_argument("--candidate", help="candidate invariant (s-expression file)")
        if solver:
            sp.add_argument("--backend", choices=["smt", "bounded", "both"])
            sp.add_argument("--solver", help="solver command line (default $LIAINV_SOLVER or 'z3 -in')")
            sp.add_argument("--timeout", type=float, help="seconds per solver query")
            sp.add_argument("--bound", type=int, help="box bound for the bounded backend")
        sp.add_argument("--format", choices=["json", "text"])
        sp.add_argument("--output", help="write the report here instead of stdout")

    sp = sub.add_parser("simulate", help="run the program (or product) from input x")
    sp.add_argument("--x", type=int)
    sp.add_argument("--steps", type=int)
    common(sp)
    common(sub.add_parser("reduce", help="print Init, TR and Prop of the encoding"))
    sp = sub.add_parser("emit-smt2", help="write the three QF_LIA queries for a candidate")
    sp.add_argument("--out-dir", dest="out_dir")
    common(sp, candidate=True)
    common(sub.add_parser("emit-chc", help="write the HORN query for the encoding"))
    common(sub.add_parser("check-inv", help="check a candidate invariant"), candidate=True, solver=True)
    sp = sub.add_parser("synth-inv", help="synthesise the invariant for a halting machine")
    sp.add_argument("--cap", type=int, help="step budget for finding the halting time")
    common(sp, solver=True)
    sp = sub.add_parser("refute-inv", help="refute a candidate invariant")
    sp.add_argument("--warmup", action="store_true", default=None, help="refute for the program alone")
    sp.add_argument("--cap", type=int)
    common(sp, candidate=True)
    sp = sub.add_parser("warmup-demo", help="refute an N-cube candidate for the program alone")
    sp.add_argument("--cubes", type=int)
    common(sp, machine=False)
    sp = sub.add_parser("verify-cert", help="re-validate a refute-inv JSON report")
    sp.add_argument("--cert")
    common(sp, machine=False)
    return p


# --------------------------------------------------------------------------
# helpers

def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror}") from None


class InputError(Exception):
    pass


def _load_machine(path: Optional[str]):
    if path is None:
        return None
    try:
        return parse_machine(_read(path), name=Path(path).stem)
    except MachineError as e:
        raise InputError(f"{path}: {e}") from None


def _load_candidate(path: str, variables) -> object:
    text = _read(path)
    try:
        return parse_formula(text.strip(), variables)
    except (FormulaError, SExprSyntaxError) as e:
        raise InputError(f"{path}: {e}") from None


def _system(machine):
    return build_product(machine) if machine is not None else build_prog()


def _render_text(obj, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not _is_state(v):
                lines.append(f"{pad}{k}:")
                lines.append(_render_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)) and not _is_state(v):
                lines.append(f"{pad}-")
                lines.append(_render_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar(v)}")
    else:
        lines.append(pad + _scalar(obj))
    return "\n".join(lines)


def _is_state(v) -> bool:
    return isinstance(v, dict) and "pc" in v and all(isinstance(x, int) for x in v.values())


def _scalar(v) -> str:
    if _is_state(v):
        return format_state(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v)
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "yes" if v else "no"
    return str(v)


def _emit(cfg: RunConfig, report: dict) -> None:
    report = {"tool": "liainv", "version": __version__, "config": cfg.resolved(), **report}
    if cfg.format == "text":
        text = _render_text(report) + "\n"
    else:
        text = json.dumps(report, indent=2) + "\n"
    _write(cfg.output, text)


def _write(path: Optional[str], text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands

def cmd_simulate(cfg: RunConfig) -> int:
    machine = _load_machine(cfg.machine)
    ir = _system(machine)
    states = reachable(ir, cfg.x, cfg.steps)
    if cfg.format == "text":
        body = "".join(f"{t:4d} {format_state(s, ir.vars)}\n" for t, s in enumerate(states))
    else:
        body = trace_to_jsonl(states, ir.vars)
    _write(cfg.output, body)
    return EXIT_OK


def cmd_reduce(cfg: RunConfig) -> int:
    ts = encode_ts(_system(_load_machine(cfg.machine)))
    _emit(cfg, {
        "vars": list(ts.vars),
        "init": print_formula(ts.init),
        "tr": print_formula(ts.tr),
        "prop": print_formula(ts.prop),
    })
    return EXIT_OK


def cmd_emit_smt2(cfg: RunConfig) -> int:
    machine = _load_machine(cfg.machine)
    ts = encode_ts(_system(machine))
    inv = _load_candidate(cfg.candidate, ts.vars)
    queries = emit_smt2(ts, inv)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in queries.items():
            (out / f"{name}.smt2").write_text(text)
    else:
        _write(cfg.output, "".join(f"; --- {name}\n{text}" for name, text in queries.items()))
    return EXIT_OK


def cmd_emit_chc(cfg: RunConfig) -> int:
    ts = encode_ts(_system(_load_machine(cfg.machine)))
    _write(cfg.output, emit_chc(ts))
    return EXIT_OK


def _report_exit(report) -> int:
    if report.overall:
        return EXIT_OK
    if any(isinstance(v.result, Countermodel) for v in report.verdicts):
        return EXIT_COUNTERMODEL
    return EXIT_INCONCLUSIVE


def cmd_check_inv(cfg: RunConfig) -> int:
    machine = _load_machine(cfg.machine)
    ts = encode_ts(_system(machine))
    inv = _load_candidate(cfg.candidate, ts.vars)
    backend = make_backend(cfg.backend, cfg.solver, cfg.timeout, cfg.bound)
    report = check_inductive(ts, inv, backend)
    _emit(cfg, {"candidate": print_formula(inv), "report": report.to_dict()})
    return _report_exit(report)


def cmd_synth_inv(cfg: RunConfig) -> int:
    machine = _load_machine(cfg.machine)
    backend = make_backend(cfg.backend, cfg.solver, cfg.timeout, cfg.bound)
    try:
        res = synthesize(machine, cfg.cap, backend)
    except DoesNotHaltWithin as e:
        _emit(cfg, {"outcome": "does-not-halt-within", "cap": e.cap})
        return EXIT_INCONCLUSIVE
    _emit(cfg, {
        "outcome": "synthesized",
        "k": res.k,
        "invariant": print_formula(res.invariant),
        "report": res.report.to_dict(),
    })
    return _report_exit(res.report)


def _refutation_report(outcome, candidate_text: str, machine) -> tuple[dict, int]:
    base = {"candidate": candidate_text, "machine": format_machine(machine) if machine else None}
    if isinstance(outcome, Cti):
        cert = outcome.certificate
        human = [f"r = {cert.r} cube(s); t = {cert.t}; cube {cert.cube_index}: {cert.cube}",
                 f"v1 = {format_state(cert.v1)}", f"v2 = {format_state(cert.v2)}",
                 f"midpoint = {format_state(cert.midpoint)}"]
        human += [f"  step {j}: {format_state(s)}" for j, s in enumerate(cert.trace)]
        human.append(f"y2 = {cert.violation['y2']} != 2*y1 = {2 * cert.violation['y1']}")
        return {**base, "outcome": "cti", "certificate": cert.to_dict(), "explanation": human}, EXIT_OK
    if isinstance(outcome, NotAnOverapproximation):
        return {**base, "outcome": "not-an-overapproximation", "witness": outcome.witness,
                "steps": outcome.steps}, EXIT_NOT_OVERAPPROX
    return {**base, "outcome": "inconclusive", "reason": outcome.reason}, EXIT_INCONCLUSIVE


def cmd_refute_inv(cfg: RunConfig) -> int:
    machine = _load_machine(cfg.machine)
    variables = PROG_VARS if cfg.warmup else PRODUCT_VARS
    inv = _load_candidate(cfg.candidate, variables)
    outcome = refute_warmup(inv) if cfg.warmup else refute_product(inv, machine, max(cfg.cap, 0) or 10_000_000)
    report, code = _refutation_report(outcome, print_formula(inv), machine)
    _emit(cfg, report)
    return code


def warmup_candidate(cubes: int):
    """``cubes`` interval cubes over x covering every positive input."""
    if cubes == 1:
        return parse_formula("true")
    parts = [conj(atom("x", ">=", 2 * j - 1), atom("x", "<=", 2 * j)) for j in range(1, cubes)]
    parts.append(atom("x", ">=", 2 * cubes - 1))
    return disj(*parts)


def cmd_warmup_demo(cfg: RunConfig) -> int:
    inv = warmup_candidate(cfg.cubes)
    report, code = _refutation_report(refute_warmup(inv), print_formula(inv), None)
    _emit(cfg, report)
    return code


def cmd_verify_cert(cfg: RunConfig) -> int:
    try:
        data = json.loads(_read(cfg.cert))
        cert = data["certificate"]
        candidate = parse_formula(data["candidate"])
        machine = parse_machine(data["machine"]) if data.get("machine") else None
    except (ValueError, KeyError, TypeError, FormulaError, SExprSyntaxError, MachineError) as e:
        raise InputError(f"{cfg.cert}: not a certificate report ({e})") from None
    checks = verify_certificate(cert, candidate, machine)
    ok = all(passed for _, passed in checks)
    _emit(cfg, {"valid": ok, "checks": [{"check": c, "passed": p} for c, p in checks]})
    return EXIT_OK if ok else EXIT_BAD_CERT


COMMANDS = {
    "simulate": cmd_simulate,
    "reduce": cmd_reduce,
    "emit-smt2": cmd_emit_smt2,
    "emit-chc": cmd_emit_chc,
    "check-inv": cmd_check_inv,
    "synth-inv": cmd_synth_inv,
    "refute-inv": cmd_refute_inv,
    "warmup-demo": cmd_warmup_demo,
    "verify-cert": cmd_verify_cert,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = RunConfig.from_args(ns)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"liainv: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except InputError as e:
        print(f"liainv: {e}", file=sys.stderr)
        return EXIT_INPUT
    except IllFormed as e:
        print(f"liainv: machine error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as e:
        print(f"liainv: solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
