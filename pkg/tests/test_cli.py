import json

import pytest

from liainv import __version__
from liainv.cli import (
    EXIT_BAD_CERT, EXIT_COUNTERMODEL, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_NOT_OVERAPPROX, EXIT_OK,
    EXIT_SOLVER, EXIT_USAGE, main, warmup_candidate,
)
from liainv.formula import evaluate, to_tight_dnf
from liainv.systems import trace_from_jsonl

from .conftest import CANDIDATES, MACHINES, needs_solver

LOOP = str(MACHINES / "loop.mm")
TWO_INC = str(MACHINES / "two_inc.mm")


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run_cli(capsys, *argv, "--format", "json")
    return code, json.loads(out)


@pytest.fixture
def prop_file(tmp_path):
    p = tmp_path / "prop.inv"
    p.write_text("(=> (= pc 3) (= y2 (* 2 y1)))\n")
    return str(p)


class TestSimulate:
    def test_program(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--x", "3", "--steps", "12")
        states = trace_from_jsonl(out)
        assert code == EXIT_OK and len(states) == 10
        assert states[-1] == dict(pc=3, x=3, z1=0, z2=0, y1=9, y2=18)

    def test_product_text(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--x", "2", "--steps", "4", "--machine", LOOP,
                               "--format", "text")
        assert code == EXIT_OK and len(out.splitlines()) == 5

    def test_needs_positive_x(self, capsys):
        code, _, err = run_cli(capsys, "simulate", "--x", "0")
        assert code == EXIT_USAGE and "--x" in err

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "trace.jsonl"
        assert main(["simulate", "--x", "2", "--output", str(target)]) == EXIT_OK
        assert len(trace_from_jsonl(target.read_text())) == 7


class TestUsage:
    def test_no_subcommand(self, capsys):
        assert run_cli(capsys)[0] == EXIT_USAGE

    def test_unknown_subcommand(self, capsys):
        assert run_cli(capsys, "frobnicate")[0] == EXIT_USAGE

    def test_exclusive_flags(self, capsys, prop_file):
        code, _, err = run_cli(capsys, "refute-inv", "--warmup", "--machine", LOOP, "--candidate", prop_file)
        assert code == EXIT_USAGE and "mutually exclusive" in err

    @pytest.mark.parametrize("argv", [
        ["check-inv"],
        ["synth-inv"],
        ["refute-inv", "--candidate", "x.inv"],
        ["verify-cert"],
        ["warmup-demo", "--cubes", "0"],
        ["check-inv", "--candidate", "x.inv", "--timeout", "0"],
        ["check-inv", "--candidate", "x.inv", "--backend", "oracle"],
    ])
    def test_missing_or_bad(self, capsys, argv):
        assert run_cli(capsys, *argv)[0] == EXIT_USAGE

    def test_version(self, capsys):
        code, out, _ = run_cli(capsys, "--version")
        assert code == 0 and __version__ in out


class TestInputErrors:
    def test_missing_machine_file(self, capsys):
        code, _, err = run_cli(capsys, "synth-inv", "--machine", "/nonexistent.mm")
        assert code == EXIT_INPUT and "/nonexistent.mm" in err

    def test_bad_machine_names_line(self, capsys, tmp_path):
        p = tmp_path / "bad.mm"
        p.write_text("inc 1\nwobble\nhalt\n")
        code, _, err = run_cli(capsys, "synth-inv", "--machine", str(p))
        assert code == EXIT_INPUT and "line 2" in err

    def test_bad_candidate_has_position(self, capsys, tmp_path):
        p = tmp_path / "bad.inv"
        p.write_text("(and (> x 0)\n  (>= y1 ))")
        code, _, err = run_cli(capsys, "check-inv", "--candidate", str(p), "--backend", "bounded")
        assert code == EXIT_INPUT and "line 2" in err

    def test_unknown_variable(self, capsys, tmp_path):
        p = tmp_path / "w.inv"
        p.write_text("(> w 0)")
        assert run_cli(capsys, "check-inv", "--candidate", str(p), "--backend", "bounded")[0] == EXIT_INPUT


class TestReduceEmit:
    def test_reduce(self, capsys):
        code, rep = run_json(capsys, "reduce", "--machine", LOOP)
        assert code == EXIT_OK and rep["vars"][-3:] == ["c1", "c2", "q"]
        assert rep["tool"] == "liainv" and rep["version"] == __version__
        assert rep["config"]["machine"] == LOOP

    def test_emit_smt2_dir(self, capsys, tmp_path, prop_file):
        code, _, _ = run_cli(capsys, "emit-smt2", "--candidate", prop_file, "--out-dir", str(tmp_path / "q"))
        assert code == EXIT_OK
        names = sorted(p.name for p in (tmp_path / "q").iterdir())
        assert names == ["consecution.smt2", "initiation.smt2", "safety.smt2"]

    def test_emit_chc(self, capsys):
        code, out, _ = run_cli(capsys, "emit-chc", "--machine", LOOP)
        assert code == EXIT_OK and "(set-logic HORN)" in out


class TestCheck:
    def test_bounded_countermodel(self, capsys, prop_file):
        code, rep = run_json(capsys, "check-inv", "--candidate", prop_file, "--backend", "bounded")
        assert code == EXIT_COUNTERMODEL
        assert rep["report"]["conditions"][1]["result"] == "countermodel"

    def test_bounded_inconclusive(self, capsys, tmp_path):
        p = tmp_path / "ok.inv"
        p.write_text("(and (>= x 1) (= pc 0) (= z1 x) (= z2 (* 2 x)) (= y1 0) (= y2 0) (= c1 0) (= c2 0) (= q 1))")
        code, _, _ = run_cli(capsys, "check-inv", "--machine", str(MACHINES / "halt.mm"),
                             "--candidate", str(p), "--backend", "bounded")
        assert code == EXIT_INCONCLUSIVE

    def test_solver_failure(self, capsys, prop_file):
        code, _, err = run_cli(capsys, "check-inv", "--candidate", prop_file, "--solver", "/nonexistent/z3")
        assert code == EXIT_SOLVER and "solver" in err

    @needs_solver
    def test_smt(self, capsys, prop_file):
        code, rep = run_json(capsys, "check-inv", "--candidate", prop_file)
        assert code == EXIT_COUNTERMODEL
        assert [c["result"] for c in rep["report"]["conditions"]] == ["valid", "countermodel", "valid"]
        assert rep["config"]["solver"]


class TestSynth:
    @needs_solver
    def test_two_inc(self, capsys):
        code, rep = run_json(capsys, "synth-inv", "--machine", TWO_INC)
        assert code == EXIT_OK and rep["k"] == 2 and rep["report"]["inductive"] is True
        assert "(= q 3)" in rep["invariant"]

    def test_divergent(self, capsys):
        code, rep = run_json(capsys, "synth-inv", "--machine", LOOP, "--cap", "500", "--backend", "bounded")
        assert code == EXIT_INCONCLUSIVE and rep["outcome"] == "does-not-halt-within"

    def test_text_format(self, capsys):
        code, out, _ = run_cli(capsys, "synth-inv", "--machine", TWO_INC, "--backend", "bounded",
                               "--format", "text")
        assert code == EXIT_INCONCLUSIVE and "k: 2" in out and "invariant:" in out


class TestRefute:
    def test_cti_and_verify(self, capsys, tmp_path, prop_file):
        cert = tmp_path / "cert.json"
        code, _, _ = run_cli(capsys, "refute-inv", "--machine", LOOP, "--candidate", prop_file,
                             "--output", str(cert))
        assert code == EXIT_OK
        rep = json.loads(cert.read_text())
        assert rep["outcome"] == "cti" and rep["certificate"]["predicted_y2"] == 97
        code, out, _ = run_cli(capsys, "verify-cert", "--cert", str(cert))
        assert code == EXIT_OK and json.loads(out)["valid"] is True

    def test_tampered_cert(self, capsys, tmp_path, prop_file):
        cert = tmp_path / "cert.json"
        main(["refute-inv", "--machine", LOOP, "--candidate", prop_file, "--output", str(cert)])
        rep = json.loads(cert.read_text())
        rep["certificate"]["violation"]["y2"] += 2
        cert.write_text(json.dumps(rep))
        code, out, _ = run_cli(capsys, "verify-cert", "--cert", str(cert))
        assert code == EXIT_BAD_CERT and json.loads(out)["valid"] is False

    def test_garbage_cert(self, capsys, tmp_path):
        p = tmp_path / "junk.json"
        p.write_text("{not json")
        assert run_cli(capsys, "verify-cert", "--cert", str(p))[0] == EXIT_INPUT

    def test_not_overapprox(self, capsys, tmp_path):
        p = tmp_path / "small.inv"
        p.write_text("(<= x 3)")
        code, rep = run_json(capsys, "refute-inv", "--machine", LOOP, "--candidate", str(p))
        assert code == EXIT_NOT_OVERAPPROX and rep["witness"]["x"] > 3

    def test_inconclusive_for_halting(self, capsys):
        code, rep = run_json(capsys, "refute-inv", "--machine", TWO_INC,
                             "--candidate", str(CANDIDATES / "01_true.inv"))
        assert code == EXIT_INCONCLUSIVE and "halted" in rep["reason"]

    def test_warmup(self, capsys, tmp_path, prop_file):
        code, rep = run_json(capsys, "refute-inv", "--warmup", "--candidate", prop_file)
        assert code == EXIT_OK and rep["certificate"]["kind"] == "warmup"


class TestWarmupDemo:
    def test_one_cube(self, capsys):
        code, rep = run_json(capsys, "warmup-demo", "--cubes", "1")
        c = rep["certificate"]
        assert code == EXIT_OK
        assert (c["n"], c["m"]) == (2, 4)
        assert c["midpoint"] == dict(pc=1, x=3, z1=0, z2=6, y1=10, y2=0)
        assert c["violation"]["y2"] == 18

    @pytest.mark.parametrize("cubes", [1, 2, 5, 12])
    def test_candidate_covers_inputs(self, cubes):
        phi = warmup_candidate(cubes)
        assert to_tight_dnf(phi).r == cubes
        assert all(evaluate(phi, dict(pc=0, x=x, z1=x, z2=2 * x, y1=0, y2=0)) for x in range(1, 60))

    def test_text_and_json_agree(self, capsys):
        _, rep = run_json(capsys, "warmup-demo", "--cubes", "3")
        _, text, _ = run_cli(capsys, "warmup-demo", "--cubes", "3", "--format", "text")
        cert = rep["certificate"]
        for key in ("r", "n", "m", "predicted_y2", "cube_index"):
            assert f"{key}: {cert[key]}" in text
        assert f"cube: {cert['cube']}" in text
        assert text.count("step ") == len(rep["explanation"]) - 5
