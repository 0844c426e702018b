import json
import subprocess
import sys
from fractions import Fraction

import pytest

from dslab import cli
from dslab.gcdgraph import GcdGraph
from dslab.psi import FAMILIES, PsiFunction, generate_psi


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def records(text):
    return [json.loads(line) for line in text.splitlines()]


def test_overlap_record(capsys):
    code, out, _ = run(capsys, "overlap", "--q", "2", "--r", "3", "--psi", "constant:1/2")
    assert code == 0
    head = records(out)[0]
    assert head["outputs"] == {"exact": "1/2", "crt": "1/2"}
    assert head["passed"] is True


def test_second_moment_table(capsys):
    code, out, _ = run(capsys, "second-moment", "--Q", "2", "40", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("Q,psi_mass,sum_overlaps")
    assert lines[1].split(",")[:3] == ["2", "3/2", "5/2"]
    # Q = 1 has rho = 1 exactly, so the deviation grows from Q = 1 to Q = 2
    code, _, err = run(capsys, "second-moment", "--Q", "1", "2")
    assert code == 1 and json.loads(err)["failed"] == ["deviation_non_increasing"]


def test_measure_and_count(capsys):
    code, out, _ = run(capsys, "measure", "--q", "1", "2", "3", "6")
    assert code == 0 and [r["measure"] for r in records(out)[1:]] == ["1/1", "1/2", "2/3", "1/3"]
    code, out, _ = run(capsys, "count", "--Q", "3", "--alpha", "1/2")
    assert code == 0 and records(out)[1]["S"] == 1


def test_bounds_and_classify(capsys):
    code, out, _ = run(capsys, "bounds", "--q", "2", "--r", "3", "--T", "2", "--u", "4")
    assert code == 0
    assert records(out)[0]["outputs"]["pv_factor"] == "2/3"
    assert records(out)[1]["euler_factor"] == "3/2"
    code, out, _ = run(capsys, "bounds", "--Q", "20")
    assert code == 0 and records(out)[0]["outputs"]["pairs"] == 190
    code, out, _ = run(capsys, "classify", "--Q", "100", "--q", "64", "--r", "81")
    assert code == 0 and records(out)[1]["label"] == "E4"
    code, out, _ = run(capsys, "classify", "--Q", "30")
    assert code == 0 and sum(records(out)[0]["outputs"]["counts"].values()) == 900


def test_props(capsys):
    code, out, _ = run(capsys, "props", "--Q", "3", "--t", "2")
    assert code == 0 and records(out)[1]["sum"] == "97/144"


def test_gcd_graph_ops(tmp_path, capsys):
    g = GcdGraph.complete({1: Fraction(1), 7: Fraction(1)}, [1, 7], [1, 7])
    path = tmp_path / "g.txt"
    g.save(path)
    code, out, _ = run(capsys, "gcd-graph", "--input", str(path), "--op", "iterate", "--C", "1", "--t", "10")
    assert code == 0
    outputs = records(out)[0]["outputs"]
    assert outputs["branch"] == "b" and outputs["p_diff"] == [7]
    H = GcdGraph.loads(outputs["graph"])
    assert H.V == {1} and H.W == {7}
    for op in ("validate", "density", "quality", "r-music", "greedy", "regularize", "pipeline"):
        code, _, err = run(capsys, "gcd-graph", "--input", str(path), "--op", op)
        assert code == 0, (op, err)
    code, out, _ = run(capsys, "gcd-graph", "--input", str(path), "--op", "find-pair", "--p", "7")
    assert code == 0 and (records(out)[0]["outputs"]["k"], records(out)[0]["outputs"]["l"]) == (0, 1)


def test_gcd_graph_invalid_and_precondition(tmp_path, capsys):
    bad = GcdGraph.build({2: 1, 4: 1}, [2], [4], [(2, 4)], [2], {2: 0}, {2: 1})
    path = tmp_path / "bad.txt"
    bad.save(path)
    code, out, err = run(capsys, "gcd-graph", "--input", str(path), "--op", "validate")
    assert code == 1
    assert json.loads(err)["record"] == "failure"
    good = tmp_path / "good.txt"
    GcdGraph.complete({2: 1, 3: 1}, [2, 3], [2, 3]).save(good)
    code, _, err = run(capsys, "gcd-graph", "--input", str(good), "--op", "step", "--p", "2")
    assert code == 2 and json.loads(err)["kind"] == "input"


def test_anatomy_and_mean_value(capsys):
    code, out, _ = run(capsys, "anatomy", "--x", "20", "--tt", "2", "--c", "1/2")
    assert code == 0 and records(out)[1]["count"] == 11
    code, out, _ = run(capsys, "mean-value", "--x", "9", "10", "--P", "3", "--K", "1/5")
    assert code == 0 and [r["residual"] for r in records(out)[1:]] == ["0/1", "-1/3"]
    code, _, _ = run(capsys, "mean-value", "--x", "10", "--P", "3", "--K", "1/100")
    assert code == 1


def test_bad_input(capsys):
    code, _, err = run(capsys, "overlap", "--q", "2", "--r", "3", "--psi", "constant:2")
    assert code == 2 and "outside" in json.loads(err)["detail"]
    code, _, err = run(capsys, "classify", "--Q", "1")
    assert code == 2


def test_output_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DSLAB_OUTPUT_DIR", str(tmp_path))
    code, out, _ = run(capsys, "count", "--Q", "5", "--alpha", "1/3", "--output", "sub/c.jsonl")
    assert code == 0 and out == ""
    assert records((tmp_path / "sub" / "c.jsonl").read_text())[1]["S"] >= 1


def test_threads_do_not_change_bytes(capsys):
    outs = []
    for threads in ("1", "2"):
        code, out, _ = run(capsys, "montecarlo", "--Q", "300", "--samples", "6", "--seed", "5", "--threads", threads)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]


def test_psi_generator_round_trip(tmp_path):
    for spec in FAMILIES + ("smooth-support:1/2:3",):
        psi = generate_psi(spec, 100)
        path = tmp_path / "p.txt"
        path.write_text(psi.dumps())
        assert generate_psi(f"file:{path}", 100) == psi


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "dslab.cli", "overlap", "--q", "2", "--r", "6"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout.splitlines()[0])["outputs"]["exact"] == "0/1"
