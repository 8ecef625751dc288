import json
import subprocess
import sys

import pytest

from agvroute.cli import main
from agvroute.factio import parse_facts, parse_solution
from agvroute.instances import example1_text


@pytest.fixture
def lp(tmp_path):
    path = tmp_path / "example1.lp"
    path.write_text(example1_text())
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_writes_solution(capsys, lp, tmp_path):
    out_file = tmp_path / "sol.json"
    code, _, err = run(capsys, "solve", "-i", lp, "--prove-optimal", "-o", str(out_file))
    assert code == 0
    doc = json.loads(out_file.read_text())
    assert doc["objectives"] == {"ms": 55, "rl": 104, "cn": 3, "on": 14}
    assert doc["status"] == "optimal"
    assert "optimal" in err


def test_solve_threads_flag(capsys, lp):
    code, out, _ = run(capsys, "solve", "-i", lp, "--prove-optimal", "--threads", "1", "--progress")
    assert code == 0 and json.loads(out)["stats"]["proven_optimal"] is True


def test_validate_corrupted(capsys, lp, tmp_path):
    sol_file = tmp_path / "sol.json"
    run(capsys, "solve", "-i", lp, "--prove-optimal", "-o", str(sol_file))
    doc = json.loads(sol_file.read_text())
    assert run(capsys, "validate", "-i", lp, "-s", str(sol_file))[0] == 0
    del doc["routes"]["c(1)"][4]  # the halt at v(5)
    bad = tmp_path / "corrupted.json"
    bad.write_text(json.dumps(doc))
    code, out, err = run(capsys, "validate", "-i", lp, "-s", str(bad))
    assert code == 1
    kinds = {c["kind"] for c in json.loads(out)["conflicts"]}
    assert kinds & {"DeadlineMiss", "IllegalHalt"}


def test_enumerate(capsys, lp):
    code, out, err = run(capsys, "enumerate", "-i", lp)
    doc = json.loads(out)
    assert code == 0
    assert doc["optima_count"] == 1 and doc["feasible_count"] == 255
    code, out, _ = run(capsys, "enumerate", "-i", lp, "--continue-routes")
    assert json.loads(out)["feasible_count"] == 561
    code, out, _ = run(capsys, "enumerate", "-i", lp, "--limit", "5")
    assert code == 0 and json.loads(out)["limit_reached"] == 5


def test_baseline_deadlock(capsys, lp):
    code, out, err = run(capsys, "baseline", "-i", lp)
    assert code == 1
    doc = json.loads(out)
    assert doc["kind"] == "deadlock"
    assert "v(4)" in {w["node"] for w in doc["witness"]}


def test_emit_atoms(capsys, lp, tmp_path):
    sol_file = tmp_path / "sol.json"
    run(capsys, "solve", "-i", lp, "--prove-optimal", "-o", str(sol_file))
    code, out, _ = run(capsys, "emit-atoms", "-i", lp, "-s", str(sol_file))
    assert code == 0
    assert "at(c(1),v(2),55)." in out.splitlines()


def test_convert_round_trip(capsys, lp, tmp_path):
    js = tmp_path / "ex.json"
    assert run(capsys, "convert", "-i", lp, "-o", str(js))[0] == 0
    code, out, _ = run(capsys, "convert", "-i", str(js))
    assert code == 0
    assert parse_facts(out) == parse_facts(example1_text())


def test_gen_and_bench(capsys, tmp_path):
    d = tmp_path / "inst"
    code, _, _ = run(capsys, "gen", "--seed", "3", "--count", "2", "--dir", str(d), "--nodes", "6", "--edges", "9",
                     "--tasks", "2", "--vehicles", "2", "--subtasks-min", "1", "--subtasks-max", "2")
    assert code == 0 and len(list(d.glob("*.lp"))) == 2
    out_csv = tmp_path / "bench.csv"
    code, _, _ = run(capsys, "bench", "--dir", str(d), "--out", str(out_csv), "--solvers", "optimizer,oracle")
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "instance,solver,status,ms,rl,cn,on,wall_ms,nodes_expanded,proven_optimal"
    assert len(lines) == 5


def test_gen_stdout_is_deterministic(capsys):
    a = run(capsys, "gen", "--seed", "1")[1]
    b = run(capsys, "gen", "--seed", "1")[1]
    assert a == b and "vehicle(c(4),v(" in a


def test_input_errors(capsys, tmp_path):
    assert run(capsys, "solve", "-i", str(tmp_path / "missing.lp"))[0] == 2
    bad = tmp_path / "bad.lp"
    bad.write_text("node(v(1)).\nhalt(v(1),2). park(v(1),2).\n")
    code, _, err = run(capsys, "solve", "-i", str(bad))
    assert code == 2 and "both a halt and a park" in err
    assert run(capsys, "gen", "--vehicles", "30", "--nodes", "25")[0] == 2


def test_usage_errors_name_the_flag(capsys, lp):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "-i", lp, "--threads", "0"])
    assert exc.value.code == 2
    assert "--threads" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["solve", "-i", lp, "--budget-ms", "soon"])
    assert exc.value.code == 2
    assert "--budget-ms" in capsys.readouterr().err


def test_solve_infeasible_exit_code(capsys, tmp_path):
    text = example1_text().replace("task(t(1;2),60).", "task(t(1;2),40).").replace("time(0..60).", "")
    path = tmp_path / "tight.lp"
    path.write_text(text)
    code, out, _ = run(capsys, "solve", "-i", str(path), "--prove-optimal")
    assert code == 1 and json.loads(out)["status"] == "infeasible"


def test_solve_output_is_thin_wrapper(capsys, lp):
    from agvroute.optimizer import SolverConfig, solve

    _, out, _ = run(capsys, "solve", "-i", lp, "--prove-optimal")
    s = parse_facts(example1_text())
    assert parse_solution(out, s) == solve(s, SolverConfig()).solution


def test_module_entry_point(lp):
    proc = subprocess.run([sys.executable, "-m", "agvroute", "enumerate", "-i", lp], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["optima_count"] == 1
