import json
import subprocess
import sys

import pytest

from chainplan.cli import main
from chainplan.formats import chain_to_dict, read_table
from chainplan.model import ChainSpec, FunctionSpec, reference_chain


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_chain(path, spec):
    path.write_text(json.dumps(chain_to_dict(spec)))
    return path


def test_solve_linear(capsys, tmp_path, chain_file):
    code, out, _ = run(capsys, "solve", "--method", "linear", "--config", chain_file,
                       "--out", tmp_path / "p.json")
    assert code == 0
    assert "total cost       : 34.870946" in out
    assert "lambda           : 26.5" in out
    assert "branch           : constrained" in out
    assert "lower bound J_lb : 34.000000" in out


def test_solve_linear_unconstrained(capsys, tmp_path):
    cfg = write_chain(tmp_path / "c.json", reference_chain(deadline=0.05))
    code, out, _ = run(capsys, "solve", "--method", "linear", "--config", cfg,
                       "--out", tmp_path / "p.json")
    assert code == 0 and "branch           : unconstrained" in out


def test_solve_common_period(capsys, tmp_path, chain_file):
    code, out, _ = run(capsys, "solve", "--method", "common-period", "--config", chain_file,
                       "--out", tmp_path / "p.json")
    assert code == 0
    assert "T*               : 0.281379 s" in out
    assert "total cost       : 34.72" in out


def test_simulate_pass_and_trace(capsys, tmp_path, chain_file):
    plan = tmp_path / "p.json"
    run(capsys, "solve", "--method", "common-period", "--config", chain_file, "--out", plan)
    code, out, _ = run(capsys, "simulate", "--plan", plan, "--periods", 10,
                       "--trace", tmp_path / "t.csv")
    assert code == 0
    assert "PASS q1: measured 0.234482759" in out
    assert "PASS q2: measured 0.211034483" in out
    assert "overall: PASS" in out
    table = read_table(tmp_path / "t.csv")
    assert list(table)[:3] == ["time", "q1", "q2"] and "e2e_delay" in table


def test_simulate_with_disturbance(capsys, tmp_path, chain_file):
    plan = tmp_path / "p.json"
    run(capsys, "solve", "--method", "common-period", "--config", chain_file, "--out", plan)
    code, out, _ = run(capsys, "simulate", "--plan", plan, "--periods", 10,
                       "--disturbance", "1,0.5,2.0", "--dt", "0.001", "--trace", tmp_path / "t.csv")
    assert code == 0
    assert "PASS q1 (enlarged by d=2)" in out
    assert "recovery within 8 periods" in out
    assert "delay check: skipped" in out


def test_linear_simulation_reports_queue_overshoot(capsys, tmp_path, chain_file):
    plan = tmp_path / "p.json"
    run(capsys, "solve", "--method", "linear", "--config", chain_file, "--out", plan)
    code, out, _ = run(capsys, "simulate", "--plan", plan, "--periods", 10,
                       "--trace", tmp_path / "t.csv")
    assert code == 0
    assert "FAIL q2" in out and "PASS e2e delay" in out
    assert "overall: FAIL" in out


def test_compare(capsys, chain_file):
    code, out, _ = run(capsys, "compare", "--config", chain_file)
    assert code == 0
    assert "lower cost: common-period" in out
    lb = [line for line in out.splitlines() if line.startswith("lower bound")][0]
    total = [line for line in out.splitlines() if line.startswith("total cost")][0]
    assert all(float(a) <= float(b) for a, b in zip(lb.split()[-2:], total.split()[-2:]))


def test_compare_sweep_is_deterministic(capsys):
    _, first, _ = run(capsys, "compare", "--sweep", 12, "--seed", 4)
    _, again, _ = run(capsys, "compare", "--sweep", 12, "--seed", 4, "--jobs", 2)
    assert first == again
    assert first.splitlines()[-1].startswith("wins: linear")
    _, other, _ = run(capsys, "compare", "--sweep", 12, "--seed", 5)
    assert other != first


def test_outputs_are_byte_identical(capsys, tmp_path, chain_file):
    outs = []
    for k in range(2):
        plan, trace = tmp_path / f"p{k}.json", tmp_path / f"t{k}.csv"
        run(capsys, "solve", "--method", "common-period", "--config", chain_file, "--out", plan)
        run(capsys, "simulate", "--plan", plan, "--periods", 5, "--disturbance", "2,0.3,0.5",
            "--trace", trace)
        outs.append((plan.read_bytes(), trace.read_bytes()))
    assert outs[0] == outs[1]


@pytest.mark.parametrize("argv", [
    ["simulate", "--plan", "x", "--periods", "0", "--trace", "t"],
    ["simulate", "--plan", "x", "--periods", "3", "--disturbance", "1,2", "--trace", "t"],
    ["simulate", "--plan", "x", "--periods", "3", "--disturbance", "0,1,1", "--trace", "t"],
    ["simulate", "--plan", "x", "--periods", "3", "--dt", "-1", "--trace", "t"],
    ["solve", "--method", "fastest", "--config", "c", "--out", "o"],
    [],
])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_compare_without_input_is_usage_error(capsys):
    code, _, err = run(capsys, "compare")
    assert code == 2 and "--config" in err


def test_validation_errors(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    doc = chain_to_dict(reference_chain())
    doc["functions"][0]["colour"] = "red"
    cfg.write_text(json.dumps(doc))
    code, _, err = run(capsys, "solve", "--method", "linear", "--config", cfg, "--out", tmp_path / "p")
    assert code == 3 and "colour" in err
    code, _, err = run(capsys, "solve", "--method", "linear", "--config", tmp_path / "none.json",
                       "--out", tmp_path / "p")
    assert code == 3 and "cannot read" in err


def test_zero_queue_cost_under_linear_is_validation_error(capsys, tmp_path):
    spec = ChainSpec(17.0, 0.02, [FunctionSpec(6.0, 6.0, 0.0, 0.01)])
    cfg = write_chain(tmp_path / "c.json", spec)
    code, _, err = run(capsys, "solve", "--method", "linear", "--config", cfg, "--out", tmp_path / "p")
    assert code == 3 and "queue_cost_rate" in err
    code, _, _ = run(capsys, "solve", "--method", "common-period", "--config", cfg,
                     "--out", tmp_path / "p")
    assert code == 0


def test_degenerate_designs_exit_4(capsys, tmp_path):
    exact = write_chain(tmp_path / "c.json", ChainSpec(16.0, 0.02, [FunctionSpec(8.0, 8.0, 0.5, 0.01)]))
    for method in ("linear", "common-period"):
        code, _, err = run(capsys, "solve", "--method", method, "--config", exact,
                           "--out", tmp_path / "p.json")
        assert code == 4 and "degenerate" in err
        assert (tmp_path / "p.json").exists()
    code, _, err = run(capsys, "simulate", "--plan", tmp_path / "p.json", "--periods", 2,
                       "--disturbance", "1,0,1", "--trace", tmp_path / "t.csv")
    assert code == 4


def test_disturbance_index_out_of_range(capsys, tmp_path, chain_file):
    plan = tmp_path / "p.json"
    run(capsys, "solve", "--method", "common-period", "--config", chain_file, "--out", plan)
    code, _, err = run(capsys, "simulate", "--plan", plan, "--periods", 2,
                       "--disturbance", "3,0,1", "--trace", tmp_path / "t.csv")
    assert code == 3 and "function 3" in err


def test_divergence_exit_5(capsys, tmp_path, chain_file):
    plan = tmp_path / "p.json"
    run(capsys, "solve", "--method", "common-period", "--config", chain_file, "--out", plan)
    doc = json.loads(plan.read_text())
    # an extra machine that never serves, with a tiny reservation
    doc["functions"][0].update(on_duration=0.0, qmax=1e-9)
    plan.write_text(json.dumps(doc))
    code, _, err = run(capsys, "simulate", "--plan", plan, "--periods", 20,
                       "--trace", tmp_path / "t.csv")
    assert code == 5 and "diverged" in err


def test_module_entry_point(tmp_path, chain_file):
    proc = subprocess.run([sys.executable, "-m", "chainplan", "compare", "--config", str(chain_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "lower cost" in proc.stdout
