import json
import subprocess
import sys
from pathlib import Path

import pytest

from pegsocket.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, main
from pegsocket.design import ErrorModel
from pegsocket.graph import build_graph, sink_report
from pegsocket.io import load_design

GOLDEN = Path(__file__).parent / "golden"
EXPECTED = json.loads((GOLDEN / "expected_reports.json").read_text())


def run(*argv):
    return main([str(a) for a in argv])


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_analyze_exit_codes_follow_contract(name, tmp_path):
    path = GOLDEN / f"{name}.json"
    code = run("analyze", "--design", path, "--samples", 3, "--out", tmp_path / "a.json")
    if EXPECTED[name]:
        assert code == EXIT_INPUT
        assert not (tmp_path / "a.json").exists()
        return
    # Oracle: the graph built directly from the library call.
    d, e = load_design(path)
    rep = sink_report(build_graph(d, e or ErrorModel(), samples=3))
    assert code == (EXIT_OK if rep.success else EXIT_FAIL)
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["insertion_success"] == rep.success
    assert (doc["stability"] is not None) == rep.success


def test_input_errors(tmp_path, capsys):
    assert run("analyze", "--design", tmp_path / "nope.json") == EXIT_INPUT
    assert "cannot read" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run("export", "--design", bad, "--format", "svg") == EXIT_INPUT
    assert run("simulate", "--design", GOLDEN / "v_socket.json", "--count", 0) == EXIT_INPUT
    assert run("sweep", "--cells", "8-8") == EXIT_INPUT
    assert run("sweep", "--cells", "five") == EXIT_INPUT
    assert run("optimize", "--design", GOLDEN / "v_socket.json", "--eps", 5.0) == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        run("export", "--design", GOLDEN / "v_socket.json", "--format", "svg", "--separation", 45)
    assert exc.value.code == EXIT_INPUT


def test_export_svg_matches_golden(tmp_path):
    out = tmp_path / "v.svg"
    assert run("export", "--design", GOLDEN / "v_socket.json", "--format", "svg", "--out", out) == EXIT_OK
    assert out.read_text() == (GOLDEN / "v_socket.svg").read_text()


def test_optimize_repairs_wedge(tmp_path):
    out, trace = tmp_path / "w.json", tmp_path / "t.json"
    code = run("optimize", "--design", GOLDEN / "wedge_trap.json", "--max-iters", 4,
               "--out", out, "--trace", trace)
    assert code == EXIT_OK
    d, e = load_design(out)
    assert sink_report(build_graph(d, e)).success
    steps = json.loads(trace.read_text())
    assert any(s["action"].startswith("rotate edge") for s in steps)


def test_simulate_reports_runs(capsys):
    code = run("simulate", "--design", GOLDEN / "wedge_trap.json", "--count", 9)
    doc = json.loads(capsys.readouterr().out)
    assert doc["total"] == 9 == len(doc["runs"])
    assert code == (EXIT_OK if doc["seated"] == 9 else EXIT_FAIL)


def test_outputs_repeat_byte_for_byte(tmp_path):
    for argv in (["analyze", "--samples", 3], ["export", "--format", "dot", "--samples", 3],
                 ["export", "--format", "obj", "--separation", 90]):
        texts = []
        for k in range(2):
            out = tmp_path / f"o{k}"
            run(*argv, "--design", GOLDEN / "funnel_4.json", "--out", out)
            texts.append(out.read_bytes())
        assert texts[0] == texts[1]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pegsocket.cli", "export", "--design",
                           str(GOLDEN / "v_socket.json"), "--format", "svg"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == EXIT_OK
    assert proc.stdout == (GOLDEN / "v_socket.svg").read_text()
