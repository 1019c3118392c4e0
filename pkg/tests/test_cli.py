import json
from pathlib import Path

import pytest

from subinfer import cli
from subinfer.corpus import CORPUS
from subinfer.inference import KernelContractError

DEMOS = Path(__file__).resolve().parent.parent / "demos"


def _prog(tmp_path, name):
    path = tmp_path / (name + ".prog")
    path.write_text(CORPUS[name].source)
    return str(path)


def _meta(tmp_path, obj, name="m.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


GIBBS = {"blackbox": "enum-gibbs"}


def _mix(*groups):
    w = "1/%d" % len(groups)
    return {"mix": [{"weight": w, "strategy": {"by-labels": list(g)}, "sub": GIBBS}
                    for g in groups]}


def test_run_fair_coin(tmp_path, capsys):
    code, out = _run(capsys, "run", _prog(tmp_path, "fair_coin"), _meta(tmp_path, GIBBS),
                     "--seed", 7, "--iters", 10_000)
    assert code == 0
    rep = json.loads(out)
    assert abs(rep["marginals"]["x"]["#t"] - 0.5) < 0.02
    assert rep["exact"]["tv"] < 0.02
    assert rep["version"] == cli.__version__ and rep["tool"] == "subinfer"
    assert rep["config"]["seed"] == 7


def test_run_with_no_kept_samples(tmp_path, capsys):
    code, out = _run(capsys, "run", _prog(tmp_path, "two_flip"), _meta(tmp_path, GIBBS),
                     "--iters", 50, "--burnin", 50)
    assert code == 0
    rep = json.loads(out)
    assert rep["samples"] == {"count": 0, "traces": []}


def test_run_is_deterministic(tmp_path, capsys):
    args = ("run", _prog(tmp_path, "product_2x2"), _meta(tmp_path, _mix(["x"], ["y"])),
            "--iters", 500, "--chains", 3, "--seed", 4)
    first = _run(capsys, *args)
    assert first == _run(capsys, *args)
    assert first[0] == 0


def test_run_writes_out_file(tmp_path, capsys):
    dest = tmp_path / "report.json"
    code, out = _run(capsys, "run", _prog(tmp_path, "fair_coin"), _meta(tmp_path, GIBBS),
                     "--iters", 10, "--out", dest)
    assert code == 0 and out == ""
    assert json.loads(dest.read_text())["samples"]["count"] == 10


def test_bad_weight_reports_path(capsys):
    code, out = _run(capsys, "run", DEMOS / "programs" / "product.prog",
                     DEMOS / "metaprograms" / "bad_weight.json")
    assert code == 1
    err = json.loads(out)["error"]
    assert err["type"] == "MetaprogramError" and err["path"] == "mix[0].weight"


def test_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.prog"
    bad.write_text("(assume x (flip 1/2)")
    meta = _meta(tmp_path, GIBBS)
    for argv in (["run", tmp_path / "missing.prog", meta],
                 ["run", bad, meta],
                 ["graph", bad],
                 ["run", _prog(tmp_path, "fair_coin"), meta, "--iters", 1, "--burnin", 2],
                 ["run", _prog(tmp_path, "fair_coin"), meta, "--thin", 0]):
        code, out = _run(capsys, *argv)
        assert code == 1, argv
        assert "error" in json.loads(out)
    notjson = tmp_path / "x.json"
    notjson.write_text("{")
    assert _run(capsys, "run", _prog(tmp_path, "fair_coin"), notjson)[0] == 1


def test_internal_errors_exit_2(tmp_path, capsys, monkeypatch):
    def boom(args):
        raise KernelContractError("kernel returned a trace of a different program")
    monkeypatch.setitem(cli._COMMANDS, "run", boom)
    code, out = _run(capsys, "run", "a", "b")
    assert code == 2
    assert json.loads(out)["error"]["type"] == "KernelContractError"


def test_enumerate(tmp_path, capsys):
    code, out = _run(capsys, "enumerate", _prog(tmp_path, "two_flip"))
    rep = json.loads(out)
    assert code == 0
    assert [t["prob"] for t in rep["traces"]] == ["27/34", "7/34"]
    assert rep["total_density"] == "17/50"
    code, out = _run(capsys, "enumerate", _prog(tmp_path, "deterministic"))
    assert [t["prob"] for t in json.loads(out)["traces"]] == ["1"]


def test_enumerate_over_cap(tmp_path, capsys):
    code, out = _run(capsys, "enumerate", _prog(tmp_path, "chain3"), "--cap", 4)
    assert code == 1
    assert "enumeration cap exceeded" in json.loads(out)["error"]["message"]


def test_check_xor(tmp_path, capsys):
    prog = _prog(tmp_path, "xor")
    code, out = _run(capsys, "check", prog, _meta(tmp_path, _mix(["x"], ["y"])), "--iters", 300)
    rep = json.loads(out)
    assert code == 0
    assert rep["connectivity"] is False and rep["irreducible"] is False
    assert rep["connectivity_witness"] == ["[#t #t]"]
    joint = {"mix": [{"weight": "1/3", "strategy": {"by-labels": g}, "sub": GIBBS}
                     for g in (["x"], ["y"], ["x", "y"])]}
    code, out = _run(capsys, "check", prog, _meta(tmp_path, joint, "j.json"), "--iters", 300)
    rep = json.loads(out)
    assert rep["connectivity"] and rep["irreducible"] and rep["aperiodic"]
    assert all(r["reversible"] for r in rep["reversible"])
    assert rep["stationarity_residual"] == "0"
    assert [row["iters"] for row in rep["tv_table"]] == [100, 300]


def test_check_all_choices(tmp_path, capsys):
    meta = {"mix": [{"weight": "1", "strategy": {"all-choices": True}, "sub": GIBBS}]}
    code, out = _run(capsys, "check", _prog(tmp_path, "chain3"), _meta(tmp_path, meta),
                     "--iters", 0)
    rep = json.loads(out)
    assert code == 0
    assert rep["connectivity"] and rep["irreducible"] and rep["aperiodic"]
    assert rep["connectivity_mode"] == "exact"
    assert rep["stationarity_residual"] == "0"
    assert rep["premises"] == [] and rep["tv_table"] == []


def test_graph(tmp_path, capsys):
    code, out = _run(capsys, "graph", _prog(tmp_path, "two_flip"))
    assert code == 0 and out.startswith("digraph")
    assert out.count("style=filled") == 2 and "style=dashed" in out
    code, out = _run(capsys, "graph", _prog(tmp_path, "deterministic"))
    assert out.count("style=filled") == 0


def test_extract(tmp_path, capsys):
    code, out = _run(capsys, "extract", _prog(tmp_path, "two_flip"), "--labels", "x")
    rep = json.loads(out)
    assert code == 0
    assert rep["subprogram"].count("(observe") == 1
    assert len(rep["subproblem"]["absorbing"]) == 1


@pytest.mark.parametrize("prog", sorted(p.name for p in (DEMOS / "programs").glob("*.prog")))
def test_demo_programs_enumerate(prog, capsys):
    code, out = _run(capsys, "enumerate", DEMOS / "programs" / prog)
    assert code == 0
    assert json.loads(out)["traces"]
