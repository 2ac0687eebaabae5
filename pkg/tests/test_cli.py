import csv
import json
import math

import pytest

from sharp_poincare.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_TAIL, dumps, main

INTERVAL = """
dim = 1
p = 2
q = {q}
h = "1/100"
domain = {{ family = "interval", params = {{ half_width = 1.0 }} }}
"""

SLAB = """
dim = 2
p = 2
q = 4
h = "1/8"
half_extent = {L}
domain = "slab"
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def solve(tmp_path, text, out="out", *extra):
    return main(["solve", "--config", write(tmp_path, text), "--out", str(tmp_path / out), *extra])


def test_solve_interval_writes_outputs(tmp_path):
    assert solve(tmp_path, INTERVAL.format(q=2)) == EXIT_OK
    out = tmp_path / "out"
    result = json.loads((out / "result.json").read_text())
    assert result["lambda"] == pytest.approx(math.pi**2 / 4, rel=1e-3)
    assert result["converged"] is True
    manifest = json.loads((out / "manifest.json").read_text())
    assert {o["path"] for o in manifest["outputs"]} >= {"result.json", "extremal.csv", "energy.csv"}
    rows = list(csv.reader((out / "energy.csv").open()))
    assert rows[0] == ["iteration", "energy", "residual"]


def test_solve_is_byte_identical(tmp_path):
    text = INTERVAL.format(q=4)
    assert solve(tmp_path, text, "a") == EXIT_OK
    assert solve(tmp_path, text, "b") == EXIT_OK
    for name in ("result.json", "extremal.csv", "energy.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_json_config_accepted(tmp_path):
    cfg = {"N": 1, "p": 2, "q": "inf", "spacing": 0.01, "domain": {"family": "interval", "params": {"half_width": 1.0}}}
    path = write(tmp_path, json.dumps(cfg), "cfg.json")
    assert main(["solve", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "result.json").read_text())["lambda"] == pytest.approx(2.0, rel=1e-2)


@pytest.mark.parametrize(
    "text",
    [
        SLAB.format(L=4).replace("q = 4", "q = 2"),  # q = p on an unbounded domain
        SLAB.format(L=4).replace("q = 4", "q = 1"),  # q < p
        SLAB.format(L=4).replace("q = 4", 'q = "inf"'),  # q = inf needs p > N
        SLAB.format(L=4).replace('domain = "slab"', 'domain = "nowhere"'),
        "dim = 2\np = 2\n",
        "dim = [",
    ],
)
def test_config_errors_exit_2(tmp_path, text):
    assert solve(tmp_path, text) == EXIT_CONFIG


def test_missing_config_exit_2(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.toml"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_nonconvergence_exit_3(tmp_path):
    text = INTERVAL.format(q=4) + "\n[solver]\nmax_iter = 2\n"
    assert solve(tmp_path, text) == EXIT_SOLVER
    assert json.loads((tmp_path / "out" / "result.json").read_text())["converged"] is False


def test_decay_ok_and_unresolved(tmp_path):
    assert solve(tmp_path, SLAB.format(L=12), "wide") == EXIT_OK
    assert main(["decay", str(tmp_path / "wide"), "--out", str(tmp_path / "wide")]) == EXIT_OK
    rep = json.loads((tmp_path / "wide" / "decay.json").read_text())
    assert rep["recursion_pass"] is True
    assert (tmp_path / "wide" / "tail.csv").exists()
    assert solve(tmp_path, SLAB.format(L=3), "narrow") == EXIT_OK
    assert main(["decay", str(tmp_path / "narrow" / "result.json"), "--out", str(tmp_path / "narrow")]) == EXIT_TAIL


def test_sweep_confinement(tmp_path):
    text = INTERVAL.format(q=4) + '\n[sweep]\nkind = "confinement"\nschedule = [0, 3, 15]\n'
    path = write(tmp_path, text)
    assert main(["sweep", "--config", path, "--out", str(tmp_path / "s")]) == EXIT_OK
    rows = list(csv.reader((tmp_path / "s" / "sweep.csv").open()))
    assert rows[0][:2] == ["n", "lambda"]
    assert rows[-1][:2] == ["status", "complete"]
    assert all(r[-1] == "true" for r in rows[1:-1])


def test_sweep_incomplete_exit_3(tmp_path):
    text = INTERVAL.format(q=4) + '\n[solver]\nmax_iter = 2\n[sweep]\nkind = "q"\nschedule = [4, 6]\n'
    path = write(tmp_path, text)
    assert main(["sweep", "--config", path, "--out", str(tmp_path / "s")]) == EXIT_SOLVER
    rows = list(csv.reader((tmp_path / "s" / "sweep.csv").open()))
    assert rows[-1][:2] == ["status", "incomplete"]


def test_sweep_unknown_kind(tmp_path):
    path = write(tmp_path, INTERVAL.format(q=4) + '\n[sweep]\nkind = "spiral"\nschedule = [1]\n')
    assert main(["sweep", "--config", path, "--out", str(tmp_path / "s")]) == EXIT_CONFIG


def test_gallery_single_and_unknown(tmp_path):
    assert main(["gallery", "box", "--out", str(tmp_path), "--half-extent", "4"]) == EXIT_OK
    rep = json.loads((tmp_path / "gallery_box.json").read_text())
    assert rep["steiner"] == "validated"
    assert main(["gallery", "moebius", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["gallery", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_symmetrize_stored_field(tmp_path):
    assert solve(tmp_path, INTERVAL.format(q=4)) == EXIT_OK
    field = str(tmp_path / "out" / "extremal.csv")
    assert main(["symmetrize", field, "--out", str(tmp_path / "sym")]) == EXIT_OK
    rep = json.loads((tmp_path / "sym" / "rearrangement.json").read_text())
    assert rep["equimeasurable"] is True
    assert abs(rep["pz_defect"]) < 1e-12


def test_dumps_float_format():
    text = dumps({"b": 0.1, "a": [math.inf, math.nan, 1], "c": True})
    assert json.loads(text) == {"a": ["inf", "nan", 1], "b": 0.1, "c": True}
    assert "0.10000000000000001" in text
    assert text.index('"a"') < text.index('"b"')
