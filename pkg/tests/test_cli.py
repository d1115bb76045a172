import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from linkgap import __version__
from linkgap.cli import main
from linkgap.gap import UPPER_BOUND_LABEL

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"
L3 = '{"kind": "lp", "dim": 3, "p": 3}'
X3 = '{"kind": "power", "p": 3}'


def cx(name):
    return str(DATA / f"{name}.json")


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


# ---------------------------------------------------------------------------
# validate


@pytest.mark.parametrize("name", ["octahedron", "octahedron_antipodal", "tetrahedron_rotation", "triangle", "torus"])
def test_validate_passes(capsys, name):
    code, out = run(capsys, "validate", "--complex", cx(name))
    doc = json.loads(out)
    assert code == 0 and doc["validation"]["passed"]
    assert doc["version"] == __version__ and doc["seed"] == 0 and "tolerances" in doc


def test_validate_non_automorphism(capsys, tmp_path):
    data = json.loads(Path(cx("octahedron")).read_text())
    data["generators"] = [[1, 2, 0, 3, 4, 5]]  # maps triangle {0,2,4} to {1,0,4}
    code, out = run(capsys, "validate", "--complex", write(tmp_path, "x.json", data))
    assert code == 2 and json.loads(out)["validation"]["error"]["type"] == "NotAutomorphism"


def test_validate_dangling_edge(capsys, tmp_path):
    data = json.loads(Path(cx("octahedron")).read_text())
    data["vertices"] = 7
    data["edges"] = [[0, 6]]
    code, out = run(capsys, "validate", "--complex", write(tmp_path, "x.json", data))
    assert code == 2 and json.loads(out)["validation"]["error"]["type"] == "NonPure"


def test_validate_bad_json(capsys, tmp_path):
    assert main(["validate", "--complex", write(tmp_path, "x.json", "{not json")]) == 1
    assert main(["validate", "--complex", str(tmp_path / "missing.json")]) == 1
    assert main(["validate", "--complex", write(tmp_path, "y.json", {"vertices": 3})]) == 1


# ---------------------------------------------------------------------------
# gap


def test_gap_octahedron(capsys):
    code, out = run(capsys, "gap", "--complex", cx("octahedron"))
    g = json.loads(out)["gap"]
    assert code == 0 and g["kappa"] == pytest.approx(0.5) and g["method"] == "spectral"


def test_gap_torus_false(capsys):
    code, out = run(capsys, "gap", "--complex", cx("torus"))
    assert code == 3 and not json.loads(out)["gap"]["verdict"]


def test_gap_variational_label(capsys):
    code, out = run(capsys, "gap", "--complex", cx("octahedron"), "--space", L3, "--gauge", X3, "--restarts", "4")
    g = json.loads(out)["gap"]
    assert code in (0, 4) and g["label"] == UPPER_BOUND_LABEL and g["method"] == "variational"
    assert all(e["label"] == UPPER_BOUND_LABEL for e in g["entries"])


def test_gap_spectral_refused_outside_regime(capsys):
    assert main(["gap", "--complex", cx("octahedron"), "--space", L3, "--method", "spectral"]) == 1


def test_gap_bad_space(capsys):
    assert main(["gap", "--complex", cx("octahedron"), "--space", '{"kind": "sphere"}']) == 1


# ---------------------------------------------------------------------------
# iterate


def test_iterate_octahedron(capsys, tmp_path):
    csv_path = tmp_path / "t.csv"
    code, out = run(capsys, "iterate", "--complex", cx("octahedron_antipodal"), "--map", cx("negation_r3"),
                    "--csv", str(csv_path))
    lines = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and lines[-1] == {"exit_code": 0}
    head, summary = lines[0], lines[-2]["summary"]
    assert head["gap"]["kappa"] == pytest.approx(0.5) and head["config"]["map"] == cx("negation_r3")
    assert summary["converged"] and summary["all_decay_ok"] and summary["limit_is_fixed"]
    assert csv_path.read_text().startswith("step,energy,")


def test_iterate_torus_non_contractive(capsys):
    code, out = run(capsys, "iterate", "--complex", cx("torus"), "--space", '{"kind": "euclidean", "dim": 2}')
    assert code == 3 and json.loads(out.splitlines()[-2])["summary"]["non_contractive"]


def test_iterate_constant_start(capsys, tmp_path):
    values = {str(u): [1.0, 2.0, 3.0] for u in range(6)}
    code, out = run(capsys, "iterate", "--complex", cx("octahedron"), "--map", write(tmp_path, "m.json", {"values": values}))
    assert code == 0 and json.loads(out.splitlines()[-2])["summary"]["steps"] == 0


def test_iterate_budget_exhausted(capsys):
    assert main(["iterate", "--complex", cx("octahedron"), "--steps", "3"]) == 5


def test_iterate_inconsistent_map(capsys, tmp_path):
    # vertex 3 is fixed by the rotation; its value must lie on the diagonal
    m = json.loads(Path(cx("cyclic_r3")).read_text())
    m["values"] = {"0": [0.0, 0.0, 0.0], "3": [1.0, 0.0, 0.0]}
    assert main(["iterate", "--complex", cx("tetrahedron_rotation"), "--map", write(tmp_path, "m.json", m)]) == 2


# ---------------------------------------------------------------------------
# report, determinism, threads


def test_report_codes(capsys):
    code, out = run(capsys, "report", "--complex", cx("tetrahedron_rotation"), "--map", cx("cyclic_r3"))
    doc = json.loads(out)
    assert code == 0 and doc["exit_codes"] == {"validate": 0, "gap": 0, "iterate": 0}
    code, out = run(capsys, "report", "--complex", cx("torus"))
    assert code == 3 and json.loads(out)["exit_codes"]["gap"] == 3


def _cli(args, env_extra=None, cwd=None):
    env = {**os.environ, **(env_extra or {})}
    return subprocess.run([sys.executable, "-m", "linkgap.cli", *args], capture_output=True, env=env, cwd=cwd)


@pytest.mark.parametrize("threads", ["1", "4"])
def test_byte_identical_reruns(tmp_path, threads):
    args = ["report", "--complex", cx("octahedron_antipodal"), "--map", cx("negation_r3"), "--seed", "7"]
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        p = _cli(args + ["--out", str(out)], {"LINKGAP_THREADS": threads})
        assert p.returncode == 0, p.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_thread_count_does_not_change_output(tmp_path):
    args = ["gap", "--complex", cx("tetrahedron"), "--space", L3, "--gauge", X3, "--restarts", "2"]
    a = _cli(args, {"LINKGAP_THREADS": "1"}).stdout
    b = _cli(args, {"LINKGAP_THREADS": "3"}).stdout
    assert a == b and a


def test_seed_changes_iteration(tmp_path):
    a = _cli(["iterate", "--complex", cx("octahedron"), "--seed", "1"]).stdout
    b = _cli(["iterate", "--complex", cx("octahedron"), "--seed", "2"]).stdout
    assert a != b


def test_bad_thread_count():
    p = _cli(["gap", "--complex", cx("octahedron")], {"LINKGAP_THREADS": "many"})
    assert p.returncode == 1 and b"LINKGAP_THREADS" in p.stderr
