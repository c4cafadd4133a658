import csv
import json
import math
import os

import numpy as np
import pytest

from qcgeo.cli import TRAJECTORY_HEADER, main, parse_spec, run
from qcgeo.errors import SpecError
from qcgeo.metric import trajectory_length


def write(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


SU2_ENDS = {"group": "su2", "start": [math.pi / 8, math.pi / 8], "end": [5 * math.pi / 8, 7 * math.pi / 8]}


def test_minimal_spec_defaults():
    spec = parse_spec({"group": "su2", "start": [1, 0, 0], "end": [1.2, 0.3, 0.1]}, "bvp")
    assert spec.weights == (1.0, 1.0, 1.0) and spec.seed == 0 and spec.bvp_config().steps == 2001


@pytest.mark.parametrize("doc,msg", [
    ({"group": "su2", "weights": [1, 1, 0], "start": [1, 0, 0], "end": [1, 1, 1]}, "weights must be > 0"),
    ({"group": "su2", "start": [0, 0, 0], "end": [1, 1, 1]}, "coordinate on singular boundary"),
    ({"group": "su2", "start": [1, 0, 0], "end": [1, 1, 1], "colour": 1}, "colour"),
    ({"group": "su2", "start": [1, 0, 0]}, "end"),
    ({"group": "su3", "start": [1, 0, 0], "end": [1, 1, 1]}, "group"),
    ({"group": "su2", "start": [1, 0, 0], "end": [1, 1, 1], "solver": {"steps": 3}}, "steps"),
    ({"group": "su2", "start": [1, 0, 0], "end": [1, 1, 1], "solver": {"tol": 3}}, "tol"),
    ({"group": "su2", "start": [1, 0], "end": [1, 1, 1]}, "start"),
])
def test_spec_rejections(doc, msg):
    with pytest.raises(SpecError, match=msg):
        parse_spec(doc, "bvp")


def test_grid_forms():
    spec = parse_spec({"group": "su2", "start": [1, 0, 0], "end": [1, 1], "eta_grid": {"start": -1, "stop": 0, "num": 5}},
                      "fiber-sweep")
    assert spec.eta_grid == [-1.0, -0.75, -0.5, -0.25, 0.0]
    with pytest.raises(SpecError, match="eta_grid"):
        parse_spec({"group": "su2", "start": [1, 0, 0], "end": [1, 1], "eta_grid": []}, "fiber-sweep")


def test_mode_mismatch():
    with pytest.raises(SpecError, match="mode"):
        parse_spec({"group": "su2", "mode": "bvp"}, "phase-opt")


def test_reduced_great_circle(tmp_path):
    status, files = run(parse_spec(SU2_ENDS, "reduced"), str(tmp_path))
    assert status == 0
    header, data = read_csv(tmp_path / "reduced_trajectory.csv")
    assert header == TRAJECTORY_HEADER + ["n_x", "n_y", "n_z"]
    n_i, n_f = data[0, -3:], data[-1, -3:]
    assert data[-1, 11] == pytest.approx(0.5 * math.acos(np.dot(n_i, n_f)), abs=1e-6)
    assert np.all(np.diff(data[:, 11]) >= 0)
    assert np.all((data[:, 1] > 0) & (data[:, 1] < math.pi))


def test_cum_cost_equals_length(tmp_path):
    from qcgeo.trajectory import Trajectory

    run(parse_spec({"group": "su11", "start": [1.5, 0, 0], "end": [1.0, 2.5, -0.4]}, "bvp"), str(tmp_path))
    _, data = read_csv(tmp_path / "bvp_trajectory.csv")
    traj = Trajectory("su11", (1, 1, 1), data[:, 0], data[:, 1:4], data[:, 4:7])
    assert data[-1, 11] == pytest.approx(trajectory_length(traj), abs=1e-9)
    assert np.all(data[:, 1] > 0)


def test_physical_time_scaling(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(parse_spec(dict(SU2_ENDS), "reduced"), str(a))
    run(parse_spec(dict(SU2_ENDS, t_f=2.0), "reduced"), str(b))
    _, da = read_csv(a / "reduced_trajectory.csv")
    _, db = read_csv(b / "reduced_trajectory.csv")
    assert np.allclose(db[:, 0], 2 * da[:, 0])
    assert np.allclose(db[:, 7:10], 0.5 * da[:, 7:10])
    assert np.allclose(db[:, 11], da[:, 11])


def test_deterministic_output(tmp_path):
    doc = {"group": "su2", "start": [math.pi / 8, math.pi / 8, 0], "end": [5 * math.pi / 8, 7 * math.pi / 8],
           "eta_grid": [-1.0, -0.5, 0.0], "seed": 7}
    for d in ("x", "y"):
        run(parse_spec(doc, "fiber-sweep"), str(tmp_path / d), threads=2 if d == "y" else 1)
    for name in ("fiber-sweep_trajectory.csv", "fiber-sweep_sweep.csv"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
    manifest = json.loads((tmp_path / "x" / "fiber-sweep_manifest.json").read_text())
    assert manifest["spec"]["seed"] == 7 and "wall_time_s" in manifest


def test_main_exit_codes(tmp_path, capsys):
    assert main(["bvp", "--spec", write(tmp_path, {"group": "su2", "weights": [1, 1, 0], "start": [1, 0, 0],
                                                    "end": [1, 1, 1]})]) == 1
    assert "weights must be > 0" in capsys.readouterr().err
    assert main(["bvp", "--spec", str(tmp_path / "missing.json")]) == 1
    bad = write(tmp_path, {"group": "su11", "start": [0.4, 0, 0], "end": [1.4, 2.5, 1.5], "solver": {"restarts": 0}})
    assert main(["bvp", "--spec", bad, "--out", str(tmp_path / "o")]) == 2
    manifest = json.loads((tmp_path / "o" / "bvp_manifest.json").read_text())
    assert manifest["status"] == 2 and manifest["error"]


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("QC_GEO_THREADS", "2")
    spec = write(tmp_path, {"group": "su2", "start": [1.0, 0, 0], "end": [1.2, 0.5], "eta_grid": [-0.2, 0.0]})
    assert main(["fiber-sweep", "--spec", spec, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "fiber-sweep_manifest.json").read_text())["threads"] == 2
    monkeypatch.setenv("QC_GEO_THREADS", "many")
    assert main(["fiber-sweep", "--spec", spec, "--out", str(tmp_path)]) == 1


def test_verify_round_trip(tmp_path):
    run(parse_spec(SU2_ENDS, "reduced"), str(tmp_path))
    spec = {"group": "su2", "trajectory": str(tmp_path / "reduced_trajectory.csv"), "output": "chk"}
    status, _ = run(parse_spec(spec, "verify"), str(tmp_path))
    assert status == 0
    report = json.loads((tmp_path / "chk_report.json").read_text())
    assert report["final_infidelity"] < 1e-8 and report["max_param_deviation"] < 1e-6


def test_verify_detects_tampering(tmp_path):
    run(parse_spec(SU2_ENDS, "reduced"), str(tmp_path))
    path = tmp_path / "reduced_trajectory.csv"
    lines = path.read_text().splitlines()
    cells = lines[-1].split(",")
    cells[3] = repr(float(cells[3]) + 0.01)
    lines[-1] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")
    status, _ = run(parse_spec({"group": "su2", "trajectory": str(path)}, "verify"), str(tmp_path))
    assert status == 2


def test_perturb_scan_and_oracle(tmp_path):
    status, _ = run(parse_spec({"group": "su2", "delta_grid": [-0.2, 0.0, 0.2]}, "perturb-scan"), str(tmp_path))
    assert status == 0
    header, data = read_csv(tmp_path / "perturb-scan_sweep.csv")
    assert header == ["grid_value", "length", "converged"] and data[1, 1] < data[0, 1]
    spec = {"group": "su2", "start": [1.0, 0.0, 0.0], "end": [1.4, 0.6, -0.2], "oracle": {"n_knots": 12}}
    assert run(parse_spec(spec, "oracle"), str(tmp_path))[0] == 0
    diag = json.loads((tmp_path / "oracle_manifest.json").read_text())["diagnostics"]["oracle"]
    assert 0 <= diag["relative_gap"] < 1e-2


def test_tabulated_path(tmp_path):
    t = np.linspace(0, 1, 300)
    doc = {"group": "su2", "path": {"t": t.tolist(), "c1": (t + 0.2).tolist(), "phi": ((t + 0.2) ** 2).tolist()},
           "eta_grid": {"start": -0.8, "stop": 0.0, "num": 9}, "oracle": {"enabled": False}}
    assert run(parse_spec(doc, "phase-opt"), str(tmp_path))[0] == 0
    diag = json.loads((tmp_path / "phase-opt_manifest.json").read_text())["diagnostics"]["phase"]
    assert diag["sweep_argmin_eta"] == pytest.approx(-0.461, abs=5e-3)
    assert "reported_eta_final" not in diag
