import json

import numpy as np
import pytest

from nodal_lab import cli, mesh as M


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_icosphere(tmp_path, capsys):
    out = tmp_path / "s.off"
    code, _, _ = run(["gen", "--shape", "icosphere", "--depth", "4", "--out", str(out)], capsys)
    assert code == 0 and M.read_off(out).n_vertices == 2562


def test_gen_torus_writes_sidecar(tmp_path, capsys):
    out = tmp_path / "t.off"
    assert run(["gen", "--shape", "torus", "--n", "16", "--out", str(out)], capsys)[0] == 0
    assert json.loads(out.with_suffix(".json").read_text())["geometry"] == "flat-torus"
    assert M.read_off(out).geometry == M.FLAT_TORUS


def test_gen_disk_single_loop(tmp_path, capsys):
    out = tmp_path / "d.off"
    run(["gen", "--shape", "disk", "--depth", "3", "--out", str(out)], capsys)
    assert M.read_off(out).boundary_loops() == 1


def test_eig_closed_and_dirichlet(tmp_path, capsys):
    sphere, disk = tmp_path / "s.off", tmp_path / "d.off"
    run(["gen", "--shape", "icosphere", "--depth", "2", "--out", str(sphere)], capsys)
    run(["gen", "--shape", "disk", "--depth", "5", "--out", str(disk)], capsys)
    code, out, _ = run(["eig", "--mesh", str(sphere), "--k", "4"], capsys)
    assert code == 0 and abs(json.loads(out)["lambda"][0]) < 1e-10
    code, out, _ = run(["eig", "--mesh", str(disk), "--k", "1", "--dirichlet"], capsys)
    assert json.loads(out)["lambda"][0] == pytest.approx(5.7832, rel=2e-3)
    code, _, err = run(["eig", "--mesh", str(sphere), "--k", "10000"], capsys)
    assert code == 2 and "error" in err


def test_nodal_command(tmp_path, capsys):
    prof = tmp_path / "p.csv"
    code, out, _ = run(["nodal", "--mode", "sphere:l=3,m=0", "--depth", "3", "--profile", str(prof)], capsys)
    assert code == 0 and json.loads(out)["n_domains"] == 4
    assert prof.read_text().startswith("r,mu\n")


def test_check_nodal_tube_passes(tmp_path, capsys):
    csv = tmp_path / "r.csv"
    code, out, _ = run(["check", "nodal-tube", "--mode", "sphere:l=5,m=0", "--depth", "5",
                        "--csv", str(csv)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["pass_all"] and rep["tol_h"] > 0
    assert csv.read_text().splitlines()[0] == "x,lhs,rhs,slack,pass"


def test_check_bsep_disk(capsys):
    code, out, _ = run(["check", "bsep", "--shape", "disk", "--eta", "0.25", "--tier", "oracle"], capsys)
    rec = json.loads(out)["records"][0]
    assert code == 0 and rec["lhs"] == pytest.approx(0.5) and rec["rhs"] == pytest.approx(0.9923, abs=1e-3)


def test_violation_exit_code(tmp_path, capsys):
    # an eigenpair file claiming a far too large eigenvalue must fail the decay bound;
    # kappa = 0 because 2 h sqrt(lambda) > 1 here would excuse any profile
    mesh, eig = tmp_path / "t.off", tmp_path / "e.json"
    run(["gen", "--shape", "torus", "--n", "16", "--out", str(mesh)], capsys)
    m = M.read_off(mesh)
    field = np.cos(2 * np.pi * m.vertices[:, 0])
    eig.write_text(json.dumps({"lambda": [0.0, 1e4], "fields": [[1.0] * m.n_vertices, field.tolist()],
                               "residuals": [0.0, 0.0]}))
    code, out, err = run(["check", "nodal-tube", "--mesh", str(mesh), "--eig", str(eig), "--index", "1",
                          "--kappa", "0"], capsys)
    assert code == 1 and not json.loads(out)["pass_all"] and "VIOLATION" in err


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"shape": "strip", "tier": "oracle", "eta": [0.5]}))
    code, out, _ = run(["check", "bsep", "--config", str(cfg)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["records"][0]["lhs"] == pytest.approx(0.25)
    assert rep["params"]["config"]["shape"] == "strip"
    code, out, _ = run(["check", "bsep", "--config", str(cfg), "--eta", "0.1"], capsys)
    assert json.loads(out)["records"][0]["x"] == 0.1


def test_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(["check", "tail", "--config", str(bad)], capsys)
    assert code == 2 and err
    assert run(["check", "tail"], capsys)[0] == 2
    assert run(["check", "bsep", "--shape", "disk", "--eta", "1.5"], capsys)[0] == 2
    assert run(["suite", "nope"], capsys)[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["check", "nonsense"])
    assert exc.value.code == 2


def test_fit_command(tmp_path, capsys):
    rep = tmp_path / "tail.json"
    assert run(["check", "tail", "--mode", "torus:kx=2", "--n", "32", "--out", str(rep)], capsys)[0] == 0
    code, out, _ = run(["fit", "--target", "tail-C", str(rep)], capsys)
    assert code == 0 and json.loads(out)["value"] > 0
    code, out, _ = run(["fit", "--target", "lemma31-c", "--mode", "sphere:l=1"], capsys)
    assert json.loads(out)["value"] == pytest.approx(2.2214, abs=1e-4)


def test_suite_convergence_csv(tmp_path, capsys):
    csv = tmp_path / "conv.csv"
    code, _, _ = run(["suite", "convergence", "--out", str(tmp_path / "c.json"), "--csv", str(csv)], capsys)
    lines = csv.read_text().splitlines()
    assert code == 0 and lines[0] == "ladder,level,h,tol_h,sup_gap,pass" and len(lines) == 31
