import csv
import io

import numpy as np
import pytest

from strang_lab.cli import main
from strang_lab.studies import (CSV_COLUMNS, StudySpec, UnknownNameError, normalize_scheme,
                                run_anisotropy_sweep, run_bound_audit, run_convergence,
                                run_projector_rates)


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_normalize_scheme():
    assert normalize_scheme("vem", 2) == "vem2"
    assert normalize_scheme("dg1", 1) == "dg1"
    assert normalize_scheme("mpfa", mpfa_strategy="l") == "mpfa-l"
    with pytest.raises(UnknownNameError):
        normalize_scheme("dg1", 2)
    with pytest.raises(UnknownNameError):
        normalize_scheme("fem")


def test_spec_validation():
    with pytest.raises(ValueError):
        StudySpec("tpfa", levels=1)
    with pytest.raises(UnknownNameError):
        StudySpec("tpfa", case="bogus")
    s = StudySpec("hmm", mesh="perturbed:0.1:5")
    assert (s.mesh, s.perturb, s.mesh_seed) == ("cartesian", 0.1, 5)
    with pytest.raises(ValueError):
        StudySpec("hmm", mesh="voronoi")


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("STRANG_LAB_SEED", "17")
    assert StudySpec("tpfa").seed == 17
    monkeypatch.delenv("STRANG_LAB_SEED")
    assert StudySpec("tpfa").seed == 0


def test_affine_exact_csv():
    rep = run_convergence(StudySpec("tpfa", case="affine", n0=4, levels=2), write=False)
    text = rep.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = read_csv(text)
    for r in rows:
        for col in ("err_energy", "err_l2", "cons_dual"):
            assert float(r[col]) <= 1e-9
    assert rows[1]["eoc_energy"] == "exact" and rows[1]["eoc_l2"] == "exact"
    assert rep.passed


def test_csv_deterministic(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"run{i}.csv"
        run_convergence(StudySpec("mpfa-l", mesh="perturbed:0.1:3", n0=4, levels=2, out=str(p)))
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_eoc_columns_are_consecutive_log_ratios():
    rep = run_convergence(StudySpec("hmm", n0=4, levels=3), write=False)
    r1, r2 = rep.rows[1], rep.rows[2]
    expected = np.log(r1.err_energy / r2.err_energy) / np.log(r1.h / r2.h)
    assert r2.eoc_energy == pytest.approx(expected)
    assert rep.slope("err_energy") > 0.8


def test_sweep_single_eps_ratio_one():
    rep = run_anisotropy_sweep(StudySpec("tpfa", n0=4, levels=2), (1.0,), write=False)
    assert rep.ratio == 1.0


def test_bound_audit_vem_equality():
    rep = run_bound_audit(StudySpec("vem1", n0=4, levels=2), write=False)
    for r in rep.rows:
        assert abs(r.slack_upper) <= 1e-10
        assert r.aubin_nitsche.residual <= 1e-9


def test_projector_rates_deterministic():
    _, a = run_projector_rates("oblique", 2, 1e-2, levels=2, n0=2)
    _, b = run_projector_rates("oblique", 2, 1e-2, levels=2, n0=2)
    assert a == b


# ----------------------------------------------------------------------
def test_cli_study(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["study", "--scheme", "vem", "--k", "1", "--case", "affine", "--levels", "4:2",
                 "--out", str(out)])
    assert code == 0
    rows = read_csv(out.read_text())
    assert len(rows) == 2


def test_cli_stdout(capsys):
    assert main(["study", "--scheme", "tpfa", "--case", "affine", "--levels", "2:2"]) == 0
    assert capsys.readouterr().out.startswith("level,h,ndof")


@pytest.mark.parametrize("argv", [
    ["study", "--scheme", "fem", "--levels", "2:2"],
    ["study", "--scheme", "tpfa", "--case", "nope", "--levels", "2:2"],
    ["study", "--scheme", "dg1", "--k", "2", "--levels", "2:2"],
])
def test_cli_unknown_names(argv):
    assert main(argv) == 2


def test_cli_tpfa_admissibility():
    assert main(["study", "--scheme", "tpfa", "--mesh", "perturbed:0.2:1", "--levels", "4:2"]) == 3


def test_cli_noncoercive_writes_report(tmp_path):
    out = tmp_path / "nc.csv"
    code = main(["study", "--scheme", "dg1", "--eta", "0.1", "--levels", "4:2", "--out", str(out)])
    assert code == 4
    rows = read_csv(out.read_text())
    assert float(rows[0]["gamma_num"]) < 0 and rows[0]["slack_upper"] == "nan"


def test_cli_mesh(tmp_path, capsys):
    p = tmp_path / "m.txt"
    assert main(["mesh", "gen", "--nx", "3", "--perturb", "0.2", "--seed", "2", "--out", str(p)]) == 0
    assert main(["mesh", "validate", str(p)]) == 0
    assert capsys.readouterr().out.startswith("ok: 9 cells")
    bad = tmp_path / "bad.txt"
    bad.write_text("polymesh 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 3 2 1\n")
    assert main(["mesh", "validate", str(bad)]) == 1


def test_cli_sweep_and_projector(tmp_path):
    assert main(["sweep", "--scheme", "tpfa", "--levels", "2:2", "--eps-list", "1,0.01",
                 "--out", str(tmp_path / "w.csv")]) == 0
    assert main(["projector-rates", "--k", "2", "--levels", "2:2",
                 "--out", str(tmp_path / "p.csv")]) == 0
    assert (tmp_path / "p.csv").read_text().startswith("level,h,l2")


def test_cli_bound_audit(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["bound-audit", "--scheme", "dg1", "--levels", "4:2", "--out", str(out)]) == 0
    rows = read_csv(out.read_text())
    assert float(rows[-1]["an_residual"]) <= 1e-9
