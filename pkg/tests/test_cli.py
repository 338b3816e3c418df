import pytest

from psrlab.cli import main

SHEAR_INI = """
[experiment]
tier = shear
[shear]
g = 2
"""


def kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


def test_infer_examples(capsys):
    assert main(["infer", "--measured-db", "-3.5", "--transmission", "1", "--qe", "0.95", "--visibility", "0.99"]) == 0
    out = kv(capsys.readouterr().out)
    assert float(out["eta"]) == pytest.approx(0.9311, abs=1e-4)
    assert float(out["source_db"]) == pytest.approx(-3.918, abs=1e-3)
    assert main(["infer", "--measured-db", "0", "--transmission", "0.8", "--qe", "0.95", "--visibility", "0.99"]) == 0
    assert float(kv(capsys.readouterr().out)["source_db"]) == 0.0


def test_infer_unphysical_exit_2(capsys):
    assert main(["infer", "--measured-db", "-10", "--transmission", "0.5"]) == 2
    assert "loss floor" in capsys.readouterr().err


def test_simulate_shear(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text(SHEAR_INI)
    assert main(["simulate", "--config", str(ini)]) == 0
    out = kv(capsys.readouterr().out)
    assert float(out["min_db"]) == pytest.approx(-7.66, abs=5e-3)
    assert out["tier"] == "shear"


def test_sweep_validation_exit_2(tmp_path, capsys):
    assert main(["sweep", "--tier", "shear", "--steps", "0", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["sweep", "--param", "nope", "--out", str(tmp_path / "x.csv")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[field]\nbx = 1\n")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2
    assert "error" in capsys.readouterr().err


def test_sweep_all_failed_exit_3(tmp_path):
    out = tmp_path / "x.csv"
    rc = main(["sweep", "--param", "power_mW", "--from", "-2", "--to", "-1", "--steps", "2", "--out", str(out)])
    assert rc == 3
    assert out.read_text().count("DomainError") == 2


def test_sweep_determinism(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text(SHEAR_INI)
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        args = ["sweep", "--config", str(ini), "--param", "alpha", "--from", "0", "--to", "2", "--steps", "5"]
        assert main(args + ["--seed", "3", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_scan_tomo_plot_pipeline(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text(SHEAR_INI)
    scan, tomo, wig, svg = (tmp_path / n for n in ("s.csv", "t.csv", "w.csv", "p.svg"))
    assert main(["scan-phase", "--config", str(ini), "--points", "24", "--out", str(scan)]) == 0
    assert main(["tomo", "--scan", str(scan), "--out", str(tomo), "--wigner", str(wig), "--grid-points", "21"]) == 0
    out = kv(capsys.readouterr().out)
    assert float(out["min_db"]) == pytest.approx(-7.6555, abs=1e-3)
    assert tomo.read_text().startswith("quantity,value\n")
    assert wig.read_text().startswith("# half_width=3\n# n=21\n")
    assert main(["plot", "--in", str(scan), "--out", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 1


def test_plot_empty_exit_2(tmp_path, capsys):
    empty = tmp_path / "e.csv"
    empty.write_text("param,value,min_db,max_db,angle_rad,error\n")
    assert main(["plot", "--in", str(empty), "--out", str(tmp_path / "e.svg")]) == 2
    assert "line" in capsys.readouterr().err


def test_tomo_missing_column_exit_2(tmp_path):
    bad = tmp_path / "b.csv"
    bad.write_text("phi_rad,samples\n0,1\n")
    assert main(["tomo", "--scan", str(bad), "--out", str(tmp_path / "t.csv")]) == 2
