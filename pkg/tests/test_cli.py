import json

import pytest

from loopmoment import cli
from loopmoment import loops as L
from loopmoment.liegroup import LatticeVector


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eval(tmp_path, capsys):
    p = tmp_path / "loop.json"
    p.write_text(L.dumps(L.lattice_loop(LatticeVector([1, -1]))))
    code, out, _ = run(["eval", str(p)], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["E"] == pytest.approx(1.0) and d["p"] == pytest.approx([1.0])


def test_flow_csv(capsys):
    code, out, err = run(["flow", "--order", "1", "--seed", "1"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "time,f,gradnorm"
    assert "converged" in err


def test_flow_with_config(tmp_path, capsys):
    cfg = tmp_path / "flow.cfg"
    cfg.write_text("step = 0.25\nintegrator = rk4\n")
    code, _, _ = run(["flow", "--order", "1", "--config", str(cfg)], capsys)
    assert code == 0


def test_project(tmp_path, capsys):
    out = tmp_path / "p.json"
    code, _, _ = run(["project", "--seed", "3", "--target", "0.3,1.6", "--out", str(out)], capsys)
    assert code == 0
    d = json.loads(out.read_text())
    assert d["converged"]
    assert d["moment"]["E"] == pytest.approx(1.6, abs=1e-7)


def test_connect_single_sample(capsys):
    code, out, _ = run(["connect", "--target", "0.3,1.6", "--samples", "1", "--resolution", "8"], capsys)
    assert code == 0
    assert json.loads(out)["components"] == 1


def test_grassmann_check(capsys):
    code, out, _ = run(["grassmann", "--check", "--samples", "6"], capsys)
    assert code == 0
    assert out.startswith("max residual")


def test_image(capsys):
    code, out, _ = run(["image", "--samples", "4"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "sample_id,p_1,E,margin"
    assert len(out.splitlines()) == 5


def test_figure1(tmp_path, capsys):
    code, out, _ = run(["figure1", "--radius", "1", "--samples", "5", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "vertices.csv").exists()


def test_bad_group():
    with pytest.raises(SystemExit):
        cli.main(["image", "--group", "SU1"])


def test_suite_rejects_bad_config(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("tol_level = 0\n")
    with pytest.raises(ValueError):
        cli.main(["suite", "--config", str(cfg)])
