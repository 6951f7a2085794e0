import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopmoment import experiments as X
from loopmoment.liegroup import TorusVector
from loopmoment.moment import MomentValue


def _mv(p, e):
    return MomentValue(TorusVector.from_chart([p]), e)


def test_hull_margin_examples():
    assert X.check_hull_su2(_mv(0.0, 0.0)) == pytest.approx(0.0, abs=1e-15)
    assert X.check_hull_su2(_mv(0.5, 0.3)) == pytest.approx(-0.2, abs=1e-12)
    assert X.check_hull_su2(_mv(0.5, 0.6)) == pytest.approx(0.1, abs=1e-12)


@given(st.floats(-6, 6), st.floats(-1, 40))
def test_hull_margin_matches_wide_scan(p, e):
    wide = min(e - ((2 * m + 1) * p - m * (m + 1)) for m in range(-20, 21))
    assert X.check_hull_su2(_mv(p, e)) == pytest.approx(wide, abs=1e-12)


@given(st.integers(-5, 5))
def test_hull_vertices_have_zero_margin(m):
    assert X.check_hull_su2(_mv(float(m), float(m * m))) == pytest.approx(0.0, abs=1e-12)


def test_hull_requires_su2():
    with pytest.raises(ValueError):
        X.check_hull_su2(MomentValue(TorusVector.from_chart([0.1, 0.2]), 1.0))


def test_sample_image_deterministic():
    a, _ = X.sample_image(2, 2, 1, seed=7)
    b, _ = X.sample_image(2, 2, 1, seed=7)
    assert a[0].distance(b[0]) == 0.0
    with pytest.raises(ValueError):
        X.sample_image(2, 2, 0, seed=7)


def test_sample_image_zero_tangent_gives_origin():
    v, _ = X.sample_image(2, 2, 1, seed=0, scale=0.0)
    assert v[0].distance(_mv(0.0, 0.0)) < 1e-12


def test_sample_image_in_hull_and_few_failures():
    values, failures = X.sample_image(2, 2, 300, seed=1)
    rep = X.hull_report(values)
    assert rep.violations == 0
    assert failures < 3


def test_image_csv_columns():
    values, _ = X.sample_image(2, 2, 5, seed=2)
    rows = list(csv.reader(io.StringIO(X.image_csv(values, 2))))
    assert rows[0] == ["sample_id", "p_1", "E", "margin"]
    assert len(rows) == 6
    for r in rows[1:]:
        assert float(r[3]) >= -1e-9


def test_figure1_vertices(tmp_path):
    counts = X.emit_figure1(2, 5, tmp_path, samples=20, seed=3)
    rows = list(csv.reader((tmp_path / "vertices.csv").open()))
    pts = [(float(r[1]), float(r[2])) for r in rows[1:]]
    assert pts == [(-2, 4), (-1, 1), (0, 0), (1, 1), (2, 4)]
    for name, n in counts.items():
        lines = (tmp_path / name).read_text().splitlines()
        assert len(lines) - 1 == n
    assert counts["scatter.csv"] == 20
    scatter = list(csv.DictReader((tmp_path / "scatter.csv").open()))
    assert min(float(r["margin"]) for r in scatter) >= -1e-9


def test_figure1_is_reproducible(tmp_path):
    X.emit_figure1(1, 4, tmp_path / "a", samples=10, seed=4)
    X.emit_figure1(1, 4, tmp_path / "b", samples=10, seed=4)
    for name in ("vertices.csv", "facets.csv", "critical.csv", "scatter.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parse_config():
    text = "# comment\nseed = 5\nstep=0.25\nname = abc\nlist = 1, 2, 3\n"
    got = X.parse_config(text)
    assert got == {"seed": 5, "step": 0.25, "name": "abc", "list": [1, 2, 3]}
    with pytest.raises(ValueError):
        X.parse_config("no equals sign")


def test_manifest_rejects_zero_tolerance():
    with pytest.raises(ValueError):
        X.ExperimentManifest(tol_level=0.0)
    man = X.ExperimentManifest()
    man.tol_gradient = 0
    with pytest.raises(ValueError):
        X.run_suite(man, criteria=[1])


def test_manifest_unknown_key():
    with pytest.raises(ValueError):
        X.ExperimentManifest.from_mapping({"bogus": 1})


def test_manifest_roundtrip(tmp_path):
    man = X.ExperimentManifest(seed=9, image_samples=50)
    p = tmp_path / "m.json"
    p.write_text(man.dumps())
    back = X.ExperimentManifest.load(p)
    assert back.to_json() == man.to_json()
    q = tmp_path / "m.cfg"
    q.write_text("seed = 9\nprobe_targets = 0.3, 1.6, 0.2, 0.5\n")
    m2 = X.ExperimentManifest.load(q)
    assert m2.seed == 9 and m2.probe_targets == [[0.3, 1.6], [0.2, 0.5]]


def test_rng_streams_are_independent_and_repeatable():
    man = X.ExperimentManifest()
    a = man.rng("image").random(3)
    assert np.array_equal(a, man.rng("image").random(3))
    assert not np.array_equal(a, man.rng("flow").random(3))


def test_run_suite_subset_report():
    man = X.ExperimentManifest().reduced()
    lines = []
    rep = X.run_suite(man, criteria=[1, 2, 3], emit=lambda r: lines.append(r.line()))
    assert rep["passed"]
    assert [c["id"] for c in rep["criteria"]] == [1, 2, 3]
    assert all(l.startswith("[PASS] criterion") for l in lines)
    json.loads(X.report_bytes(rep))


def test_report_bytes_stable():
    man = X.ExperimentManifest().reduced()
    a = X.report_bytes(X.run_suite(man, criteria=[2, 4]))
    b = X.report_bytes(X.run_suite(man, criteria=[2, 4]))
    assert a == b
