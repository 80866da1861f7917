import csv
import json

import numpy as np
import pytest

from rcsphere.cli import dump_radius, load_radius, main, radius_from_dict, radius_to_dict
from rcsphere.sphere import casella_hwang_radius, default_knots, hermite_radius, radius_eval, standard_radius


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def ch3_file(tmp_path):
    path = tmp_path / "ch3.json"
    assert main(["ch-radius", "--p", "3", "--out", str(path)]) == 0
    return path


@pytest.fixture
def all_d_file(tmp_path):
    d = standard_radius(3, 0.05)
    path = tmp_path / "all_d.json"
    dump_radius(hermite_radius(3, 0.05, default_knots(3, d), [d] * 7), path)
    return path


def test_radius_round_trip(tmp_path):
    d = standard_radius(5, 0.05)
    r = hermite_radius(5, 0.05, default_knots(5, d), np.linspace(0.123456789, 1, 7) * d)
    path = tmp_path / "r.json"
    dump_radius(r, path)
    back = load_radius(path)
    x = np.linspace(0, 12, 5001)
    assert np.array_equal(radius_eval(r, x), radius_eval(back, x))


def test_ch_round_trip():
    r = casella_hwang_radius(7, 0.05)
    back = radius_from_dict(json.loads(json.dumps(radius_to_dict(r))))
    assert back.kind == "casella_hwang" and back.d == r.d
    assert "knots" not in radius_to_dict(r)


def test_table1_empty(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["table1", "--p", "--out", str(out)]) == 0
    text = out.read_text()
    assert text == "p,ch_min_cp,ch_sev0,new_min_cp,new_sev0\n"


def test_table1_bad_p(tmp_path):
    assert main(["table1", "--p", "4", "--out", str(tmp_path / "t.csv")]) == 2


def test_curves_all_d(tmp_path, all_d_file):
    out = tmp_path / "c.csv"
    assert main(["curves", "--radius", str(all_d_file), "--gamma-max", "3", "--step", "0.5", "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[0] == ["gamma", "coverage", "sev"]
    assert len(rows) == 8
    assert all(r[2] == "1.00000" for r in rows[1:])
    assert out.read_text().endswith("\n")
    radius_rows = _read_csv(tmp_path / "c_radius.csv")
    assert radius_rows[0] == ["x", "b"]
    assert len(radius_rows) == 1 + 1001
    assert float(radius_rows[-1][1]) == standard_radius(3, 0.05)


def test_curves_single_row(tmp_path, all_d_file):
    out = tmp_path / "c.csv"
    assert main(["curves", "--radius", str(all_d_file), "--gamma-max", "1", "--step", "2", "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert len(rows) == 2 and rows[1][0] == "0.0000"


def test_curves_ch_minimum(tmp_path, ch3_file):
    out = tmp_path / "c.csv"
    args = ["curves", "--radius", str(ch3_file), "--gamma-max", "6", "--step", "0.01", "--out", str(out)]
    assert main(args) == 0
    cov = [float(r[1]) for r in _read_csv(out)[1:]]
    assert min(cov) == pytest.approx(0.94594, abs=5e-4)


def test_curves_bad_step(tmp_path, all_d_file):
    assert main(["curves", "--radius", str(all_d_file), "--step", "0", "--out", str(tmp_path / "c.csv")]) == 2


def test_malformed_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["curves", "--radius", str(bad), "--out", str(tmp_path / "c.csv")]) == 2
    assert main(["optimize", "--config", str(bad)]) == 2


def test_missing_file(tmp_path):
    assert main(["verify", "--radius", str(tmp_path / "nope.json")]) == 2


def test_non_monotone_radius(tmp_path, all_d_file, capsys):
    obj = json.loads(all_d_file.read_text())
    obj["knots"][1]["b"], obj["knots"][2]["b"] = 2.0, 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj))
    assert main(["verify", "--radius", str(path), "--samples", "10"]) == 2
    assert "nondecreasing" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutate",
    [
        lambda o: o.update(extra=1),
        lambda o: o.update(d=3.0),
        lambda o: o.update(kind="ellipse"),
        lambda o: o.pop("alpha"),
        lambda o: o.update(p=3.0),
    ],
)
def test_invalid_radius_files(tmp_path, all_d_file, mutate):
    obj = json.loads(all_d_file.read_text())
    mutate(obj)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(obj))
    assert main(["verify", "--radius", str(path), "--samples", "10"]) == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 3, "learning_rate": 0.1}))
    assert main(["optimize", "--config", str(cfg)]) == 2


def test_invalid_config_value(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 4}))
    assert main(["optimize", "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"p": 3, "rel_tol": -1}))
    assert main(["optimize", "--config", str(cfg)]) == 2


def test_verify_ch_p3(ch3_file, capsys):
    assert main(["verify", "--radius", str(ch3_file), "--samples", "200000", "--gammas", "0", "4.1", "20"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4 and all(line.endswith("ok") for line in lines[1:])


def test_verify_detects_mismatch(tmp_path, ch3_file, monkeypatch):
    import rcsphere.cli as cli

    monkeypatch.setattr(cli, "coverage_probability", lambda r, g: 0.5)
    assert main(["verify", "--radius", str(ch3_file), "--samples", "20000", "--gammas", "1"]) == 1


def test_optimize_small(tmp_path):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "r.json"
    summary = tmp_path / "s.json"
    cfg.write_text(
        json.dumps(
            {
                "p": 3,
                "gamma_grid": [0, 2, 4, 6, 8],
                "starts": ["all_d"],
                "max_rounds": 1,
                "sweep_step": 1.0,
                "sweep_max": 10.0,
            }
        )
    )
    assert main(["optimize", "--config", str(cfg), "--out", str(out), "--summary", str(summary)]) == 0
    r = load_radius(out)
    assert r.knots.size == 7 and r.values[-1] == r.d
    s = json.loads(summary.read_text())
    assert set(s) >= {"sev_at_zero", "min_coverage_on_grid", "global_min_coverage", "iterations"}
    # second run on the same config reproduces the radius
    out2 = tmp_path / "r2.json"
    assert main(["optimize", "--config", str(cfg), "--out", str(out2), "--summary", str(tmp_path / "s2.json")]) == 0
    np.testing.assert_allclose(load_radius(out2).values, r.values, atol=1e-6)


def test_optimize_needs_p(tmp_path):
    assert main(["optimize", "--out", str(tmp_path / "r.json")]) == 2
