import json

import numpy as np
import pytest

from lrdmiss.cli import main
from lrdmiss.io import load_model, read_series, write_series

MODEL = '{"p":1,"d":0.4,"q":1,"phi":[0.5],"theta":[0.6],"sigma2":1.0}'


def test_series_csv_round_trip(tmp_path):
    y = np.array([0.1, np.nan, 1 / 3, -2.5e-17, 4.0])
    path = tmp_path / "s.csv"
    write_series(path, y)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,value" and lines[1].startswith("1,") and lines[2] == "2,NaN"
    back = read_series(path)
    np.testing.assert_array_equal(back.values, y)
    np.testing.assert_array_equal(back.observed, ~np.isnan(y))


def test_empty_field_means_missing(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("t,value\n1,1.5\n2,\n3,2.5\n")
    series = read_series(path)
    assert series.n_missing == 1


def test_bad_csv(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("time,y\n1,2\n")
    with pytest.raises(ValueError):
        read_series(path)
    path.write_text("t,value\n1,2\n3,4\n")
    with pytest.raises(ValueError):
        read_series(path)


def test_load_model_inline_and_file(tmp_path):
    assert load_model(MODEL).phi == (0.5,)
    path = tmp_path / "m.json"
    path.write_text(MODEL)
    assert load_model(str(path)) == load_model(MODEL)


def test_pipeline(tmp_path, capsys):
    y, g, z = tmp_path / "y.csv", tmp_path / "g.csv", tmp_path / "z.csv"
    assert main(["simulate", "--model", '{"d":0.3}', "--n", "600", "--seed", "4", str(y)]) == 0
    assert main(["inject", "--prop", "0.3", "--seed", "1", str(y), str(g)]) == 0
    assert read_series(g).n_missing == 180
    assert main(["impute", "--method", "random", "--seed", "2", str(g), str(z)]) == 0
    assert read_series(z).n_missing == 0
    capsys.readouterr()
    for method in ("gph", "lw", "elw", "rs", "dfa"):
        assert main(["estimate", "--method", method, str(z)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert {"method", "d_hat", "m", "converged"} <= set(out)
    assert main(["estimate", "--method", "copula", "--family", "frank", str(g)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "copula-frank" and len(out["pairs_used"]) == 24


def test_estimate_options(tmp_path, capsys):
    y = tmp_path / "y.csv"
    main(["simulate", "--model", '{"d":0.2}', "--n", "1000", str(y)])
    capsys.readouterr()
    main(["estimate", "--method", "gph", "--m", "50", str(y)])
    assert json.loads(capsys.readouterr().out)["m"] == 50
    main(["estimate", "--method", "dfa", "--dfa-range", "20:60", str(y)])
    assert json.loads(capsys.readouterr().out)["m"] == 41
    main(["estimate", "--method", "rs", "--rs-windows", "10,20,40,80", str(y)])
    assert json.loads(capsys.readouterr().out)["m"] == 4


def test_exit_codes(tmp_path):
    y = tmp_path / "y.csv"
    main(["simulate", "--model", '{"d":0.2}', "--n", "100", str(y)])
    assert main(["estimate", "--method", "gph", str(tmp_path / "nope.csv")]) == 3
    assert main(["simulate", "--model", '{"d":0.9}', str(tmp_path / "x.csv")]) == 2
    assert main(["inject", "--prop", "0.95", str(y), str(tmp_path / "g.csv")]) == 2
    assert main(["simulate", "--model", MODEL, str(tmp_path / "no" / "x.csv")]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--method", "nonsense", str(y)])
    assert exc.value.code == 2
    gappy = tmp_path / "g.csv"
    main(["inject", "--prop", "0.3", str(y), str(gappy)])
    assert main(["estimate", "--method", "lw", str(gappy)]) == 2


def test_mc_and_bench(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"models": [{"d": 0.3}], "n": 300, "burn": 50, "reps": 2,
                               "missing_props": [0, 0.2], "estimators": ["gph", "copula-gaussian"]}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["mc", "--config", str(cfg), "--out", str(a)]) == 0
    monkeypatch.setenv("LRDMISS_WORKERS", "2")
    assert main(["mc", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    main(["mc", "--config", str(cfg), "--out", str(c), "--seed", "9"])
    assert c.read_bytes() != a.read_bytes()
    j = tmp_path / "r.json"
    assert main(["mc", "--config", str(cfg), "--out", str(j), "--full"]) == 0
    assert len(json.loads(j.read_text())["cells"][0]["values"]) == 2
    capsys.readouterr()
    assert main(["bench", "--config", str(cfg), "--warmup", "1"]) == 0
    assert capsys.readouterr().out.startswith("task,")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["mc", "--config", str(bad), "--out", str(a)]) == 2
    assert main(["mc", "--config", str(tmp_path / "absent.json"), "--out", str(a)]) == 3


def test_tune_sigma(capsys):
    assert main(["tune-sigma", "--d", "0.2", "--missing", "0.5", "--varsigma", "4,10",
                 "--reps", "2", "--n", "200", "--burn", "50"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[1].startswith("0.2,0.5,")
