import numpy as np
import pytest

from aese.bench import read_records
from aese.cli import load_density, main
from aese.metrics import kl_divergence
from aese.mle import SimplexSample
from aese.truncation import named_model


def run(*argv):
    return main([str(a) for a in argv])


def test_simulate_fit_aggregate_eval(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert run("simulate", "--model", "beta", "--n", 300, "--seed", 1, "--out", data) == 0
    s = SimplexSample.from_csv(data)
    assert s.n == 300
    series = tmp_path / "m.aese"
    assert run("fit", "--in", data, "--m", "3,2", "--out", series) == 0
    f = load_density(series)
    assert f.index.degrees == (3, 2)
    agg = tmp_path / "a.aese"
    assert run("aggregate", "--in", data, "--grid", "auto:3", "--seed", 2, "--out", agg) == 0
    a = load_density(agg)
    assert abs(a.weights.sum() - 1) < 1e-12
    capsys.readouterr()
    assert run("eval", "--model", series, "--truth", "beta", "--metric", "kl") == 0
    printed = float(capsys.readouterr().out)
    assert abs(printed - kl_divergence(named_model("beta"), f)) < 1e-9
    assert run("eval", "--model", agg, "--truth", "beta", "--metric", "ise") == 0


def test_bench_outputs_and_rescore(tmp_path, capsys):
    spec = tmp_path / "exp.txt"
    spec.write_text("model = gumbel\nsizes = 60\nreplications = 2\ncandidates = 1,2\n"
                    "density_grid = 5\n")
    out = tmp_path / "out"
    assert run("bench", "--spec", spec, "--out-dir", out, "--keep-models") == 0
    for name in ("records.csv", "summary.csv", "table_kl.txt", "table_l2.txt", "table_ise.txt",
                 "surface_gumbel.csv"):
        assert (out / name).exists()
    assert not (out / "failures.csv").exists()
    assert np.loadtxt(out / "surface_gumbel.csv", delimiter=",", skiprows=1).shape == (25, 5)
    recs = [r for r in read_records(out / "records.csv") if r.estimator == "aese"]
    capsys.readouterr()
    for r in recs:
        path = out / "models" / f"gumbel_n60_r{r.replication}.aese"
        assert run("eval", "--model", path, "--truth", "gumbel") == 0
        assert abs(float(capsys.readouterr().out) - r.kl) < 1e-8 * max(1, r.kl)


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2\n0.5,0.2\n")
    assert run("fit", "--in", bad, "--m", "2", "--out", tmp_path / "o") == 1
    assert "row 0" in capsys.readouterr().err
    assert run("simulate", "--model", "cauchy", "--n", 5, "--out", tmp_path / "c.csv") == 1
    assert run("fit", "--in", tmp_path / "missing.csv", "--m", "2", "--out", tmp_path / "o") == 1
    good = tmp_path / "g.csv"
    run("simulate", "--model", "uniform", "--n", 20, "--out", good)
    assert run("fit", "--in", good, "--m", "1,2,3", "--out", tmp_path / "o") == 1
    with pytest.raises(SystemExit):
        main(["eval", "--model", "x", "--truth", "beta", "--metric", "hellinger"])
