import csv
import json
import math

import numpy as np
import pytest

from robsub.cli import main, parse_k_grid
from robsub.estimator import fit_deterministic
from robsub.evaluation import SimulationDesign, generate_sample, rep_rng
from robsub.io import (
    InputError,
    document_to_fit,
    fit_to_document,
    read_fit,
    read_matrix,
    write_fit,
    write_matrix,
)
from robsub.scales import ScaleSpec


@pytest.fixture
def data_csv(tmp_path):
    X = generate_sample(SimulationDesign(eps=0.1, k=6), rep_rng(0, 0)).X
    path = tmp_path / "X.csv"
    write_matrix(path, X, header=[f"x{j}" for j in range(X.shape[1])])
    return path, X


def test_read_matrix_header_detection(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("a,b\n1,2\n3.5,-4e-1\n")
    np.testing.assert_array_equal(read_matrix(path), [[1, 2], [3.5, -0.4]])
    path.write_text("1,2\n3,4\n")
    assert read_matrix(path).shape == (2, 2)


@pytest.mark.parametrize("text", ["1,2\n3\n", "1,2\n3,x\n", "1,2\n3,\n", "1,nan\n", "a,b\n"])
def test_read_matrix_rejects(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(InputError):
        read_matrix(path)


def test_write_read_round_trip(tmp_path):
    X = np.random.default_rng(1).standard_normal((5, 3)) * 1e-7
    path = tmp_path / "r.csv"
    write_matrix(path, X)
    np.testing.assert_array_equal(read_matrix(path), X)


def test_fit_document_round_trip(tmp_path, data_csv):
    _, X = data_csv
    fit = fit_deterministic(X, 2, ScaleSpec.lts(0.25))
    doc = fit_to_document(fit, method="dsublts")
    assert doc["scale_spec"]["h"] == 100 - math.floor(0.25 * 100)
    write_fit(tmp_path / "f.json", doc)
    back = document_to_fit(read_fit(tmp_path / "f.json"), X)
    np.testing.assert_array_equal(back.B, fit.B)
    np.testing.assert_array_equal(back.m, fit.m)
    np.testing.assert_array_equal(back.weights, fit.weights)
    assert back.scale == fit.scale
    assert back.spec == fit.spec


def test_read_fit_missing_key(tmp_path):
    (tmp_path / "f.json").write_text('{"p": 2}')
    with pytest.raises(InputError):
        read_fit(tmp_path / "f.json")


def test_parse_k_grid():
    assert parse_k_grid("0:2:0.5") == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert parse_k_grid("1,4.5") == [1.0, 4.5]


def test_cli_fit_happy_path_and_determinism(tmp_path, data_csv):
    path, _ = data_csv
    outs = []
    for i in range(2):
        out = tmp_path / f"fit{i}.json"
        assert main(["fit", "--input", str(path), "--q", "2", "--method", "s",
                     "--starts", "deterministic", "--bdp", "0.5", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert doc["converged"] is True
    assert doc["method"] == "dsubs"


def test_cli_fit_lts_records_h(tmp_path, data_csv):
    path, _ = data_csv
    out = tmp_path / "lts.json"
    assert main(["fit", "--input", str(path), "--q", "2", "--method", "lts",
                 "--alpha", "0.25", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["scale_spec"]["h"] == 75


def test_cli_fit_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,5\n")
    assert main(["fit", "--input", str(bad), "--q", "1", "--out", str(tmp_path / "o.json")]) == 2
    assert "row 2" in capsys.readouterr().err
    assert main(["fit", "--input", str(tmp_path / "missing.csv"), "--q", "1",
                 "--out", str(tmp_path / "o.json")]) == 2


def test_cli_fit_degenerate_exit_3(tmp_path):
    path = tmp_path / "const.csv"
    write_matrix(path, np.ones((10, 3)))
    assert main(["fit", "--input", str(path), "--q", "1", "--out", str(tmp_path / "o.json")]) == 3


def test_cli_diagnose(tmp_path, data_csv, capsys):
    path, X = data_csv
    fit_path = tmp_path / "fit.json"
    assert main(["fit", "--input", str(path), "--q", "2", "--out", str(fit_path)]) == 0
    out = tmp_path / "diag.csv"
    assert main(["diagnose", "--fit", str(fit_path), "--input", str(path), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == X.shape[0]
    # the planted rows sit far off the fitted plane
    assert all(r["flag"] in ("orthogonal_outlier", "bad_leverage") for r in rows[-10:])

    wrong = tmp_path / "wrong.csv"
    write_matrix(wrong, X[:, :5])
    assert main(["diagnose", "--fit", str(fit_path), "--input", str(wrong)]) == 2

    flat = tmp_path / "flat.csv"
    write_matrix(flat, np.tile(X[0], (20, 1)))
    assert main(["diagnose", "--fit", str(fit_path), "--input", str(flat)]) == 3
    assert "DegenerateFitError" in capsys.readouterr().err


def test_cli_diagnose_calibration(tmp_path):
    X = np.random.default_rng(2).standard_normal((4000, 4)) * [0.3, 0.3, 2.0, 3.0]
    data = tmp_path / "g.csv"
    write_matrix(data, X)
    fit_path = tmp_path / "g.json"
    assert main(["fit", "--input", str(data), "--q", "2", "--method", "pca",
                 "--out", str(fit_path)]) == 0
    out = tmp_path / "d.csv"
    assert main(["diagnose", "--fit", str(fit_path), "--input", str(data), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    od = np.array([float(r["od"]) > float(r["od_cutoff"]) for r in rows])
    sd = np.array([float(r["sd"]) > float(r["sd_cutoff"]) for r in rows])
    assert 0.01 < od.mean() < 0.045
    assert 0.01 < sd.mean() < 0.045


def test_cli_simulate_reproducible(tmp_path):
    args = ["simulate", "--design", "a", "--reps", "1", "--seed", "7", "--eps", "0.2",
            "--k-grid", "0,5", "--methods", "dsubs,pca"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert list(rows[0]) == ["design", "method", "eps", "k", "rep", "e_pred", "angle", "seconds"]
    assert len(rows) == 4
    assert all(float(r["e_pred"]) >= -1e-12 for r in rows)


def test_cli_simulate_design_errors(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--design", "hd", "--n", "20", "--p", "500", "--q", "2",
                 "--reps", "1", "--out", str(out)]) == 2
    assert main(["simulate", "--eps", "0.7", "--out", str(out)]) == 2
    assert main(["simulate", "--methods", "nope", "--out", str(out)]) == 2


def test_cli_equivariance(tmp_path):
    out = tmp_path / "e.csv"
    args = ["equivariance", "--design", "a", "--eps", "0.2", "--k-grid", "10",
            "--reps", "5", "--methods", "pca,dsubs", "--seed", "3", "--out", str(out)]
    assert main(args) == 0
    rows = list(csv.DictReader(out.open()))
    pca = [float(r["angle"]) for r in rows if r["method"] == "pca"]
    dsubs = [float(r["angle"]) for r in rows if r["method"] == "dsubs"]
    assert max(pca) < 1e-3
    assert np.mean(dsubs) < 0.1
    again = tmp_path / "e2.csv"
    assert main(args[:-1] + [str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_cli_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["fit", "--q", "2"])
    assert info.value.code == 2
