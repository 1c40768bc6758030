import json
from pathlib import Path

import numpy as np
import pytest

from cvaid import load_model, save_model
from cvaid.cli import load_series, main, read_csv

MODELS = Path(__file__).resolve().parent.parent / "models"
DIFF_MODEL = MODELS / "bivariate_ar1_diff.json"
BASE_MODEL = MODELS / "bivariate_ar1.json"
NOISE_MODEL = MODELS / "differenced_noise.json"


def run(*argv) -> int:
    return main([str(a) for a in argv])


class TestSimulate:
    def test_writes_csv(self, tmp_path):
        out = tmp_path / "data.csv"
        code = run("simulate", "--model", DIFF_MODEL, "--t", 100, "--seed", 4, "--output", out)
        assert code == 0
        data = load_series(out)
        assert data.shape == (100, 2)

    def test_deterministic(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run("simulate", "--model", DIFF_MODEL, "--t", 50, "--seed", 9, "--output", out1) == 0
        assert run("simulate", "--model", DIFF_MODEL, "--t", 50, "--seed", 9, "--output", out2) == 0
        assert out1.read_text() == out2.read_text()

    def test_missing_model_file(self, tmp_path):
        code = run("simulate", "--model", tmp_path / "nope.json", "--t", 50,
                   "--output", tmp_path / "x.csv")
        assert code == 2

    def test_unknown_flag_is_usage_error(self, tmp_path):
        code = run("simulate", "--model", DIFF_MODEL, "--t", 50,
                   "--output", tmp_path / "x.csv", "--bogus", 1)
        assert code == 2

    def test_invalid_t(self, tmp_path):
        code = run("simulate", "--model", DIFF_MODEL, "--t", 0, "--output", tmp_path / "x.csv")
        assert code == 2


class TestEstimate:
    @pytest.fixture
    def data_csv(self, tmp_path):
        out = tmp_path / "data.csv"
        assert run("simulate", "--model", DIFF_MODEL, "--t", 2000, "--seed", 3, "--output", out) == 0
        return out

    def test_cva_outputs(self, tmp_path, data_csv):
        model_out = tmp_path / "fit.json"
        sv_out = tmp_path / "sv.csv"
        code = run("estimate", "--input", data_csv, "--n", 2, "--f", 5, "--p", 5,
                   "--output", model_out, "--singular-values", sv_out)
        assert code == 0
        fitted = load_model(model_out)
        assert fitted.n == 2
        header, rows = read_csv(sv_out)
        assert header == ["index", "singular_value"]
        assert len(rows) == 10
        values = [r[1] for r in rows]
        assert values == sorted(values, reverse=True)

    def test_auto_order(self, tmp_path, data_csv):
        model_out = tmp_path / "fit.json"
        code = run("estimate", "--input", data_csv, "--n", 2, "--auto-order", "--output", model_out)
        assert code == 0
        assert load_model(model_out).s == 2

    def test_missing_windows_rejected(self, tmp_path, data_csv):
        code = run("estimate", "--input", data_csv, "--n", 2, "--output", tmp_path / "f.json")
        assert code == 2

    def test_pem_writes_diagnostics(self, tmp_path, data_csv):
        model_out = tmp_path / "pem.json"
        diag = tmp_path / "diag.json"
        code = run("estimate", "--input", data_csv, "--method", "pem", "--n", 2,
                   "--f", 5, "--p", 5, "--max-iters", 20,
                   "--output", model_out, "--diagnostics", diag)
        assert code == 0
        doc = json.loads(diag.read_text())
        assert doc["method"] == "pem"
        assert doc["iterations"] <= 20
        assert isinstance(doc["converged"], bool)


class TestExperiment:
    def test_smoke_and_outputs(self, tmp_path):
        config = {
            "dgp": json.loads(DIFF_MODEL.read_text()),
            "order": 2,
            "t_values": [100],
            "m_reps": 2,
            "estimators": ["cva"],
            "burn_in": 100,
            "base_seed": 11,
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        out_dir = tmp_path / "results"
        code = run("experiment", "--config", config_path, "--output-dir", out_dir)
        assert code == 0
        header, rows = read_csv(out_dir / "mse.csv")
        assert header == ["estimator", "T", "mse_times_T", "n_ok", "n_fail"]
        assert rows[0][0] == "cva"
        header, rows = read_csv(out_dir / "reps.csv")
        assert len(rows) == 2

    def test_overdiff_spec_config(self, tmp_path):
        config = {
            "dgp": {"base": json.loads(BASE_MODEL.read_text()),
                    "m_c": [[1.0, 0.0], [0.0, 1.0]]},
            "order": 2,
            "t_values": [120],
            "m_reps": 1,
            "estimators": ["cva"],
            "burn_in": 100,
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        code = run("experiment", "--config", config_path, "--output-dir", tmp_path / "res")
        assert code == 0

    def test_malformed_config(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text("{not json")
        assert run("experiment", "--config", config_path, "--output-dir", tmp_path / "r") == 2
        config_path.write_text(json.dumps({"order": 2}))
        assert run("experiment", "--config", config_path, "--output-dir", tmp_path / "r") == 2


class TestBiasStudy:
    def test_differenced_noise_curve(self, tmp_path):
        out = tmp_path / "bias.csv"
        code = run("bias-study", "--model", NOISE_MODEL, "--p-min", 2, "--p-max", 50,
                   "--output", out)
        assert code == 0
        header, rows = read_csv(out)
        assert header == ["p", "biasA", "biasB", "biasC", "p2_biasA", "p_biasB", "p_biasC"]
        p_bias_b = [row[5] for row in rows]
        assert all(0.66 <= v <= 1.0 for v in p_bias_b)
        assert p_bias_b == sorted(p_bias_b)

    def test_ar1_diff_scaled_stability(self, tmp_path):
        out = tmp_path / "bias.csv"
        assert run("bias-study", "--model", DIFF_MODEL, "--p-min", 40, "--p-max", 80,
                   "--output", out) == 0
        header, rows = read_csv(out)
        by_p = {row[0]: row for row in rows}
        for col in (4, 5):
            ratio = by_p[40.0][col] / by_p[80.0][col]
            assert 0.5 <= ratio <= 2.0

    def test_inverted_range(self, tmp_path):
        assert run("bias-study", "--model", NOISE_MODEL, "--p-min", 9, "--p-max", 3,
                   "--output", tmp_path / "x.csv") == 2


class TestLambdaMinStudy:
    def test_differenced_noise_closed_form(self, tmp_path):
        out = tmp_path / "lam.csv"
        assert run("lambda-min-study", "--model", NOISE_MODEL, "--p-max", 60,
                   "--output", out) == 0
        header, rows = read_csv(out)
        assert header == ["p", "lambda_min", "p2_lambda_min"]
        for row in rows:
            p, lam, scaled = row
            assert lam == pytest.approx(2.0 * (1.0 - np.cos(np.pi / (p + 1))), abs=1e-8)
            assert scaled == pytest.approx(p * p * lam, rel=1e-12)

    def test_differenced_dgp_band_and_control(self, tmp_path):
        out = tmp_path / "lam.csv"
        assert run("lambda-min-study", "--model", DIFF_MODEL, "--p-max", 120,
                   "--output", out) == 0
        _, rows = read_csv(out)
        scaled = [row[2] for row in rows if row[0] >= 20]
        assert max(scaled) / min(scaled) < 5.0

        out2 = tmp_path / "lam_base.csv"
        assert run("lambda-min-study", "--model", BASE_MODEL, "--p-max", 120,
                   "--output", out2) == 0
        _, rows = read_csv(out2)
        lam = [row[1] for row in rows]
        scaled = [row[2] for row in rows]
        assert min(lam) > 0.3
        assert scaled[-1] > 10 * scaled[9]


class TestSeriesReader:
    def test_header_detection(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("y1,y2\n1.0,2.0\n3.0,4.0\n")
        data = load_series(path)
        assert data.shape == (2, 2)
        path.write_text("1.0,2.0\n3.0,4.0\n")
        assert load_series(path).shape == (2, 2)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(ValueError):
            load_series(path)
