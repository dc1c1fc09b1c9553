import json

import numpy as np
import pytest

from pcmselect.cli import main
from pcmselect.data import Dataset
from pcmselect.io import (
    load_scm,
    read_dataset_csv,
    save_graph,
    save_scm,
    write_dataset_csv,
)
from pcmselect.errors import DataFormatError
from pcmselect.scm import experiment_criteria_dag


@pytest.fixture
def linear_csv(tmp_path):
    rng = np.random.default_rng(0)
    z = rng.standard_normal(60)
    x = 0.5 * z + rng.standard_normal(60)
    y = 0.7 * x + 0.3 * z  # no noise: exact recovery
    path = tmp_path / "data.csv"
    write_dataset_csv(path, Dataset(np.column_stack([x, y, z]), ("X", "Y", "Z")))
    return path


@pytest.fixture
def roles_file(tmp_path):
    path = tmp_path / "roles.json"
    path.write_text(json.dumps({"x": "X", "y": "Y", "z": ["Z"]}))
    return path


class TestDatasetCsv:
    def test_round_trip(self, tmp_path):
        ds = Dataset(np.array([[1.25, -2.5], [0.0, 3.125]]), ("a", "b"))
        path = tmp_path / "d.csv"
        write_dataset_csv(path, ds)
        back = read_dataset_csv(path)
        np.testing.assert_array_equal(back.values, ds.values)
        assert back.columns == ds.columns

    def test_bad_cell_reports_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0,2.0\n1.0,oops\n")
        with pytest.raises(DataFormatError) as err:
            read_dataset_csv(path)
        assert err.value.row == 3 and err.value.column == 2

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("a,b\n1.0\n")
        with pytest.raises(DataFormatError):
            read_dataset_csv(path)


class TestCheckCommand:
    def test_backdoor_verdict_on_benchmark_graph(self, tmp_path, capsys):
        graph = tmp_path / "g.txt"
        save_graph(graph, experiment_criteria_dag("A"))
        code = main(["check", "--graph", str(graph), "--x", "X", "--y", "Y",
                     "--backdoor", "Z"])
        assert code == 0
        assert "back-door: satisfied" in capsys.readouterr().out

    def test_frontdoor_and_minimal(self, tmp_path, capsys):
        graph = tmp_path / "g.txt"
        save_graph(graph, experiment_criteria_dag("B"))
        assert main(["check", "--graph", str(graph), "--x", "X", "--y", "Y",
                     "--frontdoor-like", "S,Sbar1", "--z1", "", "--z2", ""]) == 0
        assert "front-door-like: satisfied" in capsys.readouterr().out
        assert main(["check", "--graph", str(graph), "--x", "X", "--y", "Y",
                     "--minimal-mediators"]) == 0
        assert "Sbar1" in capsys.readouterr().out

    def test_unknown_vertex_is_a_data_error(self, tmp_path, capsys):
        graph = tmp_path / "g.txt"
        save_graph(graph, experiment_criteria_dag("A"))
        code = main(["check", "--graph", str(graph), "--x", "NOPE", "--y", "Y",
                     "--backdoor", "Z"])
        assert code == 2


class TestEstimateCommand:
    def test_backdoor_exact_on_noise_free_data(self, linear_csv, roles_file, capsys):
        code = main(["estimate", "--data", str(linear_csv), "--roles", str(roles_file),
                     "--method", "backdoor"])
        assert code == 0
        out = capsys.readouterr().out
        value = float(out.split(":")[1])
        # data are standardized inside the command, so compare on that scale
        ds = read_dataset_csv(linear_csv).standardized()
        a = ds.values[:, ds.index_of(["X", "Z"])]
        expected = np.linalg.solve(a.T @ a, a.T @ ds.column("Y"))[0]
        assert value == pytest.approx(expected, abs=1e-10)

    def test_pcm_prints_structured_fit(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        z = rng.standard_normal(80)
        x = 0.5 * z + rng.standard_normal(80)
        s = 0.6 * x + rng.standard_normal(80)
        y = 0.5 * s + 0.2 * z + rng.standard_normal(80)
        data = tmp_path / "d.csv"
        write_dataset_csv(data, Dataset(np.column_stack([x, y, s, z]),
                                        ("X", "Y", "S", "Z")))
        roles = tmp_path / "r.json"
        roles.write_text(json.dumps({"x": "X", "y": "Y", "z": ["Z"], "s": ["S"]}))
        params = tmp_path / "p.json"
        params.write_text(json.dumps({"lambda1": 0.05, "rho1": 0.0, "zeta1": 0.2,
                                      "xi1": 0.0, "pilot_lambda": 0.5, "pilot_rho": 0.5}))
        code = main(["estimate", "--data", str(data), "--roles", str(roles),
                     "--method", "pcm", "--params", str(params)])
        assert code == 0
        out = capsys.readouterr().out
        payload = json.loads(out[out.index("{"):])
        assert "total_effect" in payload and "corrected" in payload

    def test_missing_params_is_usage_error(self, linear_csv, roles_file, capsys):
        code = main(["estimate", "--data", str(linear_csv), "--roles", str(roles_file),
                     "--method", "pcm"])
        assert code == 1

    def test_missing_column_is_usage_error(self, linear_csv, tmp_path, capsys):
        roles = tmp_path / "r.json"
        roles.write_text(json.dumps({"x": "X", "y": "Y", "z": ["ABSENT"]}))
        code = main(["estimate", "--data", str(linear_csv), "--roles", str(roles),
                     "--method", "backdoor"])
        assert code == 1


class TestTuneCommand:
    def test_writes_score_table(self, linear_csv, roles_file, tmp_path, capsys):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"lam": [0.0, 0.5], "folds": 3}))
        out = tmp_path / "table.csv"
        code = main(["tune", "--data", str(linear_csv), "--roles", str(roles_file),
                     "--method", "lasso", "--grid", str(grid), "--out", str(out)])
        assert code == 0
        assert "chosen parameters" in capsys.readouterr().out
        assert out.read_text().startswith("lam,mean_score")


class TestSimulateCommand:
    def test_benchmark_setting(self, tmp_path, capsys):
        out = tmp_path / "sim.csv"
        code = main(["simulate", "--scm", "A", "--n", "20", "--seed", "5",
                     "--out", str(out)])
        assert code == 0
        ds = read_dataset_csv(out)
        assert ds.n == 20 and len(ds.columns) == 19

    def test_model_file_round_trip(self, tmp_path):
        from test_experiment import tiny_custom_config

        cfg = tiny_custom_config()
        model = tmp_path / "scm.json"
        scm, _ = load_scm_from_payload(cfg.scm_payload)
        save_scm(model, scm)
        out = tmp_path / "sim.csv"
        assert main(["simulate", "--scm", str(model), "--n", "10", "--seed", "1",
                     "--out", str(out)]) == 0
        assert read_dataset_csv(out).n == 10

    def test_determinism(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--scm", "B", "--n", "12", "--seed", "9", "--out", str(a)])
        main(["simulate", "--scm", "B", "--n", "12", "--seed", "9", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


def load_scm_from_payload(payload):
    from pcmselect.scm import LinearScm

    return LinearScm.from_dict(payload)


class TestExperimentCommand:
    def write_config(self, tmp_path, seed=3, workers=1):
        from test_experiment import tiny_custom_config

        cfg = tiny_custom_config(replications=5, workers=workers)
        payload = {
            "setting": "custom", "n": 40, "replications": 5, "seed": seed,
            "workers": workers,
            "scm": cfg.scm_payload, "roles": cfg.roles.to_dict(),
            "methods": [
                {"name": "backdoor"},
                {"name": "frontdoor-including-x",
                 "params": {"mediators": ["M"], "z1": ["Z"], "z2": ["Z"]}},
            ],
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        return path

    def test_end_to_end_and_determinism(self, tmp_path, capsys):
        config = self.write_config(tmp_path)
        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        assert main(["experiment", "--config", str(config), "--out-dir", str(out1)]) == 0
        assert main(["experiment", "--config", str(config), "--out-dir", str(out2)]) == 0
        assert (out1 / "estimates.csv").read_bytes() == (out2 / "estimates.csv").read_bytes()
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()
        summary = (out1 / "summary.csv").read_text().splitlines()
        assert summary[0] == "method,mean,sd,bias,sign,failures,params"
        assert len(summary) == 3

    def test_worker_counts_agree_bytewise(self, tmp_path):
        c1 = self.write_config(tmp_path, workers=1)
        out1 = tmp_path / "w1"
        main(["experiment", "--config", str(c1), "--out-dir", str(out1)])
        c2 = self.write_config(tmp_path, workers=2)
        out2 = tmp_path / "w2"
        main(["experiment", "--config", str(c2), "--out-dir", str(out2)])
        assert (out1 / "estimates.csv").read_bytes() == (out2 / "estimates.csv").read_bytes()

    def test_summary_round_trips_through_estimates(self, tmp_path):
        from pcmselect.experiment import summarize

        config = self.write_config(tmp_path)
        out = tmp_path / "run"
        main(["experiment", "--config", str(config), "--out-dir", str(out)])
        rows = (out / "estimates.csv").read_text().strip().splitlines()[1:]
        by_method = {}
        for line in rows:
            rep, method, value = line.split(",")
            by_method.setdefault(method, []).append(float(value))
        summary_lines = (out / "summary.csv").read_text().strip().splitlines()[1:]
        true_tau = 0.35
        for line in summary_lines:
            cells = line.split(",")
            mean, sd, bias, sign = summarize(by_method[cells[0]], true_tau)
            assert float(cells[1]) == mean
            assert float(cells[2]) == sd
            assert float(cells[4]) == sign

    def test_invalid_config_exit_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"setting": "B", "n": 15, "replications": 2,
                                    "seed": 1, "methods": [{"name": "backdoor"}]}))
        assert main(["experiment", "--config", str(path)]) == 1

    def test_missing_file_is_usage_error(self):
        assert main(["experiment", "--config", "/nonexistent/config.json"]) in (1, 2)
