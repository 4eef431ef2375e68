"""CLI harness tests: exit codes, artifact schemas, reproducibility, and the
config-file override."""

import json

import numpy as np
import pytest

from iblab.cli import main


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestGenData:
    def test_writes_csv_and_meta(self, tmp_path):
        out = tmp_path / "data" / "run1"
        code = main(["gen-data", "--n", "6", "--d", "24", "--seed", "1",
                     "--out", str(out)])
        assert code == 0
        meta = read_json(tmp_path / "data" / "run1.meta.json")
        assert meta["schema_version"] == "1"
        assert meta["seed"] == 1
        assert (tmp_path / "data" / "run1.csv").exists()

    def test_rerun_is_bit_identical(self, tmp_path):
        argv = ["gen-data", "--n", "5", "--d", "20", "--seed", "3",
                "--out", str(tmp_path / "a")]
        main(argv)
        first = (tmp_path / "a.csv").read_bytes()
        main(argv[:-1] + [str(tmp_path / "b")])
        assert (tmp_path / "b.csv").read_bytes() == first

    def test_invalid_dims_exit_2(self, tmp_path):
        code = main(["gen-data", "--ensemble", "orthogonal", "--n", "8", "--d", "4",
                     "--alpha", "1.0", "--out", str(tmp_path / "x")])
        assert code == 2


class TestSolveDual:
    def test_solution_artifact(self, tmp_path):
        data = tmp_path / "run"
        main(["gen-data", "--n", "8", "--d", "64", "--seed", "2", "--out", str(data)])
        out = tmp_path / "sol.json"
        code = main(["solve-dual", "--data", str(data), "--loss", "poly",
                     "--m", "1", "--out", str(out)])
        assert code == 0
        sol = read_json(out)
        assert sol["kkt_residual"] <= 1e-8 * sol["mu"]
        assert sol["feasibility_gap"] <= 1e-10
        assert sol["method"] == "newton"
        assert len(sol["q"]) == 8
        assert "config_hash" in sol

    def test_missing_data_exit_2(self, tmp_path):
        code = main(["solve-dual", "--data", str(tmp_path / "nope"),
                     "--loss", "exp", "--out", str(tmp_path / "s.json")])
        assert code == 2


class TestMni:
    def test_report_fields(self, tmp_path):
        data = tmp_path / "run"
        main(["gen-data", "--n", "6", "--d", "48", "--seed", "4", "--out", str(data)])
        out = tmp_path / "mni.json"
        assert main(["mni", "--data", str(data), "--out", str(out)]) == 0
        rep = read_json(out)
        for key in ("alpha", "eps", "ratio", "condition", "svp_holds", "w"):
            assert key in rep


class TestTrain:
    def test_trajectory_and_summary(self, tmp_path):
        data = tmp_path / "run"
        main(["gen-data", "--ensemble", "orthogonal", "--n", "6", "--d", "12",
              "--alpha", "1.0", "--seed", "5", "--out", str(data)])
        out = tmp_path / "tr"
        code = main(["train", "--data", str(data), "--loss", "logistic",
                     "--max-iters", "100000", "--out", str(out)])
        assert code == 0
        summary = read_json(tmp_path / "tr.summary.json")
        assert summary["termination"] == "risk_below_threshold"
        assert summary["final_dist_mni"] <= 1e-3
        assert summary["smoothness_bound_estimated"] is True
        header = (tmp_path / "tr.trajectory.csv").read_text().splitlines()[0]
        assert header == "t,risk,eta_hat,dist_mni,dist_dual,q_min,q_max"


class TestConfigOverride:
    def test_config_file_overrides_flags(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 9, "n": 7}))
        out = tmp_path / "cfgd"
        code = main(["--config", str(cfg), "gen-data", "--n", "3", "--d", "21",
                     "--seed", "0", "--out", str(out)])
        assert code == 0
        meta = read_json(tmp_path / "cfgd.meta.json")
        assert meta["seed"] == 9
        assert meta["n"] == 7


class TestDemos:
    def test_converse_demo(self, tmp_path, capsys):
        out = tmp_path / "conv.json"
        code = main(["converse-demo", "--dvec", "0.125,1.0", "--y", "1,-1",
                     "--loss", "poly", "--m", "1", "--out", str(out)])
        assert code == 0
        rep = read_json(out)
        assert rep["spread"] == pytest.approx(1.0 / 3.0, abs=1e-9)
        assert rep["interpolation_residual"] <= 1e-8

    def test_converse_demo_exponential_labeled_plain(self, tmp_path):
        out = tmp_path / "conv2.json"
        code = main(["converse-demo", "--dvec", "0.125,1.0", "--y", "1,-1",
                     "--loss", "exp", "--out", str(out)])
        assert code == 0
        rep = read_json(out)
        assert rep["plain_interpolation"] is True
        tilde = np.asarray(rep["tilde_y"])
        assert np.sign(tilde[0]) != np.sign(tilde[1])
        assert abs(abs(tilde[0]) - abs(tilde[1])) <= 1e-10


class TestVerify:
    def test_suite_passes(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["verify", "--suite", "interpolators", "--out", str(out)])
        assert code == 0
        rep = read_json(out)
        assert rep["failed"] == 0

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as info:
            main(["gen-data", "--does-not-exist", "1"])
        assert info.value.code == 2


class TestThreadedReproducibility:
    def test_sweep_identical_across_worker_counts(self, tmp_path, monkeypatch):
        argv = ["scaling-sweep", "--n", "10", "--d-list", "20,40,80",
                "--loss", "poly", "--m", "1", "--seeds", "4"]
        monkeypatch.setenv("IBLAB_THREADS", "1")
        assert main(argv + ["--out", str(tmp_path / "s1")]) == 0
        monkeypatch.setenv("IBLAB_THREADS", "3")
        assert main(argv + ["--out", str(tmp_path / "s3")]) == 0

        def numeric_rows(path):
            # drop the wall-clock runtime_ms column; everything else is
            # deterministic regardless of the worker count
            rows = path.read_text().splitlines()
            header = rows[0].split(",")
            keep = [i for i, name in enumerate(header) if name != "runtime_ms"]
            return [tuple(r.split(",")[i] for i in keep) for r in rows]

        assert numeric_rows(tmp_path / "s1.trials.csv") == \
            numeric_rows(tmp_path / "s3.trials.csv")
        assert ((tmp_path / "s1.summary.json").read_text()
                == (tmp_path / "s3.summary.json").read_text())
