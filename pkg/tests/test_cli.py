import json
import subprocess
import sys

import numpy as np
import pytest

from timflow.cli import main
from timflow.dataset import load_dataset
from timflow.metrics import read_benchmark_csv, timing_stats


@pytest.fixture()
def pattern_file(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"points": [[10.0, 10.5], [14.0, 10.5]],
                                "feeds": [1.0]}))
    return str(path)


def run_main(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDiscretizeCompress:
    def test_discretize_then_identity_compress(self, tmp_path, pattern_file, capsys):
        grid_file = str(tmp_path / "g.timd")
        out_file = str(tmp_path / "c.timd")
        code, _, _ = run_main(["discretize", "--pattern", pattern_file,
                               "--res", "50x50", "--out", grid_file], capsys)
        assert code == 0
        code, _, _ = run_main(["compress", "--in", grid_file, "--model", "heuristic",
                               "--out", out_file], capsys)
        assert code == 0
        # max amount is 1.0 <= termination, so compression must be the identity
        source = load_dataset(grid_file)
        result = load_dataset(out_file)
        assert result.records[0].compressed == source.records[0].dispensed
        assert result.records[0].dispensed == source.records[0].dispensed

    def test_compress_surrogate_requires_weights(self, tmp_path, pattern_file, capsys):
        grid_file = str(tmp_path / "g.timd")
        run_main(["discretize", "--pattern", pattern_file, "--out", grid_file], capsys)
        code, _, err = run_main(["compress", "--in", grid_file, "--model", "surrogate",
                                 "--out", str(tmp_path / "x.timd")], capsys)
        assert code == 1
        assert "weights" in err

    def test_missing_pattern_file_is_runtime_error(self, tmp_path, capsys):
        code, _, err = run_main(["discretize", "--pattern", str(tmp_path / "nope.json"),
                                 "--out", str(tmp_path / "g.timd")], capsys)
        assert code == 2

    def test_out_of_bounds_is_runtime_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"points": [[0.2, 0.2], [5.0, 5.0]], "feeds": [1.0]}))
        code, _, err = run_main(["discretize", "--pattern", str(bad),
                                 "--out", str(tmp_path / "g.timd")], capsys)
        assert code == 2
        assert "OutOfBounds" in err


class TestDatasetTrainEval:
    def test_gen_train_eval_round_trip(self, tmp_path, capsys):
        data = str(tmp_path / "d.timd")
        weights = str(tmp_path / "w.timw")
        code, _, _ = run_main(["gen-dataset", "--count", "40", "--seed", "5",
                               "--res", "16x16", "--margin", "5", "--out", data], capsys)
        assert code == 0
        code, out, _ = run_main(["train", "--dataset", data, "--epochs", "2",
                                 "--lr", "1e-3", "--batch", "8", "--seed", "1",
                                 "--conv-layers", "2", "--filters", "8",
                                 "--kernel", "3", "--out", weights], capsys)
        assert code == 0
        assert "final_val_mre" in out
        code, out, _ = run_main(["eval", "--dataset", data, "--weights", weights],
                                capsys)
        assert code == 0
        payload = json.loads(out.strip().splitlines()[-1])
        assert payload["records"] == 40
        assert payload["mean_relative_error"] > 0

    def test_train_lr_zero_keeps_eval_loss(self, tmp_path, capsys):
        data = str(tmp_path / "d.timd")
        run_main(["gen-dataset", "--count", "20", "--seed", "6", "--res", "16x16",
                  "--margin", "5", "--out", data], capsys)
        results = {}
        for tag, lr in (("zero", "0"), ("small", "1e-3")):
            weights = str(tmp_path / f"w_{tag}.timw")
            code, out, _ = run_main(["train", "--dataset", data, "--epochs", "2",
                                     "--lr", lr, "--batch", "8", "--seed", "2",
                                     "--conv-layers", "2", "--filters", "8",
                                     "--kernel", "3", "--out", weights], capsys)
            assert code == 0
            results[tag] = json.loads(out.strip().splitlines()[-1])
        # with lr 0 nothing was learned: both epochs report the same train loss
        assert results["zero"]["train_loss"] == pytest.approx(
            results["zero"]["val_loss"], rel=0.5)
        assert results["small"]["train_loss"] < results["zero"]["train_loss"]

    def test_gen_dataset_deterministic(self, tmp_path, capsys):
        a, b = str(tmp_path / "a.timd"), str(tmp_path / "b.timd")
        for path in (a, b):
            code, _, _ = run_main(["gen-dataset", "--count", "6", "--seed", "9",
                                   "--res", "20x20", "--margin", "6",
                                   "--out", path], capsys)
            assert code == 0
        assert (tmp_path / "a.timd").read_bytes() == (tmp_path / "b.timd").read_bytes()

    def test_search_prints_best(self, tmp_path, capsys):
        data = str(tmp_path / "d.timd")
        run_main(["gen-dataset", "--count", "16", "--seed", "7", "--res", "16x16",
                  "--margin", "5", "--out", data], capsys)
        best_file = str(tmp_path / "best.json")
        code, out, _ = run_main(["search", "--trials", "2", "--repeats", "1",
                                 "--dataset", data, "--seed", "3",
                                 "--train-n", "8", "--val-n", "4",
                                 "--out", best_file], capsys)
        assert code == 0
        best = json.loads(out.strip().splitlines()[-1])
        assert best["filters"] in (8, 32, 128, 512)
        assert json.loads(open(best_file).read()) == best


class TestBench:
    def test_bench_csv_consistent_with_summary(self, tmp_path, capsys):
        out_dir = str(tmp_path / "bench")
        code, out, _ = run_main(["bench", "--patterns", "4", "--runs", "3",
                                 "--seed", "11", "--res", "24x24",
                                 "--schedule", "mult:0.9", "--out-dir", out_dir], capsys)
        assert code == 0
        assert "heuristic" in out
        rows = read_benchmark_csv(f"{out_dir}/heuristic.csv")
        assert len(rows) == 4
        mean, std = timing_stats([r["t_min"] for r in rows])
        summary = json.loads(open(f"{out_dir}/summary.json").read())
        entry = summary["methods"][0]
        assert entry["method"] == "heuristic"
        assert entry["computation_time_mean"] == pytest.approx(mean, abs=1e-12)
        assert entry["computation_time_std"] == pytest.approx(std, abs=1e-12)


class TestUsage:
    def test_help_exits_zero_everywhere(self):
        for cmd in ["discretize", "compress", "gen-dataset", "train", "search",
                    "eval", "bench", "serve"]:
            proc = subprocess.run([sys.executable, "-m", "timflow", cmd, "--help"],
                                  capture_output=True, text=True)
            assert proc.returncode == 0, cmd
            assert "--" in proc.stdout

    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert main(["gen-dataset", "--count", "5", "--out", "x.timd"]) == 1

    def test_bad_resolution_is_usage_error(self, tmp_path, pattern_file, capsys):
        code, _, err = run_main(["discretize", "--pattern", pattern_file,
                                 "--res", "fifty", "--out", str(tmp_path / "g.timd")],
                                capsys)
        assert code == 1

    def test_json_log_format(self, tmp_path, pattern_file, capsys):
        code, _, err = run_main(["--log", "json", "discretize", "--pattern",
                                 pattern_file, "--out", str(tmp_path / "g.timd")],
                                capsys)
        assert code == 0
        line = json.loads(err.strip().splitlines()[-1])
        assert line["event"] == "discretize"
