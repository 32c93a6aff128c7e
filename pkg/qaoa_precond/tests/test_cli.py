import numpy as np
import pytest
import yaml

from qaoa_precond import cli, errors
from qaoa_precond.records import read_records
from qaoa_precond.schemas import get_schema
from qaoa_precond.tuner import TrialLog


def test_exit_codes():
    assert errors.ConfigError("x").exit_code == errors.EXIT_CONFIG == 2
    assert errors.MetricInversionError("x").exit_code == errors.EXIT_NUMERIC == 3
    assert errors.InsufficientDataError("x").exit_code == errors.EXIT_INSUFFICIENT_DATA == 4


class TestGenerate:
    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        assert cli.main(["generate", "--n", "3", "--seed", "32", "--output", str(a)]) == 0
        assert cli.main(["generate", "--n", "3", "--seed", "32", "--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert "3 vertices" in capsys.readouterr().out

    def test_out_of_range(self, tmp_path, capsys):
        assert cli.main(["generate", "--n", "25", "--output", str(tmp_path / "x.txt")]) == errors.EXIT_CONFIG
        assert "error:" in capsys.readouterr().err
        assert not (tmp_path / "x.txt").exists()

    def test_malformed_arguments(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["generate", "--n", "three"])
        assert exc.value.code == 2


class TestRun:
    def args(self, problem, out_dir, *extra):
        return ["run", "--problem-file", str(problem), "--method", "bfgs", "--max-iter", "3",
                "--final-shots", "32", "--output-dir", str(out_dir), *extra]

    def test_rerun_gives_identical_record(self, maxcut_3_path, tmp_path, capsys):
        original = maxcut_3_path.read_bytes()
        assert cli.main(self.args(maxcut_3_path, tmp_path / "a")) == 0
        assert cli.main(self.args(maxcut_3_path, tmp_path / "b")) == 0
        assert (tmp_path / "a" / "run.jsonl").read_bytes() == (tmp_path / "b" / "run.jsonl").read_bytes()
        assert maxcut_3_path.read_bytes() == original
        out = capsys.readouterr().out
        assert "method=bfgs iterations=3" in out
        assert "modal cut" in out

    def test_outputs(self, maxcut_3_path, tmp_path):
        cli.main(self.args(maxcut_3_path, tmp_path))
        record, = read_records(tmp_path / "run.jsonl")
        assert record.iterations == 3 and record.final_sample is not None
        effective = yaml.safe_load((tmp_path / "effective_config.yml").read_text())
        assert effective["hyper"]["alpha"] == get_schema("bfgs").defaults()["alpha"]
        manifest = yaml.safe_load((tmp_path / "manifest.yml").read_text())
        assert {entry["file"] for entry in manifest["files"]} == {"run_config.yml", "effective_config.yml",
                                                                  "run.jsonl"}

    def test_missing_hyper_key(self, maxcut_3_path, tmp_path, capsys):
        hyper = tmp_path / "hyper.yml"
        hyper.write_text(yaml.safe_dump({"alpha": 0.5, "beta": 0.85, "c1": 1e-4}))
        code = cli.main(self.args(maxcut_3_path, tmp_path / "out", "--hyper-file", str(hyper)))
        assert code == errors.EXIT_CONFIG
        assert "'c2'" in capsys.readouterr().err

    def test_unknown_method_lists_valid_ids(self, maxcut_3_path, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["run", "--problem-file", str(maxcut_3_path), "--method", "adam"])
        assert exc.value.code == 2
        err = capsys.readouterr().err
        assert "sp_bfgs" in err and "qnspsa" in err


class TestBench:
    def args(self, problem, out_dir, *extra):
        return ["bench", "--problem-file", str(problem), "--restarts", "2", "--max-iter", "3",
                "--workers", "1", "--output-dir", str(out_dir), *extra]

    def test_two_protocols_and_resume(self, maxcut_3_path, tmp_path, capsys):
        args = self.args(maxcut_3_path, tmp_path, "--method", "dfp", "--method", "spsa")
        assert cli.main(args) == 0
        for name in ("effective_config.yml", "manifest.yml", "reports.csv", "runs.csv",
                     "max_iterations/runs.jsonl", "tolerance/runs.jsonl"):
            assert (tmp_path / name).exists(), name
        out = capsys.readouterr().out
        assert out.count("dfp:") == 2 and out.count("spsa:") == 2
        before = (tmp_path / "reports.csv").read_text()
        assert cli.main(args) == 0
        assert (tmp_path / "reports.csv").read_text() == before
        assert len(read_records(tmp_path / "tolerance" / "runs.jsonl")) == 4

    def test_single_protocol(self, maxcut_3_path, tmp_path):
        assert cli.main(self.args(maxcut_3_path, tmp_path, "--method", "qng_diag", "--stop-mode", "none")) == 0
        assert (tmp_path / "max_iterations" / "runs.jsonl").exists()
        assert not (tmp_path / "tolerance").exists()

    def test_lipschitz_protocol(self, maxcut_3_path, tmp_path, capsys):
        args = self.args(maxcut_3_path, tmp_path, "--method", "bfgs", "--stop-mode", "none", "--lipschitz")
        assert cli.main(args) == 0
        assert (tmp_path / "lipschitz" / "lipschitz.csv").exists()
        assert len(read_records(tmp_path / "lipschitz" / "runs.jsonl")) == 2
        assert "lipschitz       bfgs:" in capsys.readouterr().out
        manifest = yaml.safe_load((tmp_path / "manifest.yml").read_text())
        assert "lipschitz/lipschitz.csv" in str(manifest)

    def test_empty_method_list(self, maxcut_3_path, tmp_path):
        assert cli.main(self.args(maxcut_3_path, tmp_path / "out")) == 0
        assert not (tmp_path / "out").exists()

    def test_unknown_method(self, maxcut_3_path, tmp_path, capsys):
        assert cli.main(self.args(maxcut_3_path, tmp_path, "--method", "adam")) == errors.EXIT_CONFIG
        assert "unknown method" in capsys.readouterr().err

    def test_no_problem(self, tmp_path, capsys):
        assert cli.main(["bench", "--method", "bfgs", "--output-dir", str(tmp_path)]) == errors.EXIT_CONFIG
        assert "no problem given" in capsys.readouterr().err


class TestTune:
    def args(self, problem, out_dir, *extra):
        return ["tune", "--problem-file", str(problem), "--method", "bfgs", "--names", "alpha",
                "--restarts", "2", "--max-iter", "2", "--workers", "1", "--output-dir", str(out_dir), *extra]

    def test_budget_below_warm_up(self, maxcut_3_path, tmp_path):
        code = cli.main(self.args(maxcut_3_path, tmp_path, "--budget", "3", "--n-init", "5"))
        assert code == errors.EXIT_INSUFFICIENT_DATA

    def test_outputs_and_replay(self, maxcut_3_path, tmp_path):
        for out in ("a", "b"):
            assert cli.main(self.args(maxcut_3_path, tmp_path / out, "--budget", "3", "--n-init", "2")) == 0
        a = TrialLog.load(tmp_path / "a" / "tune_bfgs" / "trials.jsonl")
        b = TrialLog.load(tmp_path / "b" / "tune_bfgs" / "trials.jsonl")
        assert len(a) == 3 and a == b
        assert (tmp_path / "a" / "tune_bfgs" / "trials.jsonl").read_bytes() == \
            (tmp_path / "b" / "tune_bfgs" / "trials.jsonl").read_bytes()

        best = yaml.safe_load((tmp_path / "a" / "tune_bfgs" / "best_hyper.yml").read_text())
        assert best["method"] == "bfgs"
        assert set(best["best_hyper"]) >= {"alpha", "beta", "c1", "c2"}
        assert best["schema"]["search_space"]["alpha"]["scale"] == "log"
        assert best["best_value"] == pytest.approx(a.best().y)

    def test_resume_extends_the_log(self, maxcut_3_path, tmp_path):
        cli.main(self.args(maxcut_3_path, tmp_path, "--budget", "2", "--n-init", "2"))
        cli.main(self.args(maxcut_3_path, tmp_path, "--budget", "3", "--n-init", "2"))
        assert len(TrialLog.load(tmp_path / "tune_bfgs" / "trials.jsonl")) == 3

    def test_best_hyper_file_feeds_a_run(self, maxcut_3_path, tmp_path):
        cli.main(self.args(maxcut_3_path, tmp_path, "--budget", "2", "--n-init", "2"))
        hyper = tmp_path / "tune_bfgs" / "best_hyper.yml"
        code = cli.main(["run", "--problem-file", str(maxcut_3_path), "--method", "bfgs", "--hyper-file",
                         str(hyper), "--max-iter", "2", "--output-dir", str(tmp_path / "run")])
        assert code == 0


class TestScan:
    def args(self, problem, out_dir, *extra):
        return ["scan", "--problem-file", str(problem), "--grid", "4", "--output-dir", str(out_dir), *extra]

    def test_center(self, maxcut_3_path, tmp_path):
        assert cli.main(self.args(maxcut_3_path, tmp_path, "--center", "0.1,0.2")) == 0
        grid = np.loadtxt(tmp_path / "landscape.txt")
        assert grid.shape == (4, 4)
        assert (tmp_path / "landscape.nc").exists()

    def test_default_center(self, maxcut_3_path, tmp_path):
        assert cli.main(self.args(maxcut_3_path, tmp_path)) == 0

    def test_wrong_center_size(self, maxcut_3_path, tmp_path, capsys):
        assert cli.main(self.args(maxcut_3_path, tmp_path, "--center", "0.1,0.2,0.3")) == errors.EXIT_CONFIG
        assert "expected 2" in capsys.readouterr().err

    def test_center_from_run_record(self, maxcut_3_path, tmp_path):
        cli.main(["run", "--problem-file", str(maxcut_3_path), "--method", "dfp", "--max-iter", "2",
                  "--output-dir", str(tmp_path / "run")])
        assert cli.main(self.args(maxcut_3_path, tmp_path / "scan", "--run-record",
                                  str(tmp_path / "run" / "run.jsonl"))) == 0
