import logging
from pathlib import Path

import pytest
import yaml

from qaoa_precond import config
from qaoa_precond.config import ExperimentConfig, ProblemSpec
from qaoa_precond.errors import ConfigError
from qaoa_precond.records import SCHEMA_VERSION


def write(tmp_path, data, name="experiment.yml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_read_yaml_parses_paths_and_none(tmp_path):
    path = write(tmp_path, {"output_dir": "runs/x", "ansatz": {"shots": "None"},
                            "problem": {"problem_file": "a.txt"}, "hyper_files": ["a.yml", "b.yml"]})
    cfg = config.read_yaml(path)
    assert cfg["output_dir"] == Path("runs/x")
    assert cfg["ansatz"]["shots"] is None
    assert cfg["problem"]["problem_file"] == Path("a.txt")
    assert cfg["hyper_files"] == [Path("a.yml"), Path("b.yml")]


def test_read_yaml_errors(tmp_path):
    with pytest.raises(ConfigError):
        config.read_yaml(tmp_path / "missing.yml")
    bad = tmp_path / "bad.yml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        config.read_yaml(bad)
    scalar = tmp_path / "scalar.yml"
    scalar.write_text("3\n")
    with pytest.raises(ConfigError):
        config.read_yaml(scalar)
    empty = tmp_path / "empty.yml"
    empty.write_text("")
    assert config.read_yaml(empty) == {}


class TestProblemSpec:
    def test_generated(self):
        spec = ProblemSpec(n=3, seed=32)
        assert spec.key == "maxcut_3_32"
        assert spec.load().n_vertices == 3

    def test_fixture(self, maxcut_3_path):
        spec = ProblemSpec(problem_file=maxcut_3_path)
        assert spec.key == "maxcut_3"
        assert spec.load().n_edges == 3

    @pytest.mark.parametrize("kwargs", [dict(), dict(n=3, problem_file=Path("x.txt")), dict(n=25), dict(n=1),
                                        dict(n=3, density=0.0), dict(n=3, weight_range=(1.0, 2.0, 3.0))])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ProblemSpec(**kwargs)


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.from_dict({"problem": {"n": 3}})
        assert cfg.ansatz.p == 1 and cfg.ansatz.shots is None
        assert cfg.protocol.restarts == 20
        assert cfg.protocol.stop_modes == ("none", "relative")
        assert cfg.tuning.budget == 70 and cfg.tuning.n_init == 10
        assert cfg.methods == {}
        assert cfg.output_dir == Path("runs")

    def test_methods_are_resolved(self):
        cfg = ExperimentConfig.from_dict({"problem": {"n": 3}, "methods": ["dfp", "qng_block"]})
        assert cfg.methods["dfp"]["alpha"] == 0.37
        assert set(cfg.methods) == {"dfp", "qng_block"}

    def test_inline_overrides(self):
        cfg = ExperimentConfig.from_dict({"problem": {"n": 3}, "methods": {"bfgs": {"alpha": 0.5}}})
        assert cfg.methods["bfgs"]["alpha"] == 0.5

    @pytest.mark.parametrize("data, match", [
        ({"problem": {"n": 3}, "colour": 1}, "unknown configuration key 'colour'"),
        ({"problem": {"n": 3, "size": 4}}, "unknown key 'size' in section 'problem'"),
        ({"problem": {"n": 3}, "ansatz": {"p": 0}}, "p must be positive"),
        ({"problem": {"n": 3}, "protocol": {"stop_modes": ["sometimes"]}}, "unknown stop mode"),
        ({"problem": {"n": 3}, "methods": ["adam"]}, "unknown method"),
        ({"problem": {"n": 3}, "workers": 0}, "workers"),
        ({"ansatz": {"p": 1}}, "missing configuration key 'problem'"),
    ])
    def test_rejected(self, data, match):
        with pytest.raises(ConfigError, match=match):
            ExperimentConfig.from_dict(data)

    def test_hyper_file_must_be_complete(self, tmp_path):
        hyper = write(tmp_path, {"alpha": 0.5}, "bfgs.yml")
        with pytest.raises(ConfigError, match="missing hyperparameter"):
            ExperimentConfig.from_dict({"problem": {"n": 3}, "methods": {"bfgs": {"hyper_file": hyper}}})

    def test_hyper_file_from_tuning_output(self, tmp_path):
        best = {"alpha": 0.3, "beta": 0.85, "c1": 1e-3, "c2": 0.7}
        hyper = write(tmp_path, {"schema_version": SCHEMA_VERSION, "best_hyper": best}, "best_hyper.yml")
        cfg = ExperimentConfig.from_dict({"problem": {"n": 3}, "methods": {"bfgs": {"hyper_file": hyper}}})
        assert {k: cfg.methods["bfgs"][k] for k in best} == best

    def test_effective_round_trip(self, tmp_path, maxcut_3_path):
        cfg = ExperimentConfig.from_dict({"problem": {"problem_file": maxcut_3_path},
                                          "methods": ["sp_bfgs", "spsa"], "output_dir": tmp_path / "out",
                                          "seed": 9})
        path = config.write_effective_config(cfg, tmp_path / "out")
        data = config.read_yaml(path)
        assert data.pop("schema_version") == SCHEMA_VERSION
        assert ExperimentConfig.from_dict(data) == cfg


def test_load_experiment_overrides(tmp_path):
    path = write(tmp_path, {"problem": {"n": 3}, "protocol": {"restarts": 5, "rho": 0.01}})
    cfg = config.load_experiment(path, {"protocol": {"restarts": 2}, "seed": 4})
    assert cfg.protocol.restarts == 2
    assert cfg.protocol.rho == 0.01
    assert cfg.seed == 4


def test_experiment_file_in_repository():
    cfg = config.load_experiment(Path(__file__).resolve().parents[2] / "bmi_config_files" / "experiment_maxcut_3.yml")
    assert cfg.problem.key == "maxcut_3"
    assert "sp_bfgs" in cfg.methods


def test_manifest(tmp_path):
    files = [config.write_yaml({"a": 1}, tmp_path / "x.yml"), config.write_yaml({"b": 2}, tmp_path / "sub" / "y.yml")]
    manifest = yaml.safe_load(config.write_manifest(tmp_path, files, "bench").read_text())
    assert manifest["command"] == "bench"
    assert [entry["file"] for entry in manifest["files"]] == ["sub/y.yml", "x.yml"]


@pytest.mark.parametrize("verbose, level", [(0, logging.WARNING), (1, logging.INFO), (3, logging.DEBUG)])
def test_configure_logging(verbose, level):
    config.configure_logging(verbose)
    assert logging.getLogger().level == level
