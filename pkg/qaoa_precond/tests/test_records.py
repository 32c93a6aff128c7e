import json
import math

import numpy as np
import pytest

from qaoa_precond import records
from qaoa_precond.records import IterationRecord, RunRecord, SampleSummary


def make_record(**kwargs):
    record = RunRecord(method="bfgs", hyper={"alpha": 0.5}, seed=3, restart=1, problem="maxcut_3",
                       theta0=[0.1, 0.2], f0=-1.0, **kwargs)
    record.trajectory = [
        IterationRecord(1, [0.2, 0.3], -2.0, 0.5, 7, wallclock=0.01),
        IterationRecord(2, [0.3, 0.4], -2.5, 0.1, 14, wallclock=0.02, info={"step": 0.5}),
    ]
    return record


def test_within_tolerance():
    assert records.within_tolerance(-1.95, -2.0, 0.03)
    assert not records.within_tolerance(-1.93, -2.0, 0.03)


def test_derived_properties():
    record = make_record()
    assert record.key == ("maxcut_3", "bfgs", 1, 3)
    assert record.iterations == 2
    assert record.qcalls == 14
    assert record.final_f == -2.5
    assert record.final_theta == [0.3, 0.4]
    np.testing.assert_array_equal(record.thetas(), [[0.1, 0.2], [0.2, 0.3], [0.3, 0.4]])
    np.testing.assert_array_equal(record.f_values(), [-2.0, -2.5])


def test_empty_trajectory():
    record = RunRecord(method="spsa", hyper={}, seed=0, theta0=[0.0, 0.0], f0=-0.5)
    assert record.qcalls == 0
    assert record.final_f == -0.5
    assert record.final_theta == [0.0, 0.0]


def test_timing_is_excluded_by_default():
    data = make_record(walltime=1.5).to_dict()
    assert "walltime" not in data
    assert all("wallclock" not in entry for entry in data["trajectory"])
    assert make_record(walltime=1.5).to_dict(include_timing=True)["walltime"] == 1.5


def test_nan_values_survive_a_file(tmp_path):
    record = make_record(final_sample=SampleSummary("011", 0.75, 0))
    record.best_f = math.nan
    path = records.write_records(tmp_path / "runs.jsonl", [record])
    restored, = records.read_records(path)
    assert math.isnan(restored.best_f)
    assert restored.final_sample == SampleSummary("011", 0.75, 0)
    assert restored.trajectory[1].info == {"step": 0.5}
    assert restored.to_dict() == record.to_dict()


def test_header_and_kind(tmp_path):
    path = records.write_jsonl(tmp_path / "x.jsonl", "trial", [{"a": 1}])
    header = json.loads(path.read_text().splitlines()[0])
    assert header == {"schema_version": records.SCHEMA_VERSION, "kind": "trial"}
    with pytest.raises(ValueError):
        list(records.read_jsonl(path, "run_record"))


def test_append_creates_then_extends(tmp_path):
    path = tmp_path / "log.jsonl"
    records.append_jsonl(path, "trial", {"i": 0})
    records.append_jsonl(path, "trial", {"i": 1})
    assert list(records.read_jsonl(path, "trial")) == [{"i": 0}, {"i": 1}]


def test_truncated_last_line_is_skipped(tmp_path):
    path = records.write_jsonl(tmp_path / "log.jsonl", "trial", [{"i": 0}])
    with path.open("a") as fp:
        fp.write('{"i": 1')
    assert list(records.read_jsonl(path)) == [{"i": 0}]
