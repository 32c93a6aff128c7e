"""
Run records and their line-delimited persistence.

A record file holds one JSON object per line.  The first line is a header
``{"schema_version": ..., "kind": ...}``.  Timing fields are kept out of the
record files (they go to a separate timings table) so that replays produce
byte-identical output.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"


def within_tolerance(f: float, optimum: float, rho: float) -> bool:
    """``|f - f*| <= rho |f*|``."""
    return abs(f - optimum) <= rho * abs(optimum)


def _plain(value):
    if isinstance(value, np.ndarray):
        return [_plain(x) for x in value.tolist()]
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass
class IterationRecord:
    iteration: int
    theta: List[float]
    f: float
    grad_norm: Optional[float]
    qcalls: int
    wallclock: float = 0.0
    info: Dict[str, Any] = field(default_factory=dict)


@dataclass
class SampleSummary:
    """Modal outcome of the final measurement sample."""

    bits: str
    frequency: float
    hamming: Optional[int] = None


@dataclass
class RunRecord:
    method: str
    hyper: Dict[str, Any]
    seed: int
    restart: int = 0
    problem: str = ""
    theta0: List[float] = field(default_factory=list)
    f0: float = math.nan
    trajectory: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    iterations_to_convergence: Optional[int] = None
    best_f: float = math.nan
    skipped_updates: int = 0
    stop_reason: str = ""
    failed: bool = False
    reason: str = ""
    walltime: float = 0.0
    final_sample: Optional[SampleSummary] = None

    @property
    def key(self):
        return (self.problem, self.method, self.restart, self.seed)

    @property
    def iterations(self) -> int:
        return len(self.trajectory)

    @property
    def qcalls(self) -> int:
        return self.trajectory[-1].qcalls if self.trajectory else 0

    @property
    def final_f(self) -> float:
        return self.trajectory[-1].f if self.trajectory else self.f0

    @property
    def final_theta(self) -> List[float]:
        return self.trajectory[-1].theta if self.trajectory else self.theta0

    def f_values(self) -> np.ndarray:
        return np.array([it.f for it in self.trajectory], dtype=float)

    def thetas(self) -> np.ndarray:
        """Iterates including the starting point, one row each."""
        rows = [self.theta0] + [it.theta for it in self.trajectory]
        return np.array(rows, dtype=float)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data = _plain(asdict(self))
        if not include_timing:
            data.pop("walltime")
            for entry in data["trajectory"]:
                entry.pop("wallclock")
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        data = dict(data)
        data["trajectory"] = [IterationRecord(**_restore_nan(entry)) for entry in data.get("trajectory", [])]
        if data.get("final_sample") is not None:
            data["final_sample"] = SampleSummary(**data["final_sample"])
        for key in ("f0", "best_f"):
            if data.get(key) is None:
                data[key] = math.nan
        return cls(**data)


def _restore_nan(entry):
    entry = dict(entry)
    if entry.get("f") is None:
        entry["f"] = math.nan
    return entry


#------------------------------------------------------------------------
# Line-delimited files
#------------------------------------------------------------------------
def dumps_line(data: Dict[str, Any]) -> str:
    return json.dumps(_plain(data), sort_keys=False, allow_nan=False)


def write_jsonl(path, kind: str, rows: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fp:
        fp.write(dumps_line({"schema_version": SCHEMA_VERSION, "kind": kind}) + "\n")
        for row in rows:
            fp.write(dumps_line(row) + "\n")
    return path


def append_jsonl(path, kind: str, row: Dict[str, Any]) -> Path:
    """Append one row, writing the header first when the file is new."""
    path = Path(path)
    if not path.exists():
        return write_jsonl(path, kind, [row])
    with path.open("a") as fp:
        fp.write(dumps_line(row) + "\n")
    return path


def read_jsonl(path, kind: str = None) -> Iterator[Dict[str, Any]]:
    """
    Rows of a line-delimited file, header excluded.

    A truncated last line (interrupted write) is skipped with a warning.
    """
    path = Path(path)
    with path.open() as fp:
        lines = fp.read().splitlines()
    if not lines:
        return
    header = json.loads(lines[0])
    if header.get("schema_version") != SCHEMA_VERSION:
        logger.warning("%s has schema version %s, expected %s", path, header.get("schema_version"),
                       SCHEMA_VERSION)
    if kind is not None and header.get("kind") != kind:
        raise ValueError(f"{path} holds {header.get('kind')!r} rows, expected {kind!r}")
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError:
            logger.warning("skipping unreadable line %d of %s", number, path)


def write_records(path, records: Iterable[RunRecord]) -> Path:
    return write_jsonl(path, "run_record", (r.to_dict() for r in records))


def read_records(path) -> List[RunRecord]:
    return [RunRecord.from_dict(row) for row in read_jsonl(path, "run_record")]
