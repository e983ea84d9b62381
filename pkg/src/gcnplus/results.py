"""Run reports and their schema-versioned JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import IoError, SchemaMismatch

SCHEMA_VERSION = 1


@dataclass
class RunRecord:
    seed: int
    test_accuracy: float
    best_val_accuracy: float
    epochs_ran: int
    wall_time_s: float


def aggregate(values) -> dict:
    """Mean and population standard deviation."""
    values = [float(v) for v in values]
    if not values:
        return {"mean": None, "std": None}
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return {"mean": mean, "std": math.sqrt(var)}


@dataclass
class RunReport:
    command: str
    dataset: dict
    config: dict
    runs: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    curves: dict | None = None
    schema_version: int = SCHEMA_VERSION

    def finalize(self) -> "RunReport":
        self.aggregate = aggregate(r.test_accuracy for r in self.runs)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["runs"] = [asdict(r) if isinstance(r, RunRecord) else dict(r) for r in self.runs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaMismatch(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        return cls(
            command=d["command"], dataset=d["dataset"], config=d["config"],
            runs=[RunRecord(**r) for r in d.get("runs", [])],
            aggregate=d.get("aggregate", {}), curves=d.get("curves"),
            schema_version=version,
        )

    def strip_timing(self) -> dict:
        d = self.to_dict()
        for r in d["runs"]:
            r.pop("wall_time_s", None)
        return d


def _dump(obj, path) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        # json writes floats with repr, i.e. the shortest exact round-trip form
        Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_results(report, path) -> None:
    """Write a RunReport, or a dict already carrying ``schema_version``."""
    obj = report.to_dict() if isinstance(report, RunReport) else report
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch("refusing to write an object without the current schema_version")
    _dump(obj, path)


def read_results(path):
    """Inverse of :func:`write_results`; plain run reports come back as RunReport."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("schema_version") != SCHEMA_VERSION:
        got = obj.get("schema_version") if isinstance(obj, dict) else None
        raise SchemaMismatch(f"unsupported schema_version {got!r} (expected {SCHEMA_VERSION})")
    if {"command", "dataset", "config", "runs"} <= obj.keys():
        return RunReport.from_dict(obj)
    return obj
