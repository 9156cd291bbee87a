"""Run reports: a JSON document and a flat CSV table.

Both are pure functions of the run result, with sorted keys and no
timestamps, so the same scenario and seed give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .metrics import Metrics
from .runner import RunResult
from .table import SecurityVerdict

SCHEMA = "qcsim.report/1"

TABLE_COLUMNS = (
    "protocol", "attack", "trial", "seed", "property", "status", "aborted", "error", "added_error",
    "eve_knowledge", "eve_success", "legit_accept", "digest",
)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats rejected."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value {obj!r} in report")
    return obj


def report_dict(res: RunResult) -> dict:
    cfg = res.config
    return _clean({
        "schema": SCHEMA,
        "tool_version": __version__,
        "protocol": cfg.protocol,
        "attack": cfg.attack.kind if cfg.attack else None,
        "seed": cfg.seed,
        "config": cfg.model_dump(mode="json"),
        "verdict": res.verdict.to_dict(),
        "aggregate": res.aggregate.to_dict(),
        "trials": [
            {
                "index": t.index,
                "seed": t.seed,
                "digest": t.digest,
                "verdict": t.verdict.to_dict(),
                "honest_error": t.honest_error,
                "added_error": t.added_error,
                "metrics": t.metrics.to_dict(),
                "event_counts": t.counts,
            }
            for t in res.trials
        ],
    })


def render_report(res: RunResult) -> str:
    return json.dumps(report_dict(res), sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_table(res: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    cfg = res.config
    attack = cfg.attack.kind if cfg.attack else ""

    def row(trial, seed, m: Metrics, v: SecurityVerdict, added, digest):
        w.writerow([cfg.protocol, attack, trial, seed, v.property, v.status, int(m.aborted),
                    _num(m.error), _num(added), _num(m.value("eve_knowledge")), _num(m.eve_success),
                    _num(m.legit_accept), digest])

    for t in res.trials:
        row(t.index, t.seed, t.metrics, t.verdict, t.added_error, t.digest)
    added = [t.added_error for t in res.trials if t.added_error is not None]
    row("all", cfg.seed, res.aggregate, res.verdict, sum(added) / len(added) if added else None, "")
    return buf.getvalue()


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def write(res: RunResult, path: str | Path | None, fmt: str = "report") -> str:
    text = render_report(res) if fmt == "report" else render_table(res)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


class Report:
    """A report read back from disk."""

    def __init__(self, data: dict):
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        self.data = data
        self.config = ScenarioConfig.model_validate(data["config"])
        self.verdict = SecurityVerdict(**data["verdict"])
        self.aggregate = Metrics.from_dict(data["aggregate"])
        self.trials = [Metrics.from_dict(t["metrics"]) for t in data["trials"]]

    def to_dict(self) -> dict:
        return self.data


def read_report(path: str | Path) -> Report:
    return Report(json.loads(Path(path).read_text(encoding="utf-8")))
