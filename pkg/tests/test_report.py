import csv
import io
import json

import pytest

from qcsim.config import parse_config
from qcsim.report import SCHEMA, TABLE_COLUMNS, Report, read_report, render_report, render_table, write
from qcsim.runner import run_trials


@pytest.fixture(scope="module")
def result():
    return run_trials(parse_config({"protocol": "dss_qds", "n_rounds": 4000, "trials": 2, "seed": 5,
                                    "attack": {"kind": "trojan"}}))


def test_report_schema(result):
    d = json.loads(render_report(result))
    assert d["schema"] == SCHEMA
    assert set(d) == {"schema", "tool_version", "protocol", "attack", "seed", "config", "verdict", "aggregate",
                      "trials"}
    assert d["verdict"]["status"] in {"intact", "broken", "attack-detected", "not-applicable"}
    t = d["trials"][0]
    assert set(t) == {"index", "seed", "digest", "verdict", "honest_error", "added_error", "metrics",
                      "event_counts"}
    assert len(t["digest"]) == 64


def test_report_roundtrip(result, tmp_path):
    p = tmp_path / "r.json"
    write(result, p)
    back = read_report(p)
    assert back.config == result.config
    assert back.verdict == result.verdict
    assert back.aggregate.to_dict() == result.aggregate.to_dict()
    assert [m.to_dict() for m in back.trials] == [t.metrics.to_dict() for t in result.trials]


def test_report_rejects_other_schema(result):
    d = json.loads(render_report(result))
    d["schema"] = "other/2"
    with pytest.raises(ValueError):
        Report(d)


def test_report_deterministic(result):
    again = run_trials(result.config)
    assert render_report(again) == render_report(result)
    assert render_table(again) == render_table(result)


def test_table_rows(result):
    rows = list(csv.DictReader(io.StringIO(render_table(result))))
    assert tuple(rows[0]) == TABLE_COLUMNS
    assert [r["trial"] for r in rows] == ["0", "1", "all"]
    assert all(r["protocol"] == "dss_qds" and r["attack"] == "trojan" for r in rows)
    assert rows[-1]["status"] == result.verdict.status
