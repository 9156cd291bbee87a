import pytest

from qcsim.config import parse_config
from qcsim.errors import ConfigurationError, NotApplicableError
from qcsim.metrics import Metrics, Rate
from qcsim.runner import run_scenario, run_trials
from qcsim.table import (
    COLUMNS, KIND_COLUMN, MATRIX, applicable_cells, cell_kind, check_applicable, inapplicable_cells, verdict,
)

KINDS_BY_COLUMN = {c: [k for k, col in KIND_COLUMN.items() if col == c] for c in COLUMNS}


def _metrics(eve=1.0, legit=1.0, aborted=False):
    return Metrics(rates={"eve_success": Rate(int(eve * 100), 100), "legit_accept": Rate(int(legit * 100), 100)},
                   aborted=aborted)


def test_cell_counts():
    assert len(applicable_cells()) == 13
    assert len(inapplicable_cells()) == 15
    assert len(applicable_cells()) + len(inapplicable_cells()) == len(MATRIX) * len(COLUMNS)


def test_source_cells_realized_by_distinct_attacks():
    assert cell_kind("iss_qds", "source_side_channel") == "source_distinguish"
    assert cell_kind("bqc", "source_side_channel") == "pns"
    assert cell_kind("dss_qds", "trojan_horse") == "trojan"


def test_verdict_rules():
    assert verdict(_metrics(), "iss_qds", "blind_control").status == "broken"
    assert verdict(_metrics(aborted=True), "iss_qds", "blind_control").status == "attack-detected"
    assert verdict(_metrics(eve=0.5), "iss_qds", "blind_control").status == "intact"
    assert verdict(_metrics(legit=0.9), "iss_qds", "blind_control").status == "intact"
    assert verdict(_metrics(), "iss_qds", None).status == "intact"
    v = verdict(_metrics(), "si_qrng", "trojan")
    assert v.status == "not-applicable" and v.property == "randomness"
    assert verdict(_metrics(), "ghz_qss", "blind_control").property == "confidentiality"


def test_every_dash_cell_rejected():
    for protocol, column in inapplicable_cells():
        for kind in KINDS_BY_COLUMN[column]:
            with pytest.raises(NotApplicableError):
                check_applicable(protocol, kind)
    with pytest.raises(NotApplicableError):
        run_trials(parse_config({"protocol": "si_qrng", "attack": {"kind": "trojan"}}))


def test_force_overrides_guard():
    check_applicable("si_qrng", "trojan", force=True)
    with pytest.raises(ConfigurationError, match="no attack model"):
        run_scenario(parse_config({"protocol": "si_qrng", "attack": {"kind": "trojan"}}), force=True)


def test_unmodelled_and_reserved_kinds():
    with pytest.raises(ConfigurationError):
        check_applicable("bqc", "source_distinguish")
    with pytest.raises(ConfigurationError):
        check_applicable("bqc", "intercept_resend")
    check_applicable("sq_qss", "intercept_resend")


def test_matrix_reproduced(cell_results):
    assert set(cell_results) == {(p, c) for p, c, _ in applicable_cells()}
    for (protocol, column), (prop, res) in cell_results.items():
        assert res.verdict.status == "broken", (protocol, column, res.aggregate.abort_reason)
        assert res.verdict.property == prop == MATRIX[protocol][column]
