"""The acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import math
import sys
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare, poisson

from conftest import ACCEPTANCE_LINES
from qcsim.attacks import measure_stored, pns_split, trojan_probe, trojan_read_probability
from qcsim.config import parse_config
from qcsim.countermeasures import CalibrationConfig, IsolationChain, calibrate, isolation_budget
from qcsim.errors import NotApplicableError
from qcsim.photonics import DetectorModel, OpticalPulse
from qcsim.protocols.bqc import GRID, delta_index
from qcsim.protocols.common import SYMBOLS
from qcsim.protocols.qsdc import freq_decode, freq_encode
from qcsim.protocols.qss import (
    GHZ_CORRELATIONS, LAST_PHASES, PHASES, TRIPLES, ghz_sample, phase_label, sq_round, sq_sift,
)
from qcsim.report import render_report
from qcsim.runner import run_scenario, run_trials
from qcsim.table import MATRIX, applicable_cells, cell_kind, check_applicable, inapplicable_cells

from test_bqc import _pns_expected, _sdp_guess_probability


@contextmanager
def criterion(n, title):
    try:
        yield
    except BaseException:
        line = f"FAIL  {n:>2}. {title}"
        ACCEPTANCE_LINES.append(line)
        print(line, file=sys.__stdout__)
        raise
    line = f"PASS  {n:>2}. {title}"
    ACCEPTANCE_LINES.append(line)
    print(line, file=sys.__stdout__)


def test_01_ghz_correlations():
    with criterion(1, "GHZ correlations"):
        tri, outs = ghz_sample(200_000, np.random.default_rng(101))
        prods = outs.prod(axis=1)
        sifted = 0
        for i, t in enumerate(TRIPLES):
            sel = prods[tri == i]
            if GHZ_CORRELATIONS.is_correlated(t):
                sifted += len(sel)
                assert (sel == dict(GHZ_CORRELATIONS.signs)[t]).all(), t
            else:
                assert abs(sel.mean()) <= 0.02, t
        assert sifted >= 100_000


def test_02_single_qubit_click_law():
    with criterion(2, "single-qubit QSS click law and deterministic fraction"):
        rng = np.random.default_rng(102)
        n = 100_000
        for total in (0.0, math.pi / 2, math.pi, 3 * math.pi / 2):
            phases = [total / 2, total / 2]
            d1 = sum(sq_round(phases, rng) == "D1" for _ in range(n))
            assert abs(d1 / n - 0.5 * (1 + math.cos(total))) <= 0.01, total
        det = 0
        for _ in range(n):
            labels = [phase_label(PHASES[int(rng.integers(4))]) for _ in range(2)]
            labels.append(phase_label(LAST_PHASES[int(rng.integers(2))]))
            det += sq_sift(labels)
        assert abs(det / n - 0.5) <= 0.01


def test_03_intercept_resend_qber():
    with criterion(3, "intercept-resend QBER 0.25 (single-qubit QSS, DL04 forward check)"):
        _, m = run_scenario(parse_config({"protocol": "sq_qss", "n_rounds": 80_000, "seed": 103,
                                          "attack": {"kind": "intercept_resend"}}))
        assert m.rates["error"].n > 10_000
        assert abs(m.error - 0.25) <= 0.01
        _, m = run_scenario(parse_config({"protocol": "dl04_qsdc", "n_rounds": 120_000, "seed": 103,
                                          "attack": {"kind": "intercept_resend"}, "detector": {"eta": 1.0},
                                          "channel": {"loss_db": 0.0}, "params": {"forward_check": 0.5}}))
        assert m.rates["forward_error"].n > 20_000
        assert abs(m.value("forward_error") - 0.25) <= 0.01


BLINDING = {"ghz_qss": "confidentiality", "iss_qds": "unforgeability", "dss_qds": "unforgeability",
            "si_qrng": "randomness"}


def test_04_blinding(cell_results):
    with criterion(4, "blinding: zero added error, full knowledge, verdicts"):
        for protocol, prop in BLINDING.items():
            _, res = cell_results[(protocol, "detector_control")]
            honest = run_trials(parse_config({"protocol": protocol, "seed": res.config.seed}))
            for t in res.trials:
                assert t.added_error == 0, protocol
            assert res.aggregate.value("eve_knowledge") == 1.0, protocol
            assert res.aggregate.legit_accept == honest.aggregate.legit_accept == 1.0, protocol
            assert (res.verdict.property, res.verdict.status) == (prop, "broken"), protocol
        qrng = cell_results[("si_qrng", "detector_control")][1].aggregate
        assert qrng.rates["eve_knowledge"].k == qrng.rates["eve_knowledge"].n == qrng.counts["raw_bits"] > 0
        assert qrng.value("e_bx") == 0


def test_05_wavelength(cell_results):
    with criterion(5, "wavelength attack and active-basis countermeasure"):
        from test_attacks import _wavelength_stats
        agree, _ = _wavelength_stats(0.99, 40_000, np.random.default_rng(105))
        assert abs(agree - 0.99) <= 0.005
        base = {"protocol": "iss_qds", "trials": 100, "n_rounds": 2000, "seed": 105, "attack": {"kind": "wavelength"}}
        res = run_trials(parse_config(base), honest_twin=False)
        accepted = sum(t.metrics.value("forgery_accept.charlie") == 1 and not t.metrics.aborted for t in res.trials)
        assert accepted >= 99
        res = run_trials(parse_config({**base, "countermeasures": {"active_basis": True}}), honest_twin=False)
        assert abs(res.aggregate.value("basis_agreement") - 0.5) <= 0.01
        accepted = sum(t.metrics.value("forgery_accept.charlie") == 1 and not t.metrics.aborted for t in res.trials)
        assert accepted < 1


def test_06_trojan_horse():
    with criterion(6, "Trojan-horse read law, DSS forgery, SQ secret"):
        rng = np.random.default_rng(106)
        for n_bar in (1.0, 4.0, 10.0):
            assert trojan_read_probability(n_bar) == pytest.approx(1 - poisson.cdf(3, n_bar))
            reads = sum(trojan_probe(1, n_bar, rng) is not None for _ in range(100_000))
            assert abs(reads / 1e5 - (1 - poisson.cdf(3, n_bar))) <= 0.005, n_bar
        full = {"kind": "trojan", "mean_reflected_photons": 1e3}
        _, m = run_scenario(parse_config({"protocol": "dss_qds", "seed": 106, "attack": full}))
        assert m.value("trojan_read") == 1.0
        assert m.rates["mismatch.eve_bob"].k == m.rates["mismatch.alice_bob"].k
        assert m.eve_success == 1 and m.legit_accept == 1 and not m.aborted
        _, m = run_scenario(parse_config({"protocol": "sq_qss", "seed": 106, "attack": full}))
        assert m.value("eve_knowledge") == 1.0 and m.rates["eve_knowledge"].n > 0 and not m.aborted


def test_07_isolation_budget():
    with criterion(7, "isolation budget at the fibre damage limit"):
        _, per_s = isolation_budget(12.8, IsolationChain())
        assert per_s == pytest.approx(1.0e20, rel=0.01)
        n_bar, _ = isolation_budget(12.8, IsolationChain(modulator_reflectivity_db=170.0), rep_rate=1e9)
        assert n_bar == pytest.approx(1.0e-6, rel=0.01)
        assert trojan_read_probability(n_bar) <= 1e-3


def test_08_pns():
    with criterion(8, "photon-number splitting"):
        rng = np.random.default_rng(108)
        n = 100_000
        stored = 0
        right = 0
        for _ in range(n):
            sym = SYMBOLS[int(rng.integers(4))]
            kept, _ = pns_split(OpticalPulse(mu=0.5, encoding=sym.state), rng)
            if kept is not None:
                stored += 1
                right += measure_stored(kept, sym.meas_basis, rng) == sym.outcome
        assert abs(stored / n - 0.0902) <= 0.003
        assert right == stored > 0


def _decode_errors(loss, rng, n_bits=64, flip=0.0):
    bits = rng.integers(2, size=n_bits)
    seq = freq_encode(bits) * (rng.random(n_bits * 256) >= loss)
    if flip:
        seq = seq * np.where(rng.random(len(seq)) < flip, -1, 1)
    return int((freq_decode(seq) != bits).sum())


def test_09_frequency_decoding():
    with criterion(9, "QSDC frequency decoding under loss"):
        rng = np.random.default_rng(109)
        clean = sum(_decode_errors(0.5, rng) == 0 for _ in range(100))
        assert clean >= 99
        # With symbol noise on top, the bit error rate must not improve as loss grows.
        rates = [np.mean([_decode_errors(loss, rng, flip=0.45) for _ in range(100)]) / 64
                 for loss in (0.0, 0.25, 0.5, 0.75)]
        assert all(a <= b for a, b in zip(rates, rates[1:])), rates
        assert rates[-1] > rates[0]


def test_10_bqc_blindness():
    with criterion(10, "BQC blindness"):
        _, m = run_scenario(parse_config({"protocol": "bqc", "n_rounds": 1_200_000, "seed": 110}))
        assert m.counts["delivered"] >= 100_000
        assert abs(m.value("blindness") - 0.125) <= 0.01
        rng = np.random.default_rng(110)
        for theta in range(GRID):
            d = delta_index(rng.integers(GRID, size=50_000), theta, rng.integers(2, size=50_000))
            assert chisquare(np.bincount(d, minlength=GRID)).pvalue > 0.01
        _, m = run_scenario(parse_config({"protocol": "bqc", "seed": 110,
                                          "attack": {"kind": "trojan", "mean_reflected_photons": 1e3}}))
        assert m.value("blindness") == pytest.approx(1.0)
        assert _sdp_guess_probability() == pytest.approx(0.25, abs=1e-4)
        for mu in (0.5, 6.0):
            _, m = run_scenario(parse_config({"protocol": "bqc", "n_rounds": 40_000, "seed": 110,
                                              "attack": {"kind": "pns"}, "params": {"bqc_mu": mu}}))
            assert 0.125 < m.value("blindness") < 1.0
            assert abs(m.value("blindness") - _pns_expected(mu)) <= 0.02


def test_11_calibration():
    with criterion(11, "calibration catches blinding, rare false positives"):
        rng = np.random.default_rng(111)
        cfg = CalibrationConfig(test_rate=0.05, batch_size=20, tolerance=1e-3)
        blinded = DetectorModel(eta=0.5, mode="blinded")
        assert all(calibrate(blinded, cfg, rng)[0] for _ in range(10_000))
        assert 0.5 ** 20 < 1e-6
        flagged = sum(calibrate(DetectorModel(eta=0.5), cfg, rng)[0] for _ in range(20_000))
        assert flagged / 20_000 <= 1e-3
        for protocol in ("iss_qds", "dss_qds", "ghz_qss", "si_qrng", "dl04_qsdc"):
            res = run_trials(parse_config({"protocol": protocol, "n_rounds": 2000, "seed": 111,
                                           "attack": {"kind": "blind_control"},
                                           "countermeasures": {"calibration_rate": 0.05}}), honest_twin=False)
            assert res.verdict.status == "attack-detected", protocol


def test_12_table_oracle(cell_results):
    with criterion(12, "attack matrix reproduced; dash cells rejected"):
        assert len(cell_results) == len(applicable_cells()) == 13
        for (protocol, column), (prop, res) in cell_results.items():
            assert res.verdict.status == "broken", (protocol, column)
            assert res.verdict.property == MATRIX[protocol][column]
        dash = inapplicable_cells()
        assert len(dash) == 15
        for protocol, column in dash:
            kind = {"source_side_channel": "source_distinguish", "wavelength": "wavelength",
                    "detector_control": "blind_control", "trojan_horse": "trojan"}[column]
            with pytest.raises(NotApplicableError):
                check_applicable(protocol, kind)
        with pytest.raises(NotApplicableError):
            run_trials(parse_config({"protocol": "si_qrng", "attack": {"kind": "trojan"}}))


SCENARIO_KINDS = [(p, None) for p in MATRIX] + [(p, cell_kind(p, c)) for p, c, _ in applicable_cells()]


def test_13_determinism():
    with criterion(13, "same seed, byte-identical report"):
        _check_determinism()


@settings(max_examples=20, deadline=None)
@given(case=st.sampled_from(SCENARIO_KINDS), seed=st.integers(0, 2**64 - 1))
def _check_determinism(case, seed):
    protocol, kind = case
    d = {"protocol": protocol, "seed": seed, "n_rounds": 1500, "trials": 2}
    if kind:
        d["attack"] = {"kind": kind}
    cfg = parse_config(d)
    assert render_report(run_trials(cfg)) == render_report(run_trials(cfg))
