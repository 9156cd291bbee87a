import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcsim.config import parse_config
from qcsim.photonics import ghz_state
from qcsim.protocols.qss import (
    GHZ_CORRELATIONS, LAST_PHASES, PHASES, SET_A, SET_B, TRIPLES, CorrelationTable, GhzRound, ghz_reconstruct,
    ghz_round, ghz_sample, ghz_sift, phase_bit, phase_label, sq_click_probability, sq_coalition_guess,
    sq_reconstruct, sq_round, sq_sift,
)
from qcsim.runner import run_scenario

# Outcome-product signs from expanding (|HHH> + |VVV>)/sqrt(2) in the X/Y eigenbases.
EXPECTED_SIGNS = {"XXX": 1, "XYY": -1, "YXY": -1, "YYX": -1}


def test_correlation_table_signs():
    assert dict(GHZ_CORRELATIONS.signs) == EXPECTED_SIGNS
    assert CorrelationTable.from_state(ghz_state()) == GHZ_CORRELATIONS


def test_ghz_round_correlations():
    rng = np.random.default_rng(0)
    for _ in range(3000):
        r = ghz_round(rng)
        if r.bases in EXPECTED_SIGNS:
            assert math.prod(r.outcomes) == EXPECTED_SIGNS[r.bases]


def test_ghz_sample_matches_sequential_measurement():
    tri, outs = ghz_sample(200_000, np.random.default_rng(1))
    for i, t in enumerate(TRIPLES):
        prod = outs[tri == i].prod(axis=1)
        if t in EXPECTED_SIGNS:
            assert (prod == EXPECTED_SIGNS[t]).all()
        else:
            assert abs(prod.mean()) <= 0.02
        # Every single party's outcome is unbiased.
        assert abs(outs[tri == i, 0].mean()) < 0.02


def test_ghz_xxy_uncorrelated():
    rng = np.random.default_rng(2)
    prods = []
    while len(prods) < 20_000:
        r = ghz_round(rng)
        if r.bases == "XXY":
            prods.append(math.prod(r.outcomes))
    assert abs(np.mean(prods)) <= 0.02


def test_ghz_sift():
    rounds = [GhzRound("XXX", (1, 1, 1)), GhzRound("YYY", (1, -1, 1)), GhzRound("XYY", (1, 1, -1))]
    assert [r.bases for r in ghz_sift(rounds)] == ["XXX", "XYY"]
    assert ghz_sift([]) == []


def test_ghz_reconstruct():
    assert ghz_reconstruct(1, 1, "XXX") == 1
    assert ghz_reconstruct(1, -1, "XXX") == -1
    assert ghz_reconstruct(1, 1, "XYY") == -1
    with pytest.raises(ValueError):
        ghz_reconstruct(1, 1, "YYY")


def test_ghz_reconstruct_accuracy_and_keep_rate():
    tri, outs = ghz_sample(40_000, np.random.default_rng(3))
    kept = [i for i in range(len(tri)) if GHZ_CORRELATIONS.is_correlated(TRIPLES[tri[i]])][:10_000]
    assert all(ghz_reconstruct(outs[i, 0], outs[i, 1], TRIPLES[tri[i]]) == outs[i, 2] for i in kept)
    keep = np.mean([GHZ_CORRELATIONS.is_correlated(TRIPLES[t]) for t in tri])
    assert abs(keep - 0.5) < 0.01


def test_sq_round_extremes():
    rng = np.random.default_rng(4)
    assert all(sq_round([0.0, 0.0, 0.0], rng) == "D1" for _ in range(1000))
    assert all(sq_round([math.pi / 2, math.pi / 2, 0.0], rng) == "D2" for _ in range(1000))
    d1 = sum(sq_round([math.pi / 2, 0.0], rng) == "D1" for _ in range(100_000))
    assert abs(d1 / 1e5 - 0.5) < 0.01


def test_sq_click_probability_formula():
    for total in (0, math.pi / 2, math.pi, 3 * math.pi / 2):
        assert sq_click_probability([total]) == pytest.approx(0.5 * (1 + math.cos(total)), abs=1e-12)


def test_sq_sift():
    assert sq_sift([SET_A] * 4)
    assert sq_sift([SET_A] * 5)
    assert not sq_sift([SET_B, SET_A, SET_A])
    assert sq_sift([SET_B, SET_B, SET_A])


def test_sq_deterministic_fraction():
    rng = np.random.default_rng(5)
    n, det = 100_000, 0
    for _ in range(n):
        labels = [phase_label(PHASES[int(rng.integers(4))]) for _ in range(4)]
        labels.append(phase_label(LAST_PHASES[int(rng.integers(2))]))
        det += sq_sift(labels)
    assert abs(det / n - 0.5) < 0.01


def test_sq_reconstruct():
    assert sq_reconstruct([0.0, 0.0], "D1", SET_A) == 0.0
    assert sq_reconstruct([0.0, 0.0], "D2", SET_A) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        sq_reconstruct([0.0, 0.0], "D1", SET_B)


def test_phase_bit_convention():
    assert [phase_bit(p) for p in PHASES] == [0, 0, 1, 1]
    with pytest.raises(ValueError):
        phase_label(0.3)


def _deterministic_round(rng, n):
    while True:
        phases = [PHASES[int(rng.integers(4))] for _ in range(n - 1)] + [LAST_PHASES[int(rng.integers(2))]]
        labels = [phase_label(p) for p in phases]
        if sq_sift(labels):
            return phases, labels, sq_round(phases, rng)


@settings(max_examples=10, deadline=None)
@given(n=st.integers(3, 6), seed=st.integers(0, 2**32))
def test_collusion_completeness(n, seed):
    rng = np.random.default_rng(seed)
    full = partial = trials = 0
    for _ in range(400):
        phases, labels, click = _deterministic_round(rng, n)
        target = int(rng.integers(n - 1))
        others = {i: phases[i] for i in range(n) if i != target}
        full += sq_coalition_guess(others, labels, click, target, rng) == phase_bit(phases[target])
        drop = int(rng.choice([i for i in range(n) if i != target]))
        fewer = {i: p for i, p in others.items() if i != drop}
        # Only R_N sees which detector fired.
        seen = click if drop != n - 1 else None
        partial += sq_coalition_guess(fewer, labels, seen, target, rng) == phase_bit(phases[target])
        trials += 1
    assert full == trials
    assert abs(partial / trials - 0.5) < 0.1


def test_n_minus_two_no_information():
    rng = np.random.default_rng(6)
    hits = 0
    n_trials = 5000
    for _ in range(n_trials):
        phases, labels, click = _deterministic_round(rng, 5)
        known = {i: phases[i] for i in (1, 2, 4)}
        hits += sq_coalition_guess(known, labels, click, 0, rng) == phase_bit(phases[0])
    assert abs(hits / n_trials - 0.5) < 0.02


def test_sq_honest_run():
    _, m = run_scenario(parse_config({"protocol": "sq_qss", "n_rounds": 20_000}))
    assert m.error == 0
    assert m.rates["error"].n > 4000
    assert abs(m.counts["deterministic_rounds"] / m.counts["clicks"] - 0.5) < 0.02
    assert m.legit_accept == 1


def test_ghz_honest_keeps_parity():
    _, m = run_scenario(parse_config({"protocol": "ghz_qss", "n_rounds": 20_000, "detector": {"eta": 1.0}}))
    assert m.error == 0
    assert abs(m.counts["kept"] / 20_000 - 0.5) < 0.02


def test_ghz_channel_noise_shows_up():
    _, m = run_scenario(parse_config({"protocol": "ghz_qss", "n_rounds": 10_000, "channel": {"flip_prob": 0.02}}))
    assert 0.03 < m.error < 0.09
