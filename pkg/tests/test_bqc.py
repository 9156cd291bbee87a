import math

import cvxpy as cp
import numpy as np
import pytest
from scipy.stats import chisquare, poisson

from qcsim.config import parse_config
from qcsim.protocols.bqc import (
    GRID, ServerView, bqc_blindness, bqc_delta, bqc_prepare, delta_index, delta_likelihood, srm_likelihood, srm_povm,
)
from qcsim.runner import run_scenario


def test_prepare_zero_is_plus():
    assert np.allclose(bqc_prepare(0).amplitudes, [2 ** -0.5, 2 ** -0.5])
    assert np.allclose(bqc_prepare(2).amplitudes, [2 ** -0.5, 1j * 2 ** -0.5])
    with pytest.raises(ValueError):
        bqc_prepare(8)


def test_delta_example():
    assert bqc_delta(math.pi / 4, math.pi / 2, 1) == pytest.approx(7 * math.pi / 4)
    assert int(delta_index(1, 2, 1)) == 7


def test_delta_uniform_for_every_theta():
    rng = np.random.default_rng(0)
    n = 80_000
    for theta in (0, 3, 7):
        d = delta_index(rng.integers(GRID, size=n), theta, rng.integers(2, size=n))
        assert chisquare(np.bincount(d, minlength=GRID)).pvalue > 0.001
    assert np.allclose(delta_likelihood(), 1 / GRID)


def _sdp_guess_probability():
    states = [bqc_prepare(k).amplitudes for k in range(GRID)]
    ops = [cp.Variable((2, 2), hermitian=True) for _ in range(GRID)]
    cons = [e >> 0 for e in ops] + [sum(ops) == np.eye(2)]
    obj = sum(cp.real(cp.trace(e @ np.outer(v, v.conj()))) for e, v in zip(ops, states)) / GRID
    prob = cp.Problem(cp.Maximize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def test_square_root_measurement_is_optimal():
    best = _sdp_guess_probability()
    assert best == pytest.approx(0.25, abs=1e-5)
    srm = srm_likelihood()
    assert np.trace(srm) / GRID == pytest.approx(best, abs=1e-5)
    povm = srm_povm([bqc_prepare(k) for k in range(GRID)])
    assert np.allclose(sum(povm), np.eye(2))


def test_blindness_without_side_information():
    rng = np.random.default_rng(1)
    n = 1000
    view = ServerView(rng.integers(GRID, size=n), rng.integers(2, size=n), np.ones((n, GRID)))
    assert bqc_blindness(view) == pytest.approx(1 / GRID)


def test_honest_blindness():
    _, m = run_scenario(parse_config({"protocol": "bqc"}))
    assert abs(m.value("blindness") - 0.125) < 0.01
    assert m.eve_success == 0 and not m.aborted


def test_trojan_full_read():
    _, m = run_scenario(parse_config({"protocol": "bqc", "attack": {"kind": "trojan", "mean_reflected_photons": 1e3}}))
    assert m.value("blindness") == pytest.approx(1.0)
    assert m.eve_success == 1


def _pns_expected(mu):
    multi = poisson.sf(1, mu) / poisson.sf(0, mu)
    return multi * 0.25 + (1 - multi) / GRID


@pytest.mark.parametrize("mu", [0.1, 1.0, 6.0])
def test_pns_blindness_matches_optimum(mu):
    _, m = run_scenario(parse_config({"protocol": "bqc", "n_rounds": 40_000, "attack": {"kind": "pns"},
                                      "params": {"bqc_mu": mu}}))
    assert abs(m.value("blindness") - _pns_expected(mu)) < 0.02


def test_pns_leak_grows_with_mu():
    seen = []
    for mu in (0.05, 0.5, 2.0, 6.0):
        _, m = run_scenario(parse_config({"protocol": "bqc", "n_rounds": 20_000, "attack": {"kind": "pns"},
                                          "params": {"bqc_mu": mu}}))
        seen.append(m.value("blindness"))
    assert seen == sorted(seen)
    assert seen[-1] > 0.24
