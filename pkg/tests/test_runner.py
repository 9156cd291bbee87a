import numpy as np
from hypothesis import given, strategies as st

from qcsim.config import parse_config
from qcsim.metrics import Metrics, Rate, aggregate
from qcsim.runner import run_trials, trial_seed


def test_trial_zero_uses_base_seed():
    assert trial_seed(42, 0) == 42
    assert trial_seed(42, 1) != trial_seed(42, 2)


@given(seed=st.integers(0, 2**64 - 1), i=st.integers(1, 10_000))
def test_trial_seed_fits_u64(seed, i):
    assert 0 <= trial_seed(seed, i) < 2**64


def test_same_seed_same_results():
    cfg = parse_config({"protocol": "sq_qss", "n_rounds": 2000, "trials": 3, "seed": 11,
                        "attack": {"kind": "intercept_resend"}})
    a, b = run_trials(cfg), run_trials(cfg)
    assert [t.digest for t in a.trials] == [t.digest for t in b.trials]
    assert a.aggregate.to_dict() == b.aggregate.to_dict()


def test_parallel_matches_serial():
    cfg = parse_config({"protocol": "iss_qds", "n_rounds": 1000, "trials": 4, "seed": 3})
    serial, par = run_trials(cfg), run_trials(cfg, jobs=2)
    assert [t.digest for t in serial.trials] == [t.digest for t in par.trials]
    assert serial.aggregate.to_dict() == par.aggregate.to_dict()


def test_different_seeds_differ():
    a = run_trials(parse_config({"protocol": "bqc", "n_rounds": 1000, "seed": 1}))
    b = run_trials(parse_config({"protocol": "bqc", "n_rounds": 1000, "seed": 2}))
    assert a.trials[0].digest != b.trials[0].digest


def test_honest_twin_added_error():
    res = run_trials(parse_config({"protocol": "sq_qss", "n_rounds": 4000, "attack": {"kind": "intercept_resend"}}))
    t = res.trials[0]
    assert t.honest_error == 0
    assert t.added_error == t.metrics.error > 0.1
    honest = run_trials(parse_config({"protocol": "sq_qss", "n_rounds": 1000}))
    assert honest.trials[0].added_error is None


def test_aggregate_pools_and_abort_rule():
    ok = Metrics(rates={"error": Rate(1, 10)}, values={"v": 1.0}, counts={"c": 2})
    bad = Metrics(rates={"error": Rate(3, 10)}, values={"v": 3.0}, counts={"c": 1}, aborted=True, abort_reason="x")
    m = aggregate([ok, bad])
    assert m.rates["error"] == Rate(4, 20) and m.values["v"] == 2.0 and m.counts["c"] == 3
    assert m.aborted and m.abort_fraction == 0.5
    assert not aggregate([ok, ok, bad]).aborted
    assert aggregate([]).rates == {}


def test_rate_se():
    r = Rate(25, 100)
    assert np.isclose(r.se, np.sqrt(0.25 * 0.75 / 100))
