import math

import numpy as np
import pytest

from qcsim.devices import DpsReceiver, PolarizationReceiver
from qcsim.photonics import BsModel, DetectorModel, OpticalPulse
from qcsim.protocols.common import BASES, SYMBOLS


def _rx(active=False, eta=1.0, **kw):
    return PolarizationReceiver(BASES, BsModel.constant(0.5), DetectorModel(eta=eta), active=active, **kw)


def _fock(sym, n=1):
    return OpticalPulse(mu=n, photons=n, encoding=sym.state)


def test_nothing_in_nothing_out(rng):
    assert _rx().receive(None, rng) is None
    assert _rx().receive(OpticalPulse(mu=0.0), rng) is None


def test_unknown_arm(rng):
    with pytest.raises(ValueError):
        _rx().receive(_fock(SYMBOLS[0]), rng, arm="Y")
    with pytest.raises(ValueError):
        PolarizationReceiver({"Z": BASES["Z"]}, BsModel.constant(0.5), DetectorModel())


@pytest.mark.parametrize("active", [False, True])
def test_basis_choice_balanced(active, rng):
    rx = _rx(active=active)
    bases = [rx.receive(_fock(SYMBOLS[0]), rng).basis for _ in range(20_000)]
    assert abs(bases.count("Z") / 20_000 - 0.5) < 0.015


def test_matched_basis_deterministic(rng):
    rx = _rx()
    for sym in SYMBOLS:
        for _ in range(200):
            d = rx.receive(_fock(sym), rng, arm=sym.basis)
            assert (d.basis, d.outcome) == (sym.basis, sym.outcome)


def test_multi_photon_double_clicks_flagged(rng):
    rx = _rx()
    dets = [rx.receive(_fock(SYMBOLS[0], 8), rng) for _ in range(2000)]
    multi = [d for d in dets if d.multi]
    assert 0.9 < len(multi) / 2000 < 1.0


def test_efficiency_scales_clicks(rng):
    rx = _rx(eta=0.3)
    clicks = sum(rx.receive(_fock(SYMBOLS[1]), rng) is not None for _ in range(20_000))
    assert abs(clicks / 20_000 - 0.3) < 0.015


def test_flip_noise(rng):
    rx = _rx(flip_prob=0.1)
    wrong = sum(rx.receive(_fock(SYMBOLS[0]), rng, arm="Z").outcome != SYMBOLS[0].outcome for _ in range(20_000))
    assert abs(wrong / 20_000 - 0.1) < 0.01


def _dps_bit(rx, dphi, rng):
    prev, cur = OpticalPulse(mu=1.0, phase=0.0), OpticalPulse(mu=1.0, phase=dphi)
    return rx.receive(prev, cur, rng)


def test_dps_phase_difference_routes(rng):
    rx = DpsReceiver(DetectorModel(eta=1.0))
    assert {_dps_bit(rx, 0.0, rng) for _ in range(500)} == {0}
    assert {_dps_bit(rx, math.pi, rng) for _ in range(500)} == {1}


def test_dps_click_rate(rng):
    rx = DpsReceiver(DetectorModel(eta=0.5))
    pulses = [OpticalPulse(mu=0.2, phase=0.0) for _ in range(2)]
    clicks = sum(rx.receive(*pulses, rng) is not None for _ in range(50_000))
    assert abs(clicks / 50_000 - 0.1) < 0.005


def test_dps_blinded_by_cw(rng):
    rx = DpsReceiver(DetectorModel(eta=1.0, p_blind=1e-6))
    cur = OpticalPulse(mu=1.0, phase=0.0, cw_power=1e-5)
    assert rx.receive(OpticalPulse(mu=1.0, phase=0.0), cur, rng) is None
    assert rx.blinded
