"""Turn a :class:`ScenarioConfig` into device and adversary objects."""
from __future__ import annotations

import math

from .attacks import TrojanProbe, photons_per_window
from .config import ScenarioConfig
from .countermeasures import (
    CalibrationConfig, CalibrationMonitor, FilterSpec, IsolationChain, IsolationComponent,
    isolation_budget,
)
from .devices import DpsReceiver, PolarizationReceiver
from .harness import QuantumChannel
from .photonics import BsModel, DetectorModel, MeasBasis


def detector(cfg: ScenarioConfig) -> DetectorModel:
    d = cfg.detector
    return DetectorModel(eta=d.eta, dark_prob=d.dark_prob, p_blind=d.p_blind if d.blindable else math.inf,
                         e_click=d.e_click)


def bs_model(cfg: ScenarioConfig, table=None) -> BsModel:
    return BsModel(nominal_t=cfg.detector.split_ratio,
                   table=tuple(map(tuple, cfg.detector.bs_table if table is None else table)))


def filter_spec(cfg: ScenarioConfig) -> FilterSpec | None:
    f = cfg.countermeasures.filter
    if f is None:
        return None
    return FilterSpec(passband=tuple(f.passband_nm), stopband_extinction_db=f.stopband_extinction_db)


def polarization_receiver(cfg: ScenarioConfig, bases: dict[str, MeasBasis]) -> PolarizationReceiver:
    return PolarizationReceiver(bases, bs_model(cfg), detector(cfg), active=cfg.countermeasures.active_basis,
                                flip_prob=cfg.channel.flip_prob, filt=filter_spec(cfg))


def dps_receiver(cfg: ScenarioConfig) -> DpsReceiver:
    return DpsReceiver(detector(cfg), flip_prob=cfg.channel.flip_prob)


def channel(cfg: ScenarioConfig, name: str) -> QuantumChannel:
    return QuantumChannel(loss_db=cfg.channel.loss_db, name=name)


def calibration(cfg: ScenarioConfig, rng) -> CalibrationMonitor | None:
    cm = cfg.countermeasures
    if cm.calibration_rate <= 0:
        return None
    return CalibrationMonitor(CalibrationConfig(test_rate=cm.calibration_rate, batch_size=cm.calibration_batch,
                                                tolerance=cm.calibration_tolerance), rng)


def isolation_chain(cfg: ScenarioConfig, pass_through: bool = False) -> IsolationChain:
    """Isolation seen by a Trojan probe.

    Pass-through modulators (plug-and-play secret sharing, two-way direct
    communication) cannot sit behind isolators, which would block the
    signal itself, so only the modulator's own reflectivity counts there.
    """
    cm = cfg.countermeasures
    comps = () if pass_through else tuple(
        IsolationComponent(c.name, c.attenuation_db, c.direction) for c in cm.isolation)
    return IsolationChain(comps, cm.modulator_reflectivity_db)


def reflected_photons(cfg: ScenarioConfig, pass_through: bool = False) -> float:
    a = cfg.attack
    if a.mean_reflected_photons is not None:
        return a.mean_reflected_photons
    n_bar, _ = isolation_budget(a.injected_power_w, isolation_chain(cfg, pass_through), rep_rate=a.rep_rate_hz)
    return n_bar


def trojan_probe(cfg: ScenarioConfig, pass_through: bool = False) -> TrojanProbe:
    a, cm = cfg.attack, cfg.countermeasures
    watchdog = None
    tap = 0.0
    if cm.watchdog:
        watchdog = DetectorModel(eta=cm.watchdog_eta, dark_prob=cm.watchdog_dark_prob,
                                 p_blind=cfg.detector.p_blind if cfg.detector.blindable else math.inf,
                                 e_click=cfg.detector.e_click)
        tap = photons_per_window(a.injected_power_w, a.rep_rate_hz) * cm.tap_ratio
    return TrojanProbe(n_bar=reflected_photons(cfg, pass_through), threshold=a.readout_threshold,
                       watchdog=watchdog, tap_photons=tap, blind_watchdog=a.blind_watchdog,
                       cw_power=a.cw_power_w)
