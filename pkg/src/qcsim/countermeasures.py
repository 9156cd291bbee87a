"""Countermeasures: isolation budgeting, wavelength filtering, watchdog
detectors and real-time detector calibration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.stats import binom

from .constants import NOMINAL_WAVELENGTH_NM, photon_energy
from .errors import ConfigurationError
from .photonics import DetectorModel, Incident, OpticalPulse, attenuate, detect

FIBER_DAMAGE_LIMIT_W = 12.8


@dataclass(frozen=True)
class IsolationComponent:
    name: str
    attenuation_db: float
    direction: str = "bidirectional"  # or "return-path-only"

    def __post_init__(self):
        if self.attenuation_db < 0:
            raise ConfigurationError("attenuation must be nonnegative", f"{self.name}.attenuation_db")
        if self.direction not in ("bidirectional", "return-path-only"):
            raise ConfigurationError(f"unknown direction {self.direction!r}", f"{self.name}.direction")

    @property
    def round_trip_db(self) -> float:
        # Probe light crosses a bidirectional element on the way in and again on the way out.
        return 2 * self.attenuation_db if self.direction == "bidirectional" else self.attenuation_db


@dataclass(frozen=True)
class IsolationChain:
    components: tuple[IsolationComponent, ...] = ()
    modulator_reflectivity_db: float = 0.0
    max_injected_power: float = FIBER_DAMAGE_LIMIT_W

    def __post_init__(self):
        if self.modulator_reflectivity_db < 0:
            raise ConfigurationError("reflectivity must be given as nonnegative dB", "modulator_reflectivity_db")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def total_isolation_db(self) -> float:
        return self.modulator_reflectivity_db + sum(c.round_trip_db for c in self.components)

    def with_component(self, c: IsolationComponent) -> "IsolationChain":
        return replace(self, components=self.components + (c,))


def isolation_budget(p_in: float, chain: IsolationChain, wavelength: float = NOMINAL_WAVELENGTH_NM,
                     rep_rate: float = 1e9) -> tuple[float, float]:
    """Reflected Trojan light: (mean photons per modulation window, photons per second)."""
    if p_in < 0:
        raise ConfigurationError("injected power must be nonnegative", "injected_power_w")
    if p_in > chain.max_injected_power:
        raise ConfigurationError(
            f"injected power {p_in} W exceeds the {chain.max_injected_power} W fiber damage limit",
            "injected_power_w")
    if rep_rate <= 0:
        raise ConfigurationError("repetition rate must be positive", "rep_rate_hz")
    per_second = p_in * 10.0 ** (-chain.total_isolation_db / 10.0) / photon_energy(wavelength)
    return per_second / rep_rate, per_second


def required_isolation_db(target_n_bar: float, p_in: float = FIBER_DAMAGE_LIMIT_W,
                          wavelength: float = NOMINAL_WAVELENGTH_NM, rep_rate: float = 1e9) -> float:
    """Isolation that brings the reflected photons per window down to ``target_n_bar``."""
    if target_n_bar <= 0:
        raise ValueError("target photon number must be positive")
    unattenuated = p_in / photon_energy(wavelength) / rep_rate
    return 10.0 * math.log10(unattenuated / target_n_bar)


@dataclass(frozen=True)
class FilterSpec:
    passband: tuple[float, float] = (1549.0, 1551.0)
    stopband_extinction_db: float = 60.0

    def __post_init__(self):
        lo, hi = self.passband
        if not 0 < lo <= hi:
            raise ConfigurationError("passband must be an increasing positive interval", "passband_nm")
        if not math.isfinite(self.stopband_extinction_db) or self.stopband_extinction_db < 0:
            raise ConfigurationError("extinction must be finite and nonnegative", "stopband_extinction_db")

    def in_band(self, wavelength: float) -> bool:
        return self.passband[0] <= wavelength <= self.passband[1]


def filter_apply(p: OpticalPulse, f: FilterSpec, rng: np.random.Generator | None = None) -> OpticalPulse:
    """In-band light passes untouched; out-of-band light loses ``extinction`` dB."""
    if f.in_band(p.wavelength):
        return p
    t = 10.0 ** (-f.stopband_extinction_db / 10.0)
    if p.photons is not None and rng is None:
        raise ValueError("thinning a Fock pulse needs a random stream")
    return attenuate(p, t, rng)


def watchdog_check(tap: DetectorModel, incident: Incident, rng: np.random.Generator) -> tuple[bool, DetectorModel]:
    """Alarm iff the tap detector clicks during a gate.

    The watchdog is an ordinary detector, so CW light above its blinding
    threshold silences it.
    """
    return detect(tap, incident, rng)


@dataclass(frozen=True)
class CalibrationConfig:
    test_rate: float = 0.05
    batch_size: int = 20
    tolerance: float = 1e-3  # allowed false-positive probability per batch
    test_photons: int = 1

    def __post_init__(self):
        if not 0.0 <= self.test_rate <= 1.0:
            raise ConfigurationError("test_rate outside [0, 1]", "test_rate")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive", "batch_size")

    def expected_click_rate(self, eta: float) -> float:
        return 1.0 - (1.0 - eta) ** self.test_photons


@lru_cache(maxsize=64)
def click_floor(batch_size: int, p_click: float, tolerance: float) -> int:
    """Largest click count that flags a batch; -1 if no count is rare enough."""
    k = -1
    while k + 1 <= batch_size and binom.cdf(k + 1, batch_size, p_click) <= tolerance:
        k += 1
    return k


def calibrate(detector: DetectorModel, cfg: CalibrationConfig, rng: np.random.Generator) -> tuple[bool, DetectorModel]:
    """Fire one batch of local test pulses; True when the click count is implausibly low."""
    if cfg.test_rate == 0:
        return False, detector
    clicks = 0
    for _ in range(cfg.batch_size):
        c, detector = detect(detector, Incident(photons=cfg.test_photons), rng)
        clicks += c
    floor = click_floor(cfg.batch_size, cfg.expected_click_rate(detector.eta), cfg.tolerance)
    return clicks <= floor, detector


@dataclass
class CalibrationMonitor:
    """Receiver-side bookkeeping for calibration interleaved with protocol slots.

    Each slot is sacrificed to a test pulse with probability ``test_rate``
    (drawn from the receiver's private stream); each full batch of tests is
    scored per detector role.
    """

    cfg: CalibrationConfig
    rng: np.random.Generator
    tests: int = 0
    flagged_batches: int = 0
    _clicks: list[int] = field(default_factory=list)

    def take_slot(self) -> bool:
        return self.cfg.test_rate > 0 and self.rng.random() < self.cfg.test_rate

    def run_test(self, detectors: dict, key) -> None:
        d = detectors[key]
        c, detectors[key] = detect(d, Incident(photons=self.cfg.test_photons), self.rng)
        self.tests += 1
        self._clicks.append(int(c))
        if len(self._clicks) == self.cfg.batch_size:
            floor = click_floor(self.cfg.batch_size, self.cfg.expected_click_rate(d.eta), self.cfg.tolerance)
            if sum(self._clicks) <= floor:
                self.flagged_batches += 1
            self._clicks.clear()

    @property
    def detected(self) -> bool:
        return self.flagged_batches > 0
