"""Adversary building blocks.

Each function is one physical move Eve can make on a single slot; the
protocol engines wire them into interposers.  Everything Eve learns is
appended to an :class:`EveRecord`, which only the metrics read.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

from .constants import NOMINAL_WAVELENGTH_NM, photon_energy
from .countermeasures import watchdog_check
from .photonics import (
    DetectorModel, Incident, MeasBasis, OpticalPulse, PureState, _basis_arrays, eigenstate,
    photon_count,
)

ATTACK_KINDS = ("intercept_resend", "blind_control", "wavelength", "trojan", "pns", "source_distinguish")
RESERVED_KINDS = ("efficiency_mismatch", "after_gate", "superlinearity", "dead_time")


class EveRecord:
    """Append-only per-slot log of what Eve measured, sent and learned."""

    def __init__(self):
        self._entries: list[dict] = []

    def append(self, **entry) -> None:
        self._entries.append(dict(entry))

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return (dict(e) for e in self._entries)

    def where(self, **match) -> list[dict]:
        return [dict(e) for e in self._entries if all(e.get(k) == v for k, v in match.items())]


def born_outcome(state: PureState, basis: MeasBasis, rng: np.random.Generator) -> int:
    plus, _ = _basis_arrays(basis.kind, basis.delta)
    p_plus = float(abs(np.vdot(plus, state.amplitudes)) ** 2)
    return 1 if rng.random() < p_plus else -1


def choose_basis(strategy: str, bases: tuple[MeasBasis, ...], rng: np.random.Generator,
                 true_basis: MeasBasis | None = None) -> MeasBasis:
    if strategy == "random":
        return bases[int(rng.integers(len(bases)))]
    if strategy == "oracle":
        # Test mode: Eve is handed the sender's basis.
        if true_basis is None:
            raise ValueError("oracle strategy needs the sender's basis")
        return true_basis
    raise ValueError(f"unknown basis strategy {strategy!r}")


def intercept_resend(pulse: OpticalPulse, basis: MeasBasis, rng: np.random.Generator,
                     resend_photons: int | None = 1) -> tuple[OpticalPulse | None, int | None, int]:
    """Measure the qubit in ``basis`` and resend the eigenstate found.

    Returns (resent pulse or None, Eve's outcome or None, photons intercepted).
    ``resend_photons=None`` resends as many photons as were intercepted.
    """
    n = photon_count(pulse, rng)
    if n == 0 or pulse.encoding is None:
        return None, None, n
    outcome = born_outcome(pulse.encoding, basis, rng)
    k = n if resend_photons is None else resend_photons
    resent = OpticalPulse(mu=float(k), wavelength=pulse.wavelength, emit_time=pulse.emit_time,
                          encoding=eigenstate(basis, outcome), photons=k)
    return resent, outcome, n


def blind_control(state: PureState, energy_at_detector: float, arm_fraction: float,
                  cw_power: float, wavelength: float = NOMINAL_WAVELENGTH_NM,
                  survival: float = 1.0) -> OpticalPulse:
    """Faked-state pulse for blinded detectors.

    The pulse is sized so that, after a ``survival`` loss and an arm split of
    ``arm_fraction``, the detector matching ``state`` receives
    ``energy_at_detector``; in the conjugate basis each detector then gets
    half of that.  ``cw_power`` keeps the detectors in linear mode.
    """
    if not 0 < arm_fraction <= 1 or not 0 < survival <= 1:
        raise ValueError("arm fraction and survival must be in (0, 1]")
    total = energy_at_detector / (arm_fraction * survival)
    return OpticalPulse(mu=total / photon_energy(wavelength), wavelength=wavelength,
                        encoding=state, cw_power=cw_power / survival)


def wavelength_resend(state: PureState, basis_label: str, wavelength_map: dict[str, float],
                      photons: int = 1) -> OpticalPulse:
    """Resend ``state`` at the wavelength that steers it into ``basis_label``'s arm."""
    return OpticalPulse(mu=float(photons), wavelength=wavelength_map[basis_label],
                        encoding=state, photons=photons)


def trojan_read_probability(n_bar: float, threshold: int = 4) -> float:
    if n_bar <= 0:
        return 0.0
    return float(poisson.sf(threshold - 1, n_bar))


def trojan_probe(setting, n_bar: float, rng: np.random.Generator, threshold: int = 4):
    """Read one modulator setting from back-reflected light, or None."""
    if n_bar <= 0:
        return None
    return setting if rng.poisson(n_bar) >= threshold else None


@dataclass
class TrojanProbe:
    """A Trojan-horse probe aimed at one modulator, optionally watched.

    ``tap_photons`` is the mean number of probe photons the watchdog tap
    sees per window; ``watchdog`` is None when no tap is installed.
    """

    n_bar: float
    threshold: int = 4
    watchdog: DetectorModel | None = None
    tap_photons: float = 0.0
    blind_watchdog: bool = False
    cw_power: float = 1e-5
    alarms: int = 0
    probes: int = 0

    def probe(self, setting, rng: np.random.Generator):
        self.probes += 1
        if self.watchdog is not None:
            n_tap = int(rng.poisson(self.tap_photons)) if self.tap_photons > 0 else 0
            cw = self.cw_power if self.blind_watchdog else 0.0
            alarm, self.watchdog = watchdog_check(self.watchdog, Incident(photons=n_tap, cw_power=cw), rng)
            if alarm:
                self.alarms += 1
        return trojan_probe(setting, self.n_bar, rng, self.threshold)


def pns_split(pulse: OpticalPulse, rng: np.random.Generator) -> tuple[OpticalPulse | None, OpticalPulse]:
    """Photon-number splitting: keep one photon of a multi-photon pulse.

    Returns (stored photon or None, forwarded pulse).  The forwarded pulse is
    a Fock pulse with the remaining photons, so downstream loss thins it
    exactly as it would have thinned the original.
    """
    n = photon_count(pulse, rng)
    if n < 2:
        return None, OpticalPulse(mu=float(n), wavelength=pulse.wavelength, emit_time=pulse.emit_time,
                                  encoding=pulse.encoding, phase=pulse.phase,
                                  decoy_class=pulse.decoy_class, source_id=pulse.source_id, photons=n)
    stored = OpticalPulse(mu=1.0, wavelength=pulse.wavelength, encoding=pulse.encoding,
                          phase=pulse.phase, decoy_class=pulse.decoy_class, photons=1)
    fwd = OpticalPulse(mu=float(n - 1), wavelength=pulse.wavelength, emit_time=pulse.emit_time,
                       encoding=pulse.encoding, phase=pulse.phase, decoy_class=pulse.decoy_class,
                       source_id=pulse.source_id, photons=n - 1)
    return stored, fwd


def measure_stored(stored: OpticalPulse, announced: MeasBasis, rng: np.random.Generator) -> int:
    """Measure a stored photon once the basis is public."""
    return born_outcome(stored.encoding, announced, rng)


@dataclass(frozen=True)
class SourceModel:
    """Per-laser emission-time and central-wavelength offsets of a multi-laser source."""

    time_offsets_ps: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    spectral_offsets_nm: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    time_jitter_ps: float = 10.0
    spectral_jitter_nm: float = 0.0
    center_nm: float = NOMINAL_WAVELENGTH_NM

    def __post_init__(self):
        if len(self.time_offsets_ps) != len(self.spectral_offsets_nm):
            raise ValueError("one time and one spectral offset per laser")
        if self.time_jitter_ps <= 0:
            raise ValueError("timing jitter must be positive")
        if self.spectral_jitter_nm < 0:
            raise ValueError("spectral jitter must be nonnegative")
        object.__setattr__(self, "time_offsets_ps", tuple(float(t) for t in self.time_offsets_ps))
        object.__setattr__(self, "spectral_offsets_nm", tuple(float(w) for w in self.spectral_offsets_nm))

    @property
    def n_lasers(self) -> int:
        return len(self.time_offsets_ps)

    def emit(self, laser: int, rng: np.random.Generator) -> tuple[float, float]:
        """(emission time in ps, wavelength in nm) for one pulse from ``laser``."""
        t = self.time_offsets_ps[laser] + self.time_jitter_ps * rng.standard_normal()
        w = self.center_nm + self.spectral_offsets_nm[laser]
        if self.spectral_jitter_nm > 0:
            w += self.spectral_jitter_nm * rng.standard_normal()
        return float(t), float(w)


def source_classify(emit_time: float, wavelength: float, model: SourceModel) -> tuple[int, float]:
    """Maximum-likelihood laser guess and its posterior probability (uniform prior)."""
    t = np.asarray(model.time_offsets_ps)
    ll = -0.5 * ((emit_time - t) / model.time_jitter_ps) ** 2
    if model.spectral_jitter_nm > 0:
        w = model.center_nm + np.asarray(model.spectral_offsets_nm)
        ll = ll - 0.5 * ((wavelength - w) / model.spectral_jitter_nm) ** 2
    ll = ll - ll.max()
    post = np.exp(ll)
    post /= post.sum()
    guess = int(np.argmax(post))
    return guess, float(post[guess])


@dataclass
class ForwardIfConfident:
    """Discard-or-forward policy on top of :func:`source_classify`."""

    model: SourceModel
    threshold: float = 0.99
    forwarded: int = 0
    discarded: int = 0
    _last: dict = field(default_factory=dict)

    def decide(self, emit_time: float, wavelength: float) -> tuple[int, float, bool]:
        guess, conf = source_classify(emit_time, wavelength, self.model)
        ok = conf >= self.threshold
        if ok:
            self.forwarded += 1
        else:
            self.discarded += 1
        return guess, conf, ok

    @property
    def discard_fraction(self) -> float:
        total = self.forwarded + self.discarded
        return self.discarded / total if total else 0.0


def photons_per_window(power_w: float, rep_rate: float, wavelength: float = NOMINAL_WAVELENGTH_NM) -> float:
    return power_w / photon_energy(wavelength) / rep_rate


def matched_click_probability(n_photons: int, eta: float, survival: float) -> float:
    """Honest click probability for an n-photon pulse; Eve mimics it when resending."""
    return 1.0 - (1.0 - eta * survival) ** n_photons

