"""Measurement stations assembled from the photonic primitives.

:class:`PolarizationReceiver` is a two-basis station (passive beam-splitter
or active basis choice, one detector per basis outcome).
:class:`DpsReceiver` is a one-bit-delay interferometer with two detectors.
Both keep their detectors as mutable per-run state so that blinding persists
across slots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .countermeasures import FilterSpec, filter_apply
from .constants import NOMINAL_WAVELENGTH_NM
from .photonics import (
    BsModel, DetectorModel, Incident, MeasBasis, OpticalPulse, PureState, _basis_arrays,
    bs_route, detect, measure, photon_count,
)


@dataclass(frozen=True)
class Detection:
    basis: str  # arm label, e.g. "Z" or "X"
    outcome: int  # +1 / -1
    multi: bool = False


def _overlap_plus(basis: MeasBasis, amps: np.ndarray) -> float:
    plus, _ = _basis_arrays(basis.kind, basis.delta)
    return float(abs(np.vdot(plus, amps)) ** 2)


class PolarizationReceiver:
    """Two-basis polarization receiver.

    Arm "A" of the beam splitter leads to ``bases[0]``; with ``active`` set the
    receiver picks the arm itself, uniformly, from its own stream.
    """

    def __init__(self, bases: dict[str, MeasBasis], bs: BsModel, detector: DetectorModel,
                 active: bool = False, flip_prob: float = 0.0, filt: FilterSpec | None = None):
        if len(bases) != 2:
            raise ValueError("receiver needs exactly two bases")
        self.labels = tuple(bases)
        self.bases = dict(bases)
        self.bs = bs
        self.active = active
        self.flip_prob = flip_prob
        self.filter = filt
        self.detectors: dict[tuple[str, int], DetectorModel] = {
            (lab, o): detector for lab in self.labels for o in (1, -1)
        }

    @property
    def blinded(self) -> bool:
        return any(d.blinded for d in self.detectors.values())

    def _arm_fractions(self, pulse: OpticalPulse, rng, arm: str | None) -> dict[str, float]:
        if arm is not None:
            return {arm: 1.0}
        if self.active:
            lab = self.labels[int(rng.integers(2))]
            return {lab: 1.0}
        t = self.bs.ratio(pulse.wavelength)
        return {self.labels[0]: t, self.labels[1]: 1.0 - t}

    def receive(self, pulse: OpticalPulse | None, rng: np.random.Generator,
                arm: str | None = None) -> Detection | None:
        """One slot of detection; ``arm`` forces the measurement basis (an actively chosen setting)."""
        if arm is not None and arm not in self.bases:
            raise ValueError(f"unknown arm {arm!r}")
        incident = {k: [0, 0.0] for k in self.detectors}  # photons, energy
        cw = 0.0
        wavelength = pulse.wavelength if pulse is not None else 1550.0
        if pulse is not None:
            if self.filter is not None:
                pulse = filter_apply(pulse, self.filter, rng)
            cw = pulse.cw_power / len(self.detectors)
            amps = pulse.encoding.amplitudes if pulse.encoding is not None else None
            if pulse.is_bright:
                for lab, frac in self._arm_fractions(pulse, rng, arm).items():
                    p_plus = _overlap_plus(self.bases[lab], amps) if amps is not None else 0.5
                    incident[(lab, 1)][1] += pulse.energy * frac * p_plus
                    incident[(lab, -1)][1] += pulse.energy * frac * (1.0 - p_plus)
            else:
                n = photon_count(pulse, rng)
                if n:
                    fixed_arm = arm
                    if fixed_arm is None and self.active:
                        fixed_arm = self.labels[int(rng.integers(2))]
                    for _ in range(n):
                        lab = fixed_arm if fixed_arm is not None else self.choose_arm(pulse.wavelength, rng)
                        p_plus = _overlap_plus(self.bases[lab], amps) if amps is not None else 0.5
                        o = 1 if rng.random() < p_plus else -1
                        incident[(lab, o)][0] += 1
        return self._resolve(incident, cw, wavelength, rng)

    def choose_arm(self, wavelength: float, rng: np.random.Generator) -> str:
        if self.active:
            return self.labels[int(rng.integers(2))]
        return self.labels[0] if bs_route(wavelength, self.bs, rng) == "A" else self.labels[1]

    def receive_entangled(self, state: PureState, subsystem: int, survival: float,
                          rng: np.random.Generator) -> tuple[Detection | None, PureState]:
        """Detect one photon of a multi-qubit state; returns the detection and the collapsed state.

        The photon is measured in the basis of the arm it takes whether or not
        it is then lost, which leaves the other parties' statistics unchanged.
        """
        lab = self.choose_arm(NOMINAL_WAVELENGTH_NM, rng)
        outcome, state = measure(state, subsystem, self.bases[lab], rng)
        incident = {k: [0, 0.0] for k in self.detectors}
        if survival >= 1.0 or rng.random() < survival:
            incident[(lab, outcome)][0] = 1
        return self._resolve(incident, 0.0, NOMINAL_WAVELENGTH_NM, rng), state

    def _resolve(self, incident, cw, wavelength, rng) -> Detection | None:
        clicks = []
        for key, d in self.detectors.items():
            photons, energy = incident[key]
            if d.mode == "geiger" and photons == 0 and energy == 0 and d.dark_prob == 0 and cw < d.p_blind:
                continue
            c, self.detectors[key] = detect(d, Incident(photons, energy, cw, wavelength), rng)
            if c:
                clicks.append(key)
        if not clicks:
            return None
        multi = len(clicks) > 1
        lab, o = clicks[int(rng.integers(len(clicks)))] if multi else clicks[0]
        if self.flip_prob and rng.random() < self.flip_prob:
            o = -o
        return Detection(lab, o, multi)


class DpsReceiver:
    """Differential-phase-shift receiver: bit 0 on D0 (phase difference 0), bit 1 on D1.

    Weak light clicks with probability mu*eta per slot and is routed by the
    phase difference to the previous slot; bright light interferes
    classically and is scored by the detectors' energy comparators.
    """

    def __init__(self, detector: DetectorModel, flip_prob: float = 0.0):
        self.detectors = {0: detector, 1: detector}
        self.flip_prob = flip_prob

    @property
    def blinded(self) -> bool:
        return any(d.blinded for d in self.detectors.values())

    def receive(self, prev: OpticalPulse | None, cur: OpticalPulse | None, rng: np.random.Generator) -> int | None:
        cw = (cur.cw_power / 2) if cur is not None else 0.0
        for k, d in self.detectors.items():
            if d.mode == "geiger" and cw >= d.p_blind:
                self.detectors[k] = replace(d, mode="blinded")
        energy = {0: 0.0, 1: 0.0}
        signal_on = None
        if cur is not None and cur.is_bright:
            e_cur = cur.energy
            e_prev = prev.energy if prev is not None and prev.is_bright else 0.0
            cos_d = math.cos(cur.phase - prev.phase) if e_prev > 0 else 0.0
            cross = 2.0 * math.sqrt(e_prev * e_cur) * cos_d
            energy[0] = 0.25 * (e_prev + e_cur + cross)
            energy[1] = 0.25 * (e_prev + e_cur - cross)
        elif cur is not None and cur.mu > 0:
            d0 = self.detectors[0]
            if not d0.blinded and rng.random() < min(1.0, cur.mu * d0.eta):
                if prev is None or prev.phase is None:
                    signal_on = int(rng.integers(2))
                else:
                    signal_on = 0 if math.cos(cur.phase - prev.phase) > 0 else 1
        clicks = []
        for k, d in self.detectors.items():
            if k == signal_on:
                clicks.append(k)
                continue
            if d.mode == "geiger" and energy[k] == 0 and d.dark_prob == 0:
                continue
            c, self.detectors[k] = detect(d, Incident(0, energy[k], cw), rng)
            if c:
                clicks.append(k)
        if not clicks:
            return None
        bit = clicks[int(rng.integers(len(clicks)))] if len(clicks) > 1 else clicks[0]
        if self.flip_prob and rng.random() < self.flip_prob:
            bit ^= 1
        return bit
