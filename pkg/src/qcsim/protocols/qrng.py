"""Source-independent QRNG with a passive 2:98 basis split.

Slots: 1 = |+>, 2 = |->, 3 = |H> (bit 0), 4 = |V> (bit 1).  The X arm
monitors the untrusted source (slot-2 fraction is the phase error e_bx),
the Z arm produces raw bits, and Toeplitz hashing compresses them to the
min-entropy estimate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .. import build
from ..config import ScenarioConfig
from ..constants import NOMINAL_WAVELENGTH_NM, photon_energy
from ..countermeasures import FilterSpec
from ..errors import ConfigurationError, ProtocolAbort
from ..harness import ProtocolTranscript, derive_stream, make_party
from ..metrics import Outcome
from ..photonics import BsModel, DetectorModel, OpticalPulse, photon_count
from .common import succession_sigma

_S = 2 ** -0.5
# Slot projectors as rows: <+|, <-|, <H|, <V|.
_PROJ = np.array([[_S, _S], [_S, -_S], [1, 0], [0, 1]], dtype=complex)
PLUS_AMPS = np.array([_S, _S], dtype=complex)


def h2(p: float) -> float:
    if p <= 0:
        return 0.0
    if p >= 0.5:
        return 1.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


@dataclass
class QrngStation:
    bs: BsModel  # transmission = X-arm fraction
    detector: DetectorModel
    filt: FilterSpec | None = None
    flip_prob: float = 0.0

    def _arm_weights(self, amps: np.ndarray, wavelength: np.ndarray) -> np.ndarray:
        """(n, 4) share of light reaching each slot, before detection efficiency."""
        amps = np.atleast_2d(amps)
        p = np.abs(amps @ _PROJ.T.conj()) ** 2  # p(+), p(-), p(H), p(V)
        if self.flip_prob:
            f = self.flip_prob
            p = (1 - f) * p + f * p[:, [1, 0, 3, 2]]
        uniq, inv = np.unique(wavelength, return_inverse=True)
        tx = np.array([self.bs.ratio(float(w)) for w in uniq])[inv]
        w = p * np.stack([tx, tx, 1 - tx, 1 - tx], axis=1)
        if self.filt is not None:
            lo, hi = self.filt.passband
            out = (wavelength < lo) | (wavelength > hi)
            w[out] *= 10.0 ** (-self.filt.stopband_extinction_db / 10.0)
        return w

    def sample(self, photons: np.ndarray, amps: np.ndarray, wavelength: np.ndarray, rng: np.random.Generator,
               energy: np.ndarray | None = None, blinded: np.ndarray | None = None):
        """Vectorized rounds; returns (slot per round, 0 for none; multi-click flags).

        ``photons`` are incident photon numbers, ``energy`` optional bright
        pulse energies (J), ``blinded`` marks rounds where the detectors sit
        in linear mode.
        """
        n = len(photons)
        wavelength = np.broadcast_to(np.asarray(wavelength, dtype=float), (n,))
        amps = np.broadcast_to(amps, (n, 2))
        w = self._arm_weights(amps, wavelength)
        eta = self.detector.eta
        pv = np.concatenate([w * eta, 1 - (w * eta).sum(axis=1, keepdims=True)], axis=1)
        pv[:, 4] = np.clip(pv[:, 4], 0.0, 1.0)
        clicks = rng.multinomial(photons, pv)[:, :4] > 0
        if self.detector.dark_prob:
            clicks |= rng.random((n, 4)) < self.detector.dark_prob
        if energy is not None:
            e = w * np.asarray(energy, dtype=float)[:, None]
            bl = np.zeros(n, dtype=bool) if blinded is None else np.asarray(blinded)
            lin = e >= self.detector.e_click
            clicks[bl] = lin[bl]
            # Bright light on detectors still in Geiger mode clicks with near certainty.
            n_e = e[~bl] / photon_energy(NOMINAL_WAVELENGTH_NM)
            clicks[~bl] |= rng.random(n_e.shape) >= (1 - eta) ** n_e
        elif blinded is not None:
            clicks[np.asarray(blinded)] = False
        any_click = clicks.any(axis=1)
        slot = np.where(any_click, clicks.argmax(axis=1) + 1, 0)  # earliest slot wins
        return slot, clicks.sum(axis=1) > 1


def qrng_round(pulse: OpticalPulse, station: QrngStation, rng: np.random.Generator) -> int | None:
    """Slot of one round, or None without a click."""
    amps = pulse.encoding.amplitudes if pulse.encoding is not None else PLUS_AMPS
    if len(amps) != 2:
        raise ValueError("QRNG rounds take single-qubit states")
    blinded = pulse.cw_power / 4 >= station.detector.p_blind
    if pulse.is_bright:
        slot, _ = station.sample(np.zeros(1, dtype=int), amps[None], [pulse.wavelength], rng,
                                 energy=np.array([pulse.energy]), blinded=np.array([blinded]))
    else:
        k = photon_count(pulse, rng)
        slot, _ = station.sample(np.array([k]), amps[None], [pulse.wavelength], rng, blinded=np.array([blinded]))
    return int(slot[0]) or None


@dataclass
class QrngTally:
    slot_counts: dict[int, int]
    multi: int = 0

    @classmethod
    def from_slots(cls, slots: np.ndarray, multi: np.ndarray | None = None) -> "QrngTally":
        counts = np.bincount(np.asarray(slots, dtype=int), minlength=5)
        return cls({s: int(counts[s]) for s in (1, 2, 3, 4)}, int(multi.sum()) if multi is not None else 0)

    @property
    def n_x(self) -> int:
        return self.slot_counts[1] + self.slot_counts[2]

    @property
    def n_z(self) -> int:
        return self.slot_counts[3] + self.slot_counts[4]

    @property
    def n(self) -> int:
        return self.n_x + self.n_z

    @property
    def e_bx(self) -> float:
        return self.slot_counts[2] / self.n_x if self.n_x else 0.0


@dataclass
class QrngOutput:
    raw_bits: np.ndarray
    min_entropy: float
    extracted: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))


def toeplitz_extract(bits: np.ndarray, out_len: int, seed_bits: np.ndarray) -> np.ndarray:
    """out_len bits of T @ bits mod 2, T the Toeplitz matrix filled from seed_bits."""
    n = len(bits)
    if out_len <= 0:
        return np.zeros(0, dtype=np.uint8)
    if len(seed_bits) < n + out_len - 1:
        raise ValueError("seed too short for the Toeplitz matrix")
    # T[i, j] = seed[n - 1 + i - j]
    t = toeplitz(seed_bits[n - 1:n - 1 + out_len], seed_bits[n - 1::-1][:n])
    return (t.astype(np.int64) @ bits.astype(np.int64) % 2).astype(np.uint8)


def qrng_finalize(tally: QrngTally, raw_bits: np.ndarray, rng: np.random.Generator, *,
                  eps_stat: float | None = None, eps_sigmas: float = 3.0, block_bits: int = 1024) -> QrngOutput:
    """Min-entropy estimate n_z * (1 - h2(e_bx + eps)) and blockwise Toeplitz extraction."""
    if tally.n_x == 0:
        raise ValueError("no X-basis detections to estimate e_bx")
    e = tally.e_bx
    if e >= 0.5:
        raise ProtocolAbort(f"e_bx = {e:.4f}: no extractable randomness")
    if eps_stat is None:
        eps_stat = eps_sigmas * succession_sigma(tally.slot_counts[2], tally.n_x)
    rate = 1.0 - h2(e + eps_stat)
    h_min = len(raw_bits) * rate
    per_block = int(np.floor(block_bits * rate))
    seed = rng.integers(2, size=block_bits + max(per_block, 1) - 1)
    out = [toeplitz_extract(raw_bits[i:i + block_bits], per_block, seed)
           for i in range(0, len(raw_bits) - block_bits + 1, block_bits)]
    ext = np.concatenate(out) if out else np.zeros(0, dtype=np.uint8)
    return QrngOutput(np.asarray(raw_bits, dtype=np.uint8), h_min, ext[: int(h_min)])


def station_from(cfg: ScenarioConfig) -> QrngStation:
    return QrngStation(build.bs_model(cfg, cfg.detector.qrng_bs_table), build.detector(cfg),
                       build.filter_spec(cfg), cfg.channel.flip_prob)


def _amps(labels: np.ndarray) -> np.ndarray:
    """Amplitudes for slot labels 1..4."""
    return _PROJ[labels - 1].conj()


def run_qrng(cfg: ScenarioConfig, seed: int, tr: ProtocolTranscript) -> Outcome:
    n = cfg.rounds
    source = derive_stream(seed, "source")
    station_rng = make_party(seed, "station", "receiver").rng
    eve_rng = derive_stream(seed, "eve")
    station = station_from(cfg)
    survival = build.channel(cfg, "source-station").survival
    attack = cfg.attack
    kind = attack.kind if attack else None
    out = Outcome()
    t_nominal = station.bs.ratio(NOMINAL_WAVELENGTH_NM)
    eta = station.detector.eta
    honest_rate = 1.0 - np.exp(-cfg.params.qrng_mu * eta * survival)
    dictated = np.full(n, -1)  # Eve's chosen slot (3 or 4), -1 elsewhere
    energy = blinded = None
    wavelength = np.full(n, NOMINAL_WAVELENGTH_NM)

    if kind is None:
        photons = source.poisson(cfg.params.qrng_mu * survival, n)
        amps = np.broadcast_to(PLUS_AMPS, (n, 2))
    elif kind == "blind_control":
        # Eve replaces the source: bright |+> on a t_X share of fired rounds, bright H/V elsewhere.
        fire = eve_rng.random(n) < honest_rate
        plus = eve_rng.random(n) < t_nominal
        bits = eve_rng.integers(2, size=n)
        labels = np.where(plus, 1, 3 + bits)
        amps = _amps(labels)
        arm = np.where(plus, t_nominal, 1 - t_nominal)
        energy = np.where(fire, attack.faked_energy_j / arm, 0.0)  # delivered; loss pre-compensated
        blinded = np.full(n, attack.cw_power_w / 4 >= station.detector.p_blind)
        photons = np.zeros(n, dtype=int)
        dictated = np.where(fire & ~plus, labels, -1)
    elif kind == "wavelength":
        table = cfg.detector.qrng_bs_table
        wl_map = attack.wavelength_map_nm or {"X": max(table, key=lambda p: p[1])[0],
                                               "Z": min(table, key=lambda p: p[1])[0]}
        if set(wl_map) != {"X", "Z"}:
            raise ConfigurationError("wavelength map needs entries for X and Z", "attack.wavelength_map_nm")
        tx, tz = station.bs.ratio(wl_map["X"]), station.bs.ratio(wl_map["Z"])
        q_plus = float(np.clip((t_nominal - tz) / (tx - tz), 0.0, 1.0)) if tx != tz else t_nominal
        send = eve_rng.random(n) < min(1.0, honest_rate / (eta * survival))
        plus = eve_rng.random(n) < q_plus
        bits = eve_rng.integers(2, size=n)
        labels = np.where(plus, 1, 3 + bits)
        amps = _amps(labels)
        wavelength = np.where(plus, wl_map["X"], wl_map["Z"])
        photons = (send & (eve_rng.random(n) < survival)).astype(int)
        dictated = np.where(send & ~plus, labels, -1)
    else:
        raise ConfigurationError(f"no attack model for {kind} on si_qrng", "attack.kind")

    monitor = build.calibration(cfg, derive_stream(seed, "calibration:station"))
    active = np.ones(n, dtype=bool)
    if monitor is not None:
        tests = monitor.rng.random(n) < monitor.cfg.test_rate
        active &= ~tests
        det = build.detector(cfg)
        if blinded is not None and blinded.any() and det.p_blind != np.inf:
            det = DetectorModel(eta=det.eta, dark_prob=det.dark_prob, mode="blinded", p_blind=det.p_blind,
                                e_click=det.e_click)
        detectors = {s: det for s in (1, 2, 3, 4)}
        for _ in range(int(tests.sum())):
            monitor.run_test(detectors, int(monitor.rng.integers(1, 5)))
        photons = np.where(active, photons, 0)
        if energy is not None:
            energy = np.where(active, energy, 0.0)

    slot, multi = station.sample(photons, amps, wavelength, station_rng, energy=energy, blinded=blinded)
    tally = QrngTally.from_slots(slot, multi)
    z = (slot == 3) | (slot == 4)
    raw = (slot[z] == 4).astype(np.uint8)
    out.counts.update({f"slot.{s}": c for s, c in tally.slot_counts.items()})
    out.counts.update(squashed=tally.n, multi_click=tally.multi, raw_bits=len(raw), rounds=n)
    out.rate("error", tally.slot_counts[2], tally.n_x)
    out.rate("x_fraction", tally.n_x, tally.n)
    known = int((dictated[z] == slot[z]).sum())
    out.rate("eve_knowledge", known, len(raw))

    if monitor is not None and monitor.detected:
        out.abort("calibration flagged the station's detectors")
    try:
        if tally.n_x == 0:
            raise ProtocolAbort("no X-basis detections to estimate e_bx")
        res = qrng_finalize(tally, raw, derive_stream(seed, "extractor"), eps_sigmas=cfg.params.qrng_eps_sigmas,
                            block_bits=cfg.params.qrng_block_bits)
    except ProtocolAbort as e:
        out.abort(e.reason)
        res = QrngOutput(raw, 0.0)
    out.values.update(min_entropy=res.min_entropy, e_bx=tally.e_bx,
                      bias=float(abs(res.extracted.mean() - 0.5)) if len(res.extracted) else 0.5)
    out.counts["extracted_bits"] = len(res.extracted)
    out.rate("eve_success", 0 if out.aborted else known, len(raw))
    out.rate("legit_accept", int(not out.aborted and len(res.extracted) > 0), 1)
    tr.record("decision", "station", e_bx=tally.e_bx, extracted=len(res.extracted))
    return out
