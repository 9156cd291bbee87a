"""Quantum digital signatures.

ISS: Alice sends identical BB84 sequences (weak coherent, decoy-modulated)
to Bob and Charlie, who pick a basis with a beam splitter.  Alice later
announces, per detected slot, the true state plus a nonorthogonal partner;
a receiver whose outcome is orthogonal to one of them knows the other.

DSS: Bob and Charlie each run a DPS key-generating protocol with Alice,
swap a secret random half of their keys, and check Alice's signature
against what they hold.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import build
from ..constants import photon_energy
from ..attacks import (
    ForwardIfConfident, SourceModel, blind_control, choose_basis, intercept_resend,
    matched_click_probability,
)
from ..config import ScenarioConfig
from ..devices import DpsReceiver
from ..errors import ConfigurationError, ProtocolAbort, ProtocolViolation
from ..harness import ClassicalChannel, ProtocolTranscript, broadcast, derive_stream, make_party, transmit
from ..metrics import Outcome
from ..photonics import DECOY_CLASSES, DetectorModel, OpticalPulse
from .common import BASES, SYMBOLS, Bb84Symbol, other_basis, succession_sigma, symbol_from_outcome


@dataclass(frozen=True)
class DecoyScheme:
    mu_signal: float = 0.5
    mu_decoy: float = 0.1
    p_signal: float = 0.7
    p_decoy: float = 0.2
    p_vacuum: float = 0.1

    def __post_init__(self):
        if not self.mu_signal > self.mu_decoy >= 0:
            raise ConfigurationError("need mu_signal > mu_decoy >= 0", "source.mu_decoy")
        if abs(self.p_signal + self.p_decoy + self.p_vacuum - 1) > 1e-9:
            raise ConfigurationError("class probabilities must sum to 1", "source.p_signal")

    def draw(self, rng: np.random.Generator) -> str:
        u = rng.random()
        if u < self.p_signal:
            return "signal"
        return "decoy" if u < self.p_signal + self.p_decoy else "vacuum"

    def mu(self, cls: str) -> float:
        return {"signal": self.mu_signal, "decoy": self.mu_decoy, "vacuum": 0.0}[cls]


@dataclass(frozen=True)
class Verification:
    accept: bool
    mismatches: int
    compared: int
    reason: str = ""

    @property
    def mismatch_rate(self) -> float:
        return self.mismatches / self.compared if self.compared else 1.0


def _thresholds(k: int, n: int, k_sigma: float) -> float:
    return k / n + k_sigma * succession_sigma(k, n) if n else 0.0


# --- identical-state sharing -----------------------------------------------

def iss_announce(true: Bb84Symbol, rng: np.random.Generator) -> tuple[Bb84Symbol, Bb84Symbol]:
    """The true state and a uniformly chosen partner from the other basis, Z-basis member first."""
    partner = Bb84Symbol(int(rng.integers(2)), other_basis(true.basis))
    return (true, partner) if true.basis == "Z" else (partner, true)


def iss_sift(measured: Bb84Symbol, announced: tuple[Bb84Symbol, Bb84Symbol]) -> Bb84Symbol | None:
    a, b = announced
    if a.basis == b.basis:
        raise ProtocolViolation("announced states must come from different bases")
    if measured.orthogonal_to(a):
        return b
    if measured.orthogonal_to(b):
        return a
    return None


def iss_verify(m: int, claimed: dict[int, Bb84Symbol], local: dict[int, dict[int, Bb84Symbol]],
               threshold: float) -> Verification:
    """Accept iff the mismatch rate of ``claimed`` against the local string for ``m`` is below ``threshold``."""
    own = local.get(m)
    if own is None:
        return Verification(False, 0, 0, f"no key material for message {m}")
    slots = [s for s in own if s in claimed]
    if not slots:
        return Verification(False, 0, 0, "no overlapping slots")
    bad = sum(claimed[s] != own[s] for s in slots)
    return Verification(bad / len(slots) < threshold, bad, len(slots))


def iss_distribute(n: int, decoy: DecoyScheme, source: SourceModel, rng: np.random.Generator):
    """Alice's side of the quantum stage: (symbols, decoy classes, pulses), one pulse per round.

    Both receivers get a copy of the same pulse.
    """
    syms, classes, pulses = [], [], []
    for _ in range(n):
        sym = SYMBOLS[int(rng.integers(4))]
        cls = decoy.draw(rng)
        t, w = source.emit(sym.index, rng)
        syms.append(sym)
        classes.append(cls)
        pulses.append(OpticalPulse(mu=decoy.mu(cls), wavelength=w, emit_time=t, encoding=sym.state,
                                   decoy_class=cls, source_id=sym.index))
    return syms, classes, pulses


def source_model(cfg: ScenarioConfig) -> SourceModel:
    s = cfg.source
    return SourceModel(tuple(s.laser_time_offsets_ps), tuple(s.laser_spectral_offsets_nm),
                       s.time_jitter_ps, s.spectral_jitter_nm)


def _default_wavelength_map(cfg: ScenarioConfig) -> dict[str, float]:
    table = sorted(cfg.detector.bs_table)
    hi_t = max(table, key=lambda p: p[1])[0]
    lo_t = min(table, key=lambda p: p[1])[0]
    return {"Z": hi_t, "X": lo_t}


def _eve_guess(copies: list[tuple[str, int]], announced, rng) -> Bb84Symbol:
    for basis, outcome in copies:
        c = iss_sift(symbol_from_outcome(basis, outcome), announced)
        if c is not None:
            return c
    if copies:
        basis, outcome = copies[0]
        return symbol_from_outcome(basis, outcome)
    return announced[int(rng.integers(2))]


def run_iss(cfg: ScenarioConfig, seed: int, tr: ProtocolTranscript) -> Outcome:
    alice = make_party(seed, "alice", "signer")
    receivers = ("bob", "charlie")
    rparty = {r: make_party(seed, r, "recipient") for r in receivers}
    eve_rng = derive_stream(seed, "eve")
    chans = {r: build.channel(cfg, f"alice-{r}") for r in receivers}
    ch_rng = {r: derive_stream(seed, f"channel:{r}") for r in receivers}
    recv = {r: build.polarization_receiver(cfg, BASES) for r in receivers}
    monitors = {r: build.calibration(cfg, derive_stream(seed, f"calibration:{r}")) for r in receivers}
    survival = chans["bob"].survival
    s = cfg.source
    decoy = DecoyScheme(s.mu_signal, s.mu_decoy, s.p_signal, s.p_decoy, s.p_vacuum)
    model = source_model(cfg)
    attack = cfg.attack
    kind = attack.kind if attack else None
    if kind not in (None, "intercept_resend", "blind_control", "wavelength", "source_distinguish"):
        raise ConfigurationError(f"no attack model for {kind} on iss_qds", "attack.kind")
    wl_map = None
    if kind == "wavelength":
        wl_map = attack.wavelength_map_nm or _default_wavelength_map(cfg)
        if set(wl_map) != {"Z", "X"}:
            raise ConfigurationError("wavelength map needs entries for Z and X", "attack.wavelength_map_nm")
    classifier = ForwardIfConfident(model, attack.confidence_threshold) if kind == "source_distinguish" else None
    pub = ClassicalChannel(tr)
    out = Outcome()

    syms, classes, pulses = iss_distribute(cfg.rounds, decoy, model, alice.rng)
    dets = {r: {} for r in receivers}
    eve_copies: list[list[tuple[str, int]]] = [[] for _ in range(cfg.rounds)]
    eve_state: dict[int, Bb84Symbol] = {}
    agree = [0, 0]
    for j, pulse in enumerate(pulses):
        sent = {r: pulse for r in receivers}
        eve_basis = {}
        if kind == "source_distinguish":
            guess, _, ok = classifier.decide(pulse.emit_time, pulse.wavelength)
            if ok:
                eve_state[j] = SYMBOLS[guess]
                fwd = replace(pulse, encoding=SYMBOLS[guess].state)
                sent = {r: fwd for r in receivers}
            else:
                sent = {r: None for r in receivers}
        elif kind is not None:
            for r in receivers:
                label = "ZX"[int(eve_rng.integers(2))] if attack.strategy == "random" else syms[j].basis
                b = BASES[label]
                if kind == "blind_control":
                    resent, o, n = intercept_resend(pulse, b, eve_rng, resend_photons=None)
                    cw_only = OpticalPulse(mu=0.0, cw_power=attack.cw_power_w / survival)
                    if o is None or eve_rng.random() >= matched_click_probability(n, cfg.detector.eta, survival):
                        sent[r] = cw_only
                    else:
                        arm = 1.0 if recv[r].active else (
                            recv[r].bs.ratio(pulse.wavelength) if label == recv[r].labels[0]
                            else 1.0 - recv[r].bs.ratio(pulse.wavelength))
                        sent[r] = blind_control(resent.encoding, attack.faked_energy_j, arm, attack.cw_power_w,
                                                wavelength=pulse.wavelength, survival=survival)
                else:
                    resent, o, n = intercept_resend(pulse, b, eve_rng, resend_photons=attack.resend_photons)
                    if resent is not None and kind == "wavelength":
                        resent = replace(resent, wavelength=wl_map[label])
                    sent[r] = resent
                if o is not None:
                    eve_copies[j].append((label, o))
                    eve_basis[r] = label
        for r in receivers:
            mon = monitors[r]
            if mon is not None and mon.take_slot():
                keys = list(recv[r].detectors)
                mon.run_test(recv[r].detectors, keys[int(mon.rng.integers(len(keys)))])
                continue
            if sent[r] is None:
                continue
            d = recv[r].receive(transmit(chans[r], sent[r], ch_rng[r]), rparty[r].rng)
            if d is not None:
                dets[r][j] = d
                if r in eve_basis:
                    agree[0] += d.basis == eve_basis[r]
                    agree[1] += 1

    for r in receivers:
        broadcast(pub, r, ("detections", sorted(dets[r])))
    slots = sorted(set(dets["bob"]) | set(dets["charlie"]))
    announced = {j: iss_announce(syms[j], alice.rng) for j in slots}
    broadcast(pub, "alice", ("announce", [(j, str(a), str(b)) for j, (a, b) in announced.items()]))

    conclusive = {r: {} for r in receivers}
    for r in receivers:
        for j, d in dets[r].items():
            c = iss_sift(symbol_from_outcome(d.basis, d.outcome), announced[j])
            if c is not None:
                conclusive[r][j] = c

    # Signing stage: each receiver discloses a random sample of its conclusive slots.
    strings: dict[str, dict[int, Bb84Symbol]] = {}
    thresholds = {}
    for r, k_sigma in (("bob", 3.0), ("charlie", 6.0)):
        cs = sorted(conclusive[r])
        pick = rparty[r].rng.random(len(cs)) < cfg.params.sample_fraction
        sample = [j for j, p in zip(cs, pick) if p]
        broadcast(pub, r, ("sample", sample))
        k = sum(conclusive[r][j] != syms[j] for j in sample)
        thresholds[r] = _thresholds(k, len(sample), k_sigma)
        out.rate(f"sample_error.{r}", k, len(sample))
        if not sample:
            out.abort(f"{r} has no conclusive slots to estimate errors")
        elif k / len(sample) > cfg.params.max_error:
            out.abort(f"{r}'s error estimate {k / len(sample):.4f} above {cfg.params.max_error}")
        strings[r] = {j: conclusive[r][j] for j, p in zip(cs, pick) if not p}
        out.values[f"threshold.{r}"] = thresholds[r]
    for r in receivers:
        if monitors[r] is not None and monitors[r].detected:
            out.abort(f"calibration flagged {r}'s detectors")

    m = 0
    s_alice = {j: syms[j] for j in slots}
    v_bob = iss_verify(m, s_alice, {m: strings["bob"]}, thresholds["bob"])
    v_charlie = iss_verify(m, s_alice, {m: strings["charlie"]}, thresholds["charlie"])
    legit = v_bob.accept and v_charlie.accept and not out.aborted
    out.rate("error", sum(conclusive[r][j] != syms[j] for r in receivers for j in conclusive[r]),
             sum(len(conclusive[r]) for r in receivers))
    out.rate("mismatch.alice_bob", v_bob.mismatches, v_bob.compared)
    out.rate("mismatch.alice_charlie", v_charlie.mismatches, v_charlie.compared)
    out.rate("legit_accept", int(legit), 1)
    if v_bob.accept:
        out.rate("transfer", int(v_charlie.accept), 1)

    if kind is None:
        forged = {j: announced[j][int(eve_rng.integers(2))] for j in slots}
    elif kind == "source_distinguish":
        forged = {j: eve_state.get(j, announced[j][int(eve_rng.integers(2))]) for j in slots}
    else:
        forged = {j: _eve_guess(eve_copies[j], announced[j], eve_rng) for j in slots}
    f_bob = iss_verify(m, forged, {m: strings["bob"]}, thresholds["bob"])
    f_charlie = iss_verify(m, forged, {m: strings["charlie"]}, thresholds["charlie"])
    known = sum(forged[j] == strings[r][j] for r in receivers for j in strings[r])
    out.rate("eve_knowledge", known, sum(len(strings[r]) for r in receivers))
    out.rate("eve_success", int(f_bob.accept and not out.aborted), 1)
    out.rate("forgery_accept.charlie", int(f_charlie.accept and not out.aborted), 1)
    out.rate("mismatch.eve_bob", f_bob.mismatches, f_bob.compared)
    if agree[1]:
        out.rate("basis_agreement", agree[0], agree[1])
    if classifier is not None:
        out.rate("discarded", classifier.discarded, classifier.discarded + classifier.forwarded)
        out.rate("classifier_accuracy", sum(eve_state[j] == syms[j] for j in eve_state), len(eve_state))
    out.counts.update({f"class.{c}": classes.count(c) for c in DECOY_CLASSES})
    out.counts.update({f"detections.{r}": len(dets[r]) for r in receivers})
    out.counts.update({f"conclusive.{r}": len(conclusive[r]) for r in receivers})
    tr.record("decision", "bob", accept=v_bob.accept, forged_accept=f_bob.accept)
    return out


# --- different-state sharing -----------------------------------------------

@dataclass
class KgpResult:
    positions: list[int]  # detection slot for each key bit
    alice: np.ndarray  # A_m
    sender: np.ndarray  # K_m
    sample_errors: int
    sample_size: int
    detections: int

    @property
    def qber(self) -> float:
        return self.sample_errors / self.sample_size if self.sample_size else 0.0


def dps_phases(bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Pulse phases whose neighbour differences are pi * bits (first pulse random in {0, pi})."""
    start = np.pi * rng.integers(2)
    return np.mod(start + np.pi * np.concatenate([[0], np.cumsum(bits)]), 2 * np.pi)


def dss_kgp(n: int, mu: float, channel, receiver: DpsReceiver, sender_rng, alice_rng, channel_rng, *,
            sample_fraction: float = 0.1, interposer=None, monitor=None) -> KgpResult:
    """DPS key-generating run: n pulses, bit j is the phase step between pulses j-1 and j.

    ``interposer(j, pulse)`` may replace pulse j (Eve).  No error correction
    or privacy amplification is applied.
    """
    if n < 2:
        raise ValueError("need at least two pulses")
    bits = sender_rng.integers(2, size=n - 1)
    phases = dps_phases(bits, sender_rng)
    prev = None
    det_slots, det_bits = [], []
    for j in range(n):
        p = OpticalPulse(mu=mu, phase=float(phases[j]))
        if interposer is not None:
            p = interposer(j, p)
        cur = transmit(channel, p, channel_rng) if p is not None else None
        if monitor is not None and monitor.take_slot():
            monitor.run_test(receiver.detectors, int(monitor.rng.integers(2)))
        elif j > 0:
            b = receiver.receive(prev, cur, alice_rng)
            if b is not None:
                det_slots.append(j)
                det_bits.append(b)
        prev = cur
    if not det_slots:
        raise ProtocolAbort("no detections in the key-generating protocol")
    det_slots = np.asarray(det_slots)
    a = np.asarray(det_bits, dtype=np.int8)
    k = bits[det_slots - 1].astype(np.int8)
    sample = alice_rng.random(len(det_slots)) < sample_fraction
    errs = int((a[sample] != k[sample]).sum())
    keep = ~sample
    return KgpResult(det_slots[keep].tolist(), a[keep], k[keep], errs, int(sample.sum()), len(det_slots))


def dss_exchange_halves(kb: np.ndarray, kc: np.ndarray, rng_b: np.random.Generator, rng_c: np.random.Generator):
    """Bob and Charlie each forward a uniformly random half of their key to the other.

    Returns (S_B, S_C, masks); S_X maps ("B" | "C", index) to a bit and masks
    are the forwarded-position indicators of Bob and Charlie.
    """
    if len(kb) != len(kc):
        raise ValueError("keys must have equal length")
    L = len(kb)
    fwd_b = np.zeros(L, dtype=bool)
    fwd_b[rng_b.permutation(L)[: L // 2]] = True
    fwd_c = np.zeros(L, dtype=bool)
    fwd_c[rng_c.permutation(L)[: L // 2]] = True
    s_b = {("B", i): int(kb[i]) for i in np.flatnonzero(~fwd_b)}
    s_b.update({("C", i): int(kc[i]) for i in np.flatnonzero(fwd_c)})
    s_c = {("C", i): int(kc[i]) for i in np.flatnonzero(~fwd_c)}
    s_c.update({("B", i): int(kb[i]) for i in np.flatnonzero(fwd_b)})
    return s_b, s_c, {"bob": fwd_b, "charlie": fwd_c}


def dss_verify(m: int, sig: tuple[np.ndarray, np.ndarray], local: dict, threshold: float, L: int) -> Verification:
    ab, ac = sig
    if len(ab) != L or len(ac) != L:
        return Verification(False, 0, 0, f"signature halves have lengths {len(ab)}, {len(ac)}; expected {L}")
    if not local:
        return Verification(False, 0, 0, "no key material")
    bad = sum(int((ab if part == "B" else ac)[i]) != bit for (part, i), bit in local.items())
    return Verification(bad / len(local) < threshold, bad, len(local))


class _DpsEve:
    """Blinding interposer on one DPS link: measure the weak train, resend a bright one."""

    def __init__(self, cfg: ScenarioConfig, survival: float, rng):
        a = cfg.attack
        self.rng = rng
        self.survival = survival
        self.forward = cfg.detector.eta * survival
        self.recv = DpsReceiver(DetectorModel(eta=1.0, p_blind=float("inf")))
        self.energy = a.faked_energy_j / survival
        self.cw = a.cw_power_w / survival
        self.prev_weak = None
        self.phase = 0.0
        self.bits: dict[int, int] = {}

    def __call__(self, j: int, p: OpticalPulse) -> OpticalPulse:
        b = self.recv.receive(self.prev_weak, p, self.rng) if j > 0 else None
        self.prev_weak = p
        if b is not None and self.rng.random() < self.forward:
            self.bits[j] = b
            self.phase += np.pi * b
        else:
            self.phase += np.pi / 2
        return OpticalPulse(mu=self.energy / photon_energy(p.wavelength),
                            phase=float(self.phase % (2 * np.pi)), cw_power=self.cw)


class _DpsTrojan:
    def __init__(self, probe, rng):
        self.probe = probe
        self.rng = rng
        self.read: dict[int, float] = {}

    def __call__(self, j: int, p: OpticalPulse) -> OpticalPulse:
        r = self.probe.probe(p.phase, self.rng)
        if r is not None:
            self.read[j] = r
        return p

    def bit(self, j: int) -> int | None:
        if j in self.read and j - 1 in self.read:
            return int(round(((self.read[j] - self.read[j - 1]) % (2 * np.pi)) / np.pi)) % 2
        return None


def run_dss(cfg: ScenarioConfig, seed: int, tr: ProtocolTranscript) -> Outcome:
    alice = make_party(seed, "alice", "signer")
    senders = ("bob", "charlie")
    sp = {s: make_party(seed, s, "recipient") for s in senders}
    eve_rng = derive_stream(seed, "eve")
    attack = cfg.attack
    kind = attack.kind if attack else None
    if kind not in (None, "blind_control", "trojan"):
        raise ConfigurationError(f"no attack model for {kind} on dss_qds", "attack.kind")
    receiver = build.dps_receiver(cfg)  # Alice's station serves both links
    monitor = build.calibration(cfg, derive_stream(seed, "calibration:alice"))
    pub = ClassicalChannel(tr)
    out = Outcome()

    kgp: dict[str, KgpResult] = {}
    eves = {}
    for s in senders:
        ch = build.channel(cfg, f"{s}-alice")
        if kind == "blind_control":
            eves[s] = _DpsEve(cfg, ch.survival, eve_rng)
        elif kind == "trojan":
            eves[s] = _DpsTrojan(build.trojan_probe(cfg), eve_rng)
        try:
            kgp[s] = dss_kgp(cfg.rounds, cfg.source.dps_mu, ch, receiver, sp[s].rng, alice.rng,
                             derive_stream(seed, f"channel:{s}"), sample_fraction=cfg.params.kgp_sample_fraction,
                             interposer=eves.get(s), monitor=monitor)
        except ProtocolAbort as e:
            out.abort(f"{s}: {e.reason}")
            out.rate("legit_accept", 0, 1)
            out.rate("eve_success", 0, 1)
            out.rate("error", 0, 0)
            return out
        broadcast(pub, "alice", ("detections", s, kgp[s].positions))
        out.rate(f"qber.{s}", kgp[s].sample_errors, kgp[s].sample_size)
        out.counts[f"detections.{s}"] = kgp[s].detections
    if monitor is not None and monitor.detected:
        out.abort("calibration flagged Alice's detectors")
    if kind == "trojan" and any(e.probe.alarms for e in eves.values()):
        out.abort("watchdog saw injected light")
    k_tot = sum(k.sample_errors for k in kgp.values())
    n_tot = sum(k.sample_size for k in kgp.values())
    out.rate("error", k_tot, n_tot)
    if n_tot and k_tot / n_tot > cfg.params.max_error:
        out.abort(f"QBER estimate {k_tot / n_tot:.4f} above {cfg.params.max_error}")
    s_a = _thresholds(k_tot, n_tot, 3.0)
    s_v = _thresholds(k_tot, n_tot, 6.0)
    out.values.update({"threshold.bob": s_a, "threshold.charlie": s_v})

    L = min(len(k.positions) for k in kgp.values())
    kb, kc = kgp["bob"].sender[:L], kgp["charlie"].sender[:L]
    sig = (kgp["bob"].alice[:L], kgp["charlie"].alice[:L])
    s_b, s_c, masks = dss_exchange_halves(kb, kc, sp["bob"].rng, sp["charlie"].rng)
    v_bob = dss_verify(0, sig, s_b, s_a, L)
    v_charlie = dss_verify(0, sig, s_c, s_v, L)
    legit = v_bob.accept and v_charlie.accept and not out.aborted
    out.rate("legit_accept", int(legit), 1)
    out.rate("mismatch.alice_bob", v_bob.mismatches, v_bob.compared)
    out.rate("mismatch.alice_charlie", v_charlie.mismatches, v_charlie.compared)

    guess = []
    for s in senders:
        g = eve_rng.integers(2, size=L).astype(np.int8)
        if s in eves:
            for i, j in enumerate(kgp[s].positions[:L]):
                b = eves[s].bits.get(j) if kind == "blind_control" else eves[s].bit(j)
                if b is not None:
                    g[i] = b
        guess.append(g)
    f_bob = dss_verify(0, tuple(guess), s_b, s_a, L)
    known = int((guess[0] == kb).sum() + (guess[1] == kc).sum())
    out.rate("eve_knowledge", known, 2 * L)
    out.rate("eve_success", int(f_bob.accept and not out.aborted), 1)
    out.rate("mismatch.eve_bob", f_bob.mismatches, f_bob.compared)
    if kind == "trojan":
        probes = sum(e.probe.probes for e in eves.values())
        out.rate("trojan_read", sum(len(e.read) for e in eves.values()), probes)
        out.values["trojan_mean_reflected_photons"] = eves["bob"].probe.n_bar
    out.counts.update(key_length=L, forwarded_bob=int(masks["bob"].sum()))
    tr.record("decision", "bob", accept=v_bob.accept, forged_accept=f_bob.accept)
    return out
