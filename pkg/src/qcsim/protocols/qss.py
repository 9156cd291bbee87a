"""Quantum secret sharing.

GHZ variant: three parties measure their photon of (|HHH> + |VVV>)/sqrt(2)
in X or Y; on the four basis triples with a fixed outcome product, Alice and
Bob together can predict Charlie's outcome, which is Charlie's key bit.

Single-qubit variant: one qubit passes R_1 .. R_N; each of R_1 .. R_{N-1}
adds a phase from {0, pi/2, pi, 3pi/2}, R_N adds 0 or pi/2 and measures in
X.  D1 fires with probability (1 + cos(sum of phases)) / 2.  R_1 is the
dealer; the other N-1 parties jointly recover R_1's bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import build
from ..attacks import blind_control, choose_basis, matched_click_probability
from ..config import ScenarioConfig
from ..errors import ConfigurationError
from ..harness import ClassicalChannel, ProtocolTranscript, broadcast, derive_stream, make_party, transmit
from ..metrics import Outcome
from ..photonics import (
    PLUS, Incident, OpticalPulse, PureState, X, Y, _basis_arrays, apply_phase, detect, eigenstate,
    ghz_state, measure,
)

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
}
GHZ_BASES = {"X": X, "Y": Y}
TRIPLES = tuple("".join(t) for t in itertools.product("XY", repeat=3))


@dataclass(frozen=True)
class CorrelationTable:
    """Outcome-product sign for each correlated basis triple (label order A, B, C)."""

    signs: tuple[tuple[str, int], ...]

    @classmethod
    def from_state(cls, s: PureState) -> "CorrelationTable":
        signs = []
        for t in TRIPLES:
            op = np.kron(np.kron(_PAULI[t[0]], _PAULI[t[1]]), _PAULI[t[2]])
            e = float(np.vdot(s.amplitudes, op @ s.amplitudes).real)
            if abs(abs(e) - 1.0) < 1e-9:
                signs.append((t, 1 if e > 0 else -1))
        return cls(tuple(signs))

    def is_correlated(self, triple: str) -> bool:
        return any(t == triple for t, _ in self.signs)

    def sign(self, triple: str) -> int:
        for t, s in self.signs:
            if t == triple:
                return s
        raise ValueError(f"basis triple {triple} is uncorrelated")


GHZ_CORRELATIONS = CorrelationTable.from_state(ghz_state())


@dataclass(frozen=True)
class GhzRound:
    bases: str
    outcomes: tuple[int, int, int]


def ghz_round(rng: np.random.Generator) -> GhzRound:
    s = ghz_state()
    bases = "".join("XY"[int(b)] for b in rng.integers(2, size=3))
    outs = []
    for i, b in enumerate(bases):
        o, s = measure(s, i, GHZ_BASES[b], rng)
        outs.append(o)
    return GhzRound(bases, tuple(outs))


@lru_cache(maxsize=1)
def _ghz_joint_table() -> np.ndarray:
    """P(outcome pattern | basis triple), rows in TRIPLES order, columns (+,+,+) .. (-,-,-)."""
    amps = ghz_state().amplitudes
    table = np.zeros((8, 8))
    for i, t in enumerate(TRIPLES):
        vecs = [_basis_arrays(b, 0.0) for b in t]
        for j, pattern in enumerate(itertools.product((0, 1), repeat=3)):
            v = np.kron(np.kron(vecs[0][pattern[0]], vecs[1][pattern[1]]), vecs[2][pattern[2]])
            table[i, j] = abs(np.vdot(v, amps)) ** 2
    return table


def ghz_sample(n: int, rng: np.random.Generator, flip_prob: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch of honest rounds: (triple indices into TRIPLES, outcomes of shape (n, 3))."""
    table = _ghz_joint_table()
    cdf = np.cumsum(table, axis=1)
    tri = rng.integers(8, size=n)
    u = rng.random(n)
    col = np.minimum((u[:, None] >= cdf[tri]).sum(axis=1), 7)
    bits = (col[:, None] >> np.array([2, 1, 0])) & 1
    outs = 1 - 2 * bits
    if flip_prob:
        outs = np.where(rng.random((n, 3)) < flip_prob, -outs, outs)
    return tri, outs


def ghz_sift(rounds):
    """Keep rounds whose basis triple has a fixed outcome product."""
    return [r for r in rounds if GHZ_CORRELATIONS.is_correlated(r.bases)]


def ghz_reconstruct(a: int, b: int, triple: str) -> int:
    if not GHZ_CORRELATIONS.is_correlated(triple):
        raise ValueError(f"basis triple {triple} is uncorrelated; Charlie's outcome is not predictable")
    return GHZ_CORRELATIONS.sign(triple) * a * b


def _arm_fraction(rec, label: str, wavelength: float) -> float:
    if rec.active:
        return 1.0
    t = rec.bs.ratio(wavelength)
    return t if label == rec.labels[0] else 1.0 - t


def run_ghz(cfg: ScenarioConfig, seed: int, tr: ProtocolTranscript) -> Outcome:
    names = ("alice", "bob", "charlie")
    parties = {p: make_party(seed, p, r) for p, r in zip(names, ("reconstructor", "reconstructor", "dealer"))}
    eve_rng = derive_stream(seed, "eve")
    chans = {p: build.channel(cfg, f"source-{p}") for p in names}
    ch_rng = {p: derive_stream(seed, f"channel:{p}") for p in names}
    recv = {p: build.polarization_receiver(cfg, GHZ_BASES) for p in names}
    monitors = {p: build.calibration(cfg, derive_stream(seed, f"calibration:{p}")) for p in names}
    survival = chans["alice"].survival
    eta = cfg.detector.eta
    attack = cfg.attack
    kind = attack.kind if attack else None
    targets = {"blind_control": ("alice", "bob"), "intercept_resend": ("alice",)}.get(kind, ())
    if kind is not None and not targets:
        raise ConfigurationError(f"no attack model for {kind} on ghz_qss", "attack.kind")
    pub = ClassicalChannel(tr)
    out = Outcome()

    dets: dict[str, list] = {p: [] for p in names}
    eve_view: list[dict] = []
    for _ in range(cfg.rounds):
        s = ghz_state()
        ev = {}
        for idx, p in enumerate(names):
            rec = recv[p]
            mon = monitors[p]
            if mon is not None and mon.take_slot():
                keys = list(rec.detectors)
                mon.run_test(rec.detectors, keys[int(mon.rng.integers(len(keys)))])
                dets[p].append(None)
                continue
            if p not in targets:
                d, s = rec.receive_entangled(s, idx, survival, parties[p].rng)
                dets[p].append(d)
                continue
            label = "XY"[int(eve_rng.integers(2))]
            o, s = measure(s, idx, GHZ_BASES[label], eve_rng)
            ev[p] = (label, o)
            st = eigenstate(GHZ_BASES[label], o)
            if kind == "blind_control":
                if eve_rng.random() < matched_click_probability(1, eta, survival):
                    pulse = blind_control(st, attack.faked_energy_j, _arm_fraction(rec, label, 1550.0),
                                          attack.cw_power_w, survival=survival)
                else:
                    pulse = OpticalPulse(mu=0.0, cw_power=attack.cw_power_w / survival)
            else:
                pulse = OpticalPulse(mu=1.0, encoding=st, photons=1)
            delivered = transmit(chans[p], pulse, ch_rng[p])
            dets[p].append(recv[p].receive(delivered, parties[p].rng))
        eve_view.append(ev)

    for p in names:
        broadcast(pub, p, ("bases", [(j, d.basis) for j, d in enumerate(dets[p]) if d is not None]))
    kept = []
    for j in range(cfg.rounds):
        da, db, dc = dets["alice"][j], dets["bob"][j], dets["charlie"][j]
        if da is None or db is None or dc is None:
            continue
        triple = da.basis + db.basis + dc.basis
        if GHZ_CORRELATIONS.is_correlated(triple):
            kept.append((j, triple, da.outcome, db.outcome, dc.outcome))
    alice_rng = parties["alice"].rng
    sample = alice_rng.random(len(kept)) < cfg.params.sample_fraction
    errors = [ghz_reconstruct(a, b, t) != c for _, t, a, b, c in kept]
    n_s = int(sample.sum())
    k_s = int(sum(e for e, m in zip(errors, sample) if m))
    broadcast(pub, "alice", ("sample", [kept[i][0] for i in np.flatnonzero(sample)]))
    out.rate("error", sum(errors), len(kept))
    out.rate("sample_error", k_s, n_s)
    if n_s == 0:
        out.abort("no sifted rounds to estimate the error rate")
    elif k_s / n_s > cfg.params.max_error:
        out.abort(f"error estimate {k_s / n_s:.4f} above {cfg.params.max_error}")
    for p in names:
        if monitors[p] is not None and monitors[p].detected:
            out.abort(f"calibration flagged {p}'s detectors")

    key = [kept[i] for i in np.flatnonzero(~sample)]
    known = 0
    for j, t, a, b, c in key:
        ev = eve_view[j]
        if "alice" in ev and "bob" in ev and ev["alice"][0] == t[0] and ev["bob"][0] == t[1]:
            guess = ghz_reconstruct(ev["alice"][1], ev["bob"][1], t)
        else:
            guess = 1 if eve_rng.random() < 0.5 else -1
        known += guess == c
    out.rate("eve_knowledge", known, len(key))
    out.rate("eve_success", 0 if out.aborted else known, len(key))
    out.rate("legit_accept", 0 if out.aborted else 1, 1)
    out.counts.update(kept=len(kept), key_bits=len(key),
                      **{f"detections.{p}": sum(d is not None for d in dets[p]) for p in names})
    tr.record("decision", "alice", aborted=out.aborted, key_bits=len(key))
    return out


# --- single-qubit N-party scheme -------------------------------------------

PHASES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)
LAST_PHASES = (0.0, math.pi / 2)
SET_A = "A"  # {0, pi}
SET_B = "B"  # {pi/2, 3pi/2}


def phase_index(phi: float) -> int:
    x = (phi % (2 * math.pi)) / (math.pi / 2)
    k = round(x)
    if abs(x - k) > 1e-9:
        raise ValueError(f"phase {phi} is not a multiple of pi/2")
    return k % 4


def phase_label(phi: float) -> str:
    return SET_A if phase_index(phi) % 2 == 0 else SET_B


def phase_bit(phi: float) -> int:
    """{0, pi/2} -> 0, {pi, 3pi/2} -> 1."""
    return 0 if phase_index(phi) < 2 else 1


def sq_click_probability(phases) -> float:
    p = 0.5 * (1.0 + math.cos(sum(phases)))
    if p < 1e-12:
        return 0.0
    if p > 1 - 1e-12:
        return 1.0
    return p


def sq_round(phases, rng: np.random.Generator) -> str:
    return "D1" if rng.random() < sq_click_probability(phases) else "D2"


def sq_sift(labels) -> bool:
    """Deterministic iff an even number of parties used the {pi/2, 3pi/2} set."""
    return sum(1 for lab in labels if lab == SET_B) % 2 == 0


def sq_reconstruct(known_phases, click: str, label: str) -> float:
    """The missing party's phase, from the others' phases and the click."""
    target = -sum(known_phases) + (0.0 if click == "D1" else math.pi)
    target %= 2 * math.pi
    k = phase_index(target)
    if phase_label(PHASES[k]) != label:
        raise ValueError("round is not deterministic under the announced labels")
    return PHASES[k]


def sq_coalition_guess(known: dict[int, float], labels: list[str], click: str | None,
                       target: int, rng: np.random.Generator) -> int:
    """Bayes guess of party ``target``'s bit from a coalition's knowledge.

    Enumerates every phase assignment to the parties outside the coalition
    that agrees with the public labels (and the click, if the coalition
    holds it).  Ties are broken at random.
    """
    n = len(labels)
    unknown = [i for i in range(n) if i not in known]
    options = []
    for i in unknown:
        if i == n - 1:
            options.append([LAST_PHASES[0] if labels[i] == SET_A else LAST_PHASES[1]])
        else:
            options.append([p for p in PHASES if phase_label(p) == labels[i]])
    tally = [0, 0]
    for combo in itertools.product(*options):
        phases = dict(known)
        phases.update(zip(unknown, combo))
        if click is not None:
            p1 = sq_click_probability([phases[i] for i in range(n)])
            if (click == "D1" and p1 == 0.0) or (click == "D2" and p1 == 1.0):
                continue
        tally[phase_bit(phases[target])] += 1
    if tally[0] == tally[1]:
        return int(rng.integers(2))
    return 0 if tally[0] > tally[1] else 1


def run_sq(cfg: ScenarioConfig, seed: int, tr: ProtocolTranscript) -> Outcome:
    n_par = cfg.params.n_parties
    names = [f"r{i + 1}" for i in range(n_par)]
    parties = {p: make_party(seed, p, "dealer" if i == 0 else "player") for i, p in enumerate(names)}
    eve_rng = derive_stream(seed, "eve")
    det_rng = derive_stream(seed, "channel:loop")
    survival = build.channel(cfg, "loop").survival
    det = build.detector(cfg)
    detectors = {"D1": det, "D2": det}
    attack = cfg.attack
    kind = attack.kind if attack else None
    if kind not in (None, "intercept_resend", "trojan"):
        raise ConfigurationError(f"no attack model for {kind} on sq_qss", "attack.kind")
    probes = [build.trojan_probe(cfg, pass_through=True) for _ in range(n_par - 1)] if kind == "trojan" else []
    pub = ClassicalChannel(tr)
    out = Outcome()

    records = []  # (phases, click or None, reads)
    for _ in range(cfg.rounds):
        phases = [PHASES[int(parties[p].rng.integers(4))] for p in names[:-1]]
        phases.append(LAST_PHASES[int(parties[names[-1]].rng.integers(2))])
        reads = [pr.probe(phases[i], eve_rng) for i, pr in enumerate(probes)]
        s = apply_phase(PLUS, phases[0])
        if kind == "intercept_resend":
            true_b = X if phase_label(phases[0]) == SET_A else Y
            b = choose_basis(attack.strategy, (X, Y), eve_rng, true_b)
            o, _ = measure(s, 0, b, eve_rng)
            s = eigenstate(b, o)
        for phi in phases[1:]:
            s = apply_phase(s, phi)
        o, _ = measure(s, 0, X, det_rng)
        arrived = survival >= 1.0 or det_rng.random() < survival
        hit = "D1" if o == 1 else "D2"
        click = None
        fired = []
        for name in ("D1", "D2"):
            c, detectors[name] = detect(detectors[name], Incident(photons=1 if (arrived and name == hit) else 0),
                                        det_rng)
            if c:
                fired.append(name)
        if fired:
            click = fired[0] if len(fired) == 1 else fired[int(det_rng.integers(2))]
            if cfg.channel.flip_prob and det_rng.random() < cfg.channel.flip_prob:
                click = "D2" if click == "D1" else "D1"
        records.append((phases, click, reads))

    broadcast(pub, names[-1], ("clicks", [j for j, r in enumerate(records) if r[1] is not None]))
    for i, p in enumerate(names):
        broadcast(pub, p, ("labels", [phase_label(r[0][i]) for r in records if r[1] is not None]))
    det_rounds = [j for j, r in enumerate(records) if r[1] is not None and sq_sift([phase_label(x) for x in r[0]])]
    dealer_rng = parties[names[0]].rng
    sample = dealer_rng.random(len(det_rounds)) < cfg.params.sample_fraction
    errs = []
    for j in det_rounds:
        phases, click, _ = records[j]
        rec = sq_reconstruct(phases[1:], click, phase_label(phases[0]))
        errs.append(phase_bit(rec) != phase_bit(phases[0]))
    n_s = int(sample.sum())
    k_s = int(sum(e for e, m in zip(errs, sample) if m))
    out.rate("error", sum(errs), len(errs))
    out.rate("sample_error", k_s, n_s)
    if n_s == 0:
        out.abort("no deterministic rounds to estimate the error rate")
    elif k_s / n_s > cfg.params.max_error:
        out.abort(f"error estimate {k_s / n_s:.4f} above {cfg.params.max_error}")
    alarms = sum(pr.alarms for pr in probes)
    if alarms:
        out.abort(f"watchdog raised {alarms} alarms")

    key = [det_rounds[i] for i in np.flatnonzero(~sample)]
    known = 0
    for j in key:
        phases, click, reads = records[j]
        if reads and all(r is not None for r in reads):
            # Eve holds R_1..R_{N-1}; R_N's phase follows from its public label.
            last = LAST_PHASES[0] if phase_label(phases[-1]) == SET_A else LAST_PHASES[1]
            eve_click = sq_round(list(reads) + [last], eve_rng)
            known += eve_click == click
    out.rate("eve_knowledge", known, len(key))
    out.rate("eve_success", 0 if out.aborted else known, len(key))
    out.rate("legit_accept", 0 if out.aborted else 1, 1)
    out.counts.update(deterministic_rounds=len(det_rounds), key_bits=len(key), alarms=alarms,
                      clicks=sum(r[1] is not None for r in records))
    if probes:
        out.values["trojan_mean_reflected_photons"] = probes[0].n_bar
        reads_ok = sum(r is not None for rec_ in records for r in rec_[2])
        out.rate("trojan_read", reads_ok, len(records) * len(probes))
    tr.record("decision", names[0], aborted=out.aborted, key_bits=len(key))
    return out
