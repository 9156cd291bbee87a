"""DL04 two-way direct communication with frequency-spectrum message encoding.

Alice sends BB84 single photons to Bob.  Bob measures a fraction of them
(forward check), and on the rest applies I or U = i*sigma_y and returns the
photon.  Alice measures in her preparation basis and reads the operation.
Message bits are square waves of U/I at f0 or f1 cycles per block of B slots,
decoded from the DFT magnitude, so lost photons only cost signal-to-noise.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import build
from ..attacks import blind_control, intercept_resend
from ..config import ScenarioConfig
from ..errors import ConfigurationError
from ..harness import ClassicalChannel, ProtocolTranscript, broadcast, derive_stream, make_party, transmit
from ..metrics import Outcome
from ..photonics import OpticalPulse, apply_flip
from .common import BASES, SYMBOLS, Bb84Symbol, symbol_from_outcome

OPS = ("I", "U")


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    error_rate: float
    n: int


def dl04_check(sample: list[tuple], threshold: float) -> CheckResult:
    """Compare (expected, observed) pairs; pass iff the error rate is below ``threshold``."""
    if not sample:
        raise ValueError("empty check sample")
    bad = sum(a != b for a, b in sample)
    rate = bad / len(sample)
    return CheckResult(rate < threshold, rate, len(sample))


def dl04_decode(prepared: Bb84Symbol, measured: Bb84Symbol) -> str:
    if measured.basis != prepared.basis:
        raise ValueError("decoding needs a measurement in the preparation basis")
    return "I" if measured == prepared else "U"


def _check_freqs(block: int, f0: int, f1: int) -> None:
    if f0 == f1 or not (0 < f0 <= block // 2 and 0 < f1 <= block // 2):
        raise ConfigurationError(f"frequencies {f0}, {f1} not resolvable in blocks of {block}", "params.f0")


def freq_encode(bits, block: int = 256, f0: int = 4, f1: int = 8) -> np.ndarray:
    """Per-slot +1 (I) / -1 (U) schedule: each bit is a square wave at its frequency."""
    _check_freqs(block, f0, f1)
    j = np.arange(block)
    waves = {f: np.where(np.sin(2 * np.pi * f * (j + 0.5) / block) >= 0, 1, -1) for f in (f0, f1)}
    if not len(bits):
        return np.zeros(0, dtype=np.int8)
    return np.concatenate([waves[f1 if b else f0] for b in bits]).astype(np.int8)


def freq_decode(seq, block: int = 256, f0: int = 4, f1: int = 8) -> np.ndarray:
    """Bits from a +1/-1/0 sequence (0 = lost slot); -1 marks a block with tied magnitudes."""
    _check_freqs(block, f0, f1)
    x = np.asarray(seq, dtype=float)
    nb = len(x) // block
    spec = np.fft.fft(x[: nb * block].reshape(nb, block), axis=1)
    m0, m1 = np.abs(spec[:, f0]), np.abs(spec[:, f1])
    out = np.where(m1 > m0, 1, 0)
    out[np.isclose(m0, m1, rtol=0, atol=1e-9)] = -1
    return out


def ops_to_signs(ops) -> np.ndarray:
    """I -> +1, U -> -1, None (lost / unknown) -> 0."""
    return np.array([0 if o is None else (1 if o == "I" else -1) for o in ops], dtype=np.int8)


def run_dl04(cfg: ScenarioConfig, seed: int, tr: ProtocolTranscript) -> Outcome:
    alice = make_party(seed, "alice", "receiver")
    bob = make_party(seed, "bob", "sender")
    eve_rng = derive_stream(seed, "eve")
    p = cfg.params
    attack = cfg.attack
    kind = attack.kind if attack else None
    if kind not in (None, "intercept_resend", "blind_control", "trojan"):
        raise ConfigurationError(f"no attack model for {kind} on dl04_qsdc", "attack.kind")
    fwd, bwd = build.channel(cfg, "alice-bob"), build.channel(cfg, "bob-alice")
    rng_f, rng_b = derive_stream(seed, "channel:forward"), derive_stream(seed, "channel:backward")
    control = build.polarization_receiver(cfg, BASES)  # Bob's passive control module
    decoder = build.polarization_receiver(cfg, BASES)  # Alice measures in her own basis
    mon_bob = build.calibration(cfg, derive_stream(seed, "calibration:bob"))
    mon_alice = build.calibration(cfg, derive_stream(seed, "calibration:alice"))
    probe = build.trojan_probe(cfg, pass_through=True) if kind == "trojan" else None
    survival = fwd.survival
    eta = cfg.detector.eta
    pub = ClassicalChannel(tr)
    out = Outcome()

    n = cfg.rounds
    use = bob.rng.random(n)
    kind_of = np.where(use < p.forward_check, "forward", np.where(use < p.forward_check + p.backward_check,
                                                                 "backward", "message"))
    msg_slots = np.flatnonzero(kind_of == "message")
    n_bits = len(msg_slots) // p.block_length
    message = bob.rng.integers(2, size=n_bits)
    schedule = freq_encode(message, p.block_length, p.f0, p.f1)
    op_at = {int(j): ("I" if s > 0 else "U") for j, s in zip(msg_slots, schedule)}

    fwd_sample, bwd_sample = [], []
    alice_ops: dict[int, str | None] = {}
    eve_ops: dict[int, str | None] = {}
    for j in range(n):
        sym = SYMBOLS[int(alice.rng.integers(4))]
        pulse = OpticalPulse(mu=1.0, photons=1, encoding=sym.state)
        eve_state = None
        if kind == "intercept_resend":
            b = "ZX"[int(eve_rng.integers(2))]
            pulse, _, _ = intercept_resend(pulse, BASES[b], eve_rng)
        elif kind == "blind_control":
            # A passive control module always clicks on a faked state, while Alice's
            # fixed-basis measurement clicks only when Eve's basis is hers; the
            # forward and return rates both match honest ones for survival <= 1/2.
            b = "ZX"[int(eve_rng.integers(2))]
            _, o, _ = intercept_resend(pulse, BASES[b], eve_rng)
            if eve_rng.random() < min(1.0, survival * eta):
                eve_state = symbol_from_outcome(b, o)
                pulse = blind_control(eve_state.state, attack.faked_energy_j, 0.5, attack.cw_power_w,
                                      survival=survival)
            else:
                pulse = OpticalPulse(mu=0.0, cw_power=attack.cw_power_w / survival)
        pulse = transmit(fwd, pulse, rng_f) if pulse is not None else None

        if kind_of[j] == "forward":
            if mon_bob is not None and mon_bob.take_slot():
                keys = list(control.detectors)
                mon_bob.run_test(control.detectors, keys[int(mon_bob.rng.integers(len(keys)))])
                continue
            d = control.receive(pulse, bob.rng)
            if d is not None and d.basis == sym.basis:
                fwd_sample.append((sym, symbol_from_outcome(d.basis, d.outcome)))
            continue

        op = op_at.get(j, "I") if kind_of[j] == "message" else OPS[int(bob.rng.integers(2))]
        if probe is not None:
            read = probe.probe(op, eve_rng)
            if kind_of[j] == "message":
                eve_ops[j] = read
        if pulse is not None and pulse.encoding is not None:
            pulse = replace(pulse, encoding=apply_flip(pulse.encoding, op))
        if kind == "blind_control":
            if eve_state is not None:
                # Bright light comes back unchanged but for Bob's flip, which Eve reads classically.
                eve_ops[j] = op
                if eve_rng.random() < min(1.0, 2 * survival):
                    back = eve_state if op == "I" else eve_state.flipped()
                    pulse = blind_control(back.state, attack.faked_energy_j, 1.0, attack.cw_power_w,
                                          survival=survival)
                else:
                    pulse = OpticalPulse(mu=0.0, cw_power=attack.cw_power_w / survival)
            else:
                eve_ops[j] = None
        pulse = transmit(bwd, pulse, rng_b) if pulse is not None else None
        if mon_alice is not None and mon_alice.take_slot():
            keys = list(decoder.detectors)
            mon_alice.run_test(decoder.detectors, keys[int(mon_alice.rng.integers(len(keys)))])
            alice_ops[j] = None
            continue
        d = decoder.receive(pulse, alice.rng, arm=sym.basis)
        got = dl04_decode(sym, symbol_from_outcome(d.basis, d.outcome)) if d is not None else None
        alice_ops[j] = got
        if kind_of[j] == "backward" and got is not None:
            bwd_sample.append((op, got))

    broadcast(pub, "bob", ("forward_check", len(fwd_sample)))
    for name, sample in (("forward_error", fwd_sample), ("backward_error", bwd_sample)):
        if not sample:
            out.abort(f"no {name.split('_')[0]}-check detections")
            out.rate(name, 0, 0)
            continue
        res = dl04_check(sample, p.check_threshold)
        out.rate(name, round(res.error_rate * res.n), res.n)
        if not res.passed:
            out.abort(f"{name.replace('_', ' ')} {res.error_rate:.4f} above {p.check_threshold}")
    for mon, who in ((mon_bob, "bob"), (mon_alice, "alice")):
        if mon is not None and mon.detected:
            out.abort(f"calibration flagged {who}'s detectors")
    if probe is not None and probe.alarms:
        out.abort(f"watchdog raised {probe.alarms} alarms")
    fe, be = out.rates["forward_error"], out.rates["backward_error"]
    out.rate("error", fe.k + be.k, fe.n + be.n)

    seq = msg_slots[: n_bits * p.block_length]
    decoded = freq_decode(ops_to_signs([alice_ops.get(int(j)) for j in seq]), p.block_length, p.f0, p.f1)
    out.rate("message_error", int((decoded != message).sum()), n_bits)
    if kind in ("blind_control", "trojan"):
        eve_bits = freq_decode(ops_to_signs([eve_ops.get(int(j)) for j in seq]), p.block_length, p.f0, p.f1)
    else:
        eve_bits = eve_rng.integers(2, size=n_bits)
    out.rate("eve_knowledge", int((eve_bits == message).sum()), n_bits)
    out.rate("eve_success", int(n_bits > 0 and (eve_bits == message).all() and not out.aborted), 1)
    out.rate("legit_accept", int(not out.aborted and n_bits > 0 and (decoded == message).all()), 1)
    if probe is not None:
        out.rate("trojan_read", sum(o is not None for o in eve_ops.values()), len(eve_ops))
        out.values["trojan_mean_reflected_photons"] = probe.n_bar
    out.counts.update(message_bits=n_bits, forward_checks=len(fwd_sample), backward_checks=len(bwd_sample),
                      delivered=sum(o is not None for o in alice_ops.values()))
    tr.record("decision", "alice", decoded_bits=int(n_bits), aborted=out.aborted)
    return out
